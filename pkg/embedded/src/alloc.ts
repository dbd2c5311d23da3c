/**
 * Allocation guard: every runtime buffer is created through this class,
 * and the model seals it once loading completes. Any allocation attempt
 * in the steady state throws, which the tests assert never happens
 * during process_window.
 */
export class AllocGuard {
    sealed = false;
    allocations = 0;
    bytes = 0;

    private track(byteLength: number): void {
        if (this.sealed) {
            throw new Error("allocation after seal: steady state must be allocation-free");
        }
        this.allocations += 1;
        this.bytes += byteLength;
    }

    f64(n: number): Float64Array {
        this.track(8 * n);
        return new Float64Array(n);
    }

    f32(n: number): Float32Array {
        this.track(4 * n);
        return new Float32Array(n);
    }

    u32(n: number): Uint32Array {
        this.track(4 * n);
        return new Uint32Array(n);
    }

    seal(): void {
        this.sealed = true;
    }
}
