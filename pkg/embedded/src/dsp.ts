/**
 * Fixed-size DSP kernels: radix-2 FFT, Hamming window, mel filterbank,
 * and the orthonormal DCT-II matrix. All tables are precomputed at load
 * through the allocation guard; the hot path only reads and writes them.
 */

import { AllocGuard } from "./alloc";

export function isPowerOfTwo(n: number): boolean {
    return n > 0 && (n & (n - 1)) === 0;
}

export function melFromHz(hz: number): number {
    return 2595.0 * Math.log10(1.0 + hz / 700.0);
}

export function hzFromMel(mel: number): number {
    return 700.0 * (Math.pow(10.0, mel / 2595.0) - 1.0);
}

/** Symmetric Hamming window, matching numpy.hamming. */
export function hammingWindow(guard: AllocGuard, length: number): Float64Array {
    const win = guard.f64(length);
    if (length === 1) {
        win[0] = 1.0;
        return win;
    }
    for (let n = 0; n < length; n++) {
        win[n] = 0.54 - 0.46 * Math.cos((2 * Math.PI * n) / (length - 1));
    }
    return win;
}

/** In-place iterative radix-2 FFT over preallocated re/im buffers. */
export class Fft {
    private readonly bitrev: Uint32Array;
    private readonly cos: Float64Array;
    private readonly sin: Float64Array;

    constructor(guard: AllocGuard, readonly size: number) {
        this.bitrev = guard.u32(size);
        const bits = Math.log2(size);
        for (let i = 0; i < size; i++) {
            let r = 0;
            for (let b = 0; b < bits; b++) {
                r = (r << 1) | ((i >>> b) & 1);
            }
            this.bitrev[i] = r;
        }
        this.cos = guard.f64(size / 2);
        this.sin = guard.f64(size / 2);
        for (let k = 0; k < size / 2; k++) {
            this.cos[k] = Math.cos((-2 * Math.PI * k) / size);
            this.sin[k] = Math.sin((-2 * Math.PI * k) / size);
        }
    }

    run(re: Float64Array, im: Float64Array): void {
        const n = this.size;
        for (let i = 0; i < n; i++) {
            const j = this.bitrev[i];
            if (j > i) {
                let t = re[i]; re[i] = re[j]; re[j] = t;
                t = im[i]; im[i] = im[j]; im[j] = t;
            }
        }
        for (let len = 2; len <= n; len <<= 1) {
            const half = len >> 1;
            const step = n / len;
            for (let start = 0; start < n; start += len) {
                for (let k = 0; k < half; k++) {
                    const wr = this.cos[k * step];
                    const wi = this.sin[k * step];
                    const a = start + k;
                    const b = a + half;
                    const tr = re[b] * wr - im[b] * wi;
                    const ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
        }
    }
}

/**
 * Triangular mel filterbank, flattened (filters x bins) row-major.
 * Centers sit equally spaced on the mel axis between low and high; each
 * triangle is evaluated at the FFT bin frequencies.
 */
export function melFilterbank(
    guard: AllocGuard,
    numFilters: number,
    fftSize: number,
    sampleRate: number,
    lowHz: number,
    highHz: number,
): Float64Array {
    const bins = fftSize / 2 + 1;
    const bank = guard.f64(numFilters * bins);
    const lowMel = melFromHz(lowHz);
    const highMel = melFromHz(highHz);
    const edges = guard.f64(numFilters + 2);
    for (let k = 0; k < numFilters + 2; k++) {
        edges[k] = hzFromMel(lowMel + (k * (highMel - lowMel)) / (numFilters + 1));
    }
    for (let f = 0; f < numFilters; f++) {
        const left = edges[f];
        const center = edges[f + 1];
        const right = edges[f + 2];
        for (let i = 0; i < bins; i++) {
            const hz = (i * sampleRate) / fftSize;
            const rising = (hz - left) / (center - left);
            const falling = (right - hz) / (right - center);
            const w = Math.min(rising, falling);
            bank[f * bins + i] = w > 0 ? w : 0;
        }
    }
    return bank;
}

/** Orthonormal DCT-II matrix, flattened (coeffs x filters) row-major. */
export function dctMatrix(
    guard: AllocGuard, numCoeffs: number, numFilters: number
): Float64Array {
    const mat = guard.f64(numCoeffs * numFilters);
    const s0 = Math.sqrt(1.0 / numFilters);
    const sk = Math.sqrt(2.0 / numFilters);
    for (let k = 0; k < numCoeffs; k++) {
        const scale = k === 0 ? s0 : sk;
        for (let n = 0; n < numFilters; n++) {
            mat[k * numFilters + n] =
                scale * Math.cos((Math.PI * k * (2 * n + 1)) / (2 * numFilters));
        }
    }
    return mat;
}
