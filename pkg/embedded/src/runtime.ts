/**
 * StaticModel: loads a model blob into fixed-capacity buffers and
 * classifies one-second PCM windows with zero steady-state allocation,
 * mirroring the exporting pipeline's arithmetic (MFCC -> normalize ->
 * conv/pool/dense -> softmax) in 64-bit floats over float32 weights.
 */

import { AllocGuard } from "./alloc";
import { BlobModel, Layer, parseBlob } from "./blob";
import { LIMITS, Status } from "./errors";
import { Fft, dctMatrix, hammingWindow, isPowerOfTwo, melFilterbank } from "./dsp";

const LOG_FLOOR = 1e-10;
const PCM_SCALE = 32768;
const NAME_CLASS_COUNT = 4;

export interface WindowResult {
    code: Status;
    /** View of the internal probability buffer; valid until the next call. */
    probs: Float64Array;
    nameSum: number;
    trigger: boolean;
}

interface LayerPlan {
    layer: Layer;
    inRows: number;
    inCols: number;
    outRows: number;
    outCols: number;
}

function propagate(model: BlobModel): LayerPlan[] | null {
    let rows = model.inputFrames;
    let cols = model.inputCoeffs;
    let flat = false;
    const plans: LayerPlan[] = [];
    for (const layer of model.layers) {
        const plan: LayerPlan = { layer, inRows: rows, inCols: cols,
                                  outRows: rows, outCols: cols };
        switch (layer.kind) {
            case "reshape":
            case "dropout":
                break;
            case "conv1d":
                if (flat || layer.kernel > rows) return null;
                if (layer.wLen !== layer.filters * cols * layer.kernel ||
                    layer.bLen !== layer.filters) return null;
                plan.outRows = Math.floor((rows - layer.kernel) / layer.stride) + 1;
                plan.outCols = layer.filters;
                break;
            case "maxpool1d":
                if (flat || Math.floor(rows / layer.pool) < 1) return null;
                plan.outRows = Math.floor(rows / layer.pool);
                break;
            case "flatten":
                plan.outRows = 1;
                plan.outCols = rows * cols;
                flat = true;
                break;
            case "dense":
                if (!flat) return null;
                if (layer.wLen !== layer.units * cols || layer.bLen !== layer.units) {
                    return null;
                }
                plan.outCols = layer.units;
                break;
        }
        rows = plan.outRows;
        cols = plan.outCols;
        plans.push(plan);
    }
    if (rows !== 1 || cols !== model.numClasses) return null;
    const last = model.layers[model.layers.length - 1];
    if (!last || last.kind !== "dense" || last.activation !== "softmax") return null;
    return plans;
}

export class StaticModel {
    readonly guard = new AllocGuard();
    readonly threshold: number;
    readonly windowSamples: number;
    readonly parameterCount: number;
    private loaded = false;

    private readonly blob: BlobModel;
    private readonly plans: LayerPlan[];
    private readonly frameSamples: number;
    private readonly strideSamples: number;
    private readonly bins: number;

    private readonly fft: Fft;
    private readonly hamming: Float64Array;
    private readonly bank: Float64Array;
    private readonly dct: Float64Array;
    private readonly re: Float64Array;
    private readonly im: Float64Array;
    private readonly power: Float64Array;
    private readonly logmel: Float64Array;
    private readonly bufA: Float64Array;
    private readonly bufB: Float64Array;
    private readonly probs: Float64Array;

    private constructor(blob: BlobModel, plans: LayerPlan[]) {
        this.blob = blob;
        this.plans = plans;
        this.threshold = blob.threshold;
        this.windowSamples = Math.round(blob.windowS * blob.sampleRate);
        this.parameterCount = blob.parameterCount;
        this.frameSamples = Math.round(blob.frameLengthS * blob.sampleRate);
        this.strideSamples = Math.round(blob.frameStrideS * blob.sampleRate);
        this.bins = blob.fftSize / 2 + 1;

        const g = this.guard;
        this.fft = new Fft(g, blob.fftSize);
        this.hamming = hammingWindow(g, this.frameSamples);
        this.bank = melFilterbank(g, blob.numMelFilters, blob.fftSize,
                                  blob.sampleRate, blob.lowHz, blob.highHz);
        this.dct = dctMatrix(g, blob.numCeps, blob.numMelFilters);
        this.re = g.f64(blob.fftSize);
        this.im = g.f64(blob.fftSize);
        this.power = g.f64(this.bins);
        this.logmel = g.f64(blob.numMelFilters);

        let maxElems = blob.inputFrames * blob.inputCoeffs;
        for (const plan of plans) {
            maxElems = Math.max(maxElems, plan.outRows * plan.outCols);
        }
        this.bufA = g.f64(maxElems);
        this.bufB = g.f64(maxElems);
        this.probs = g.f64(blob.numClasses);
        g.seal();
        this.loaded = true;
    }

    /** Validates, sizes, and precomputes everything; returns a status code. */
    static fromBlob(bytes: Uint8Array): { code: Status; model?: StaticModel } {
        const parsed = parseBlob(bytes);
        if (parsed.code !== Status.OK || !parsed.model) {
            return { code: parsed.code };
        }
        const blob = parsed.model;
        if (
            blob.numMelFilters > LIMITS.maxMelFilters ||
            blob.inputFrames > LIMITS.maxFrames ||
            blob.parameterCount > LIMITS.maxParameters ||
            blob.fftSize > LIMITS.maxFftSize ||
            blob.numClasses > LIMITS.maxClasses ||
            Math.round(blob.windowS * blob.sampleRate) > LIMITS.maxWindowSamples
        ) {
            return { code: Status.CAPACITY };
        }
        if (!isPowerOfTwo(blob.fftSize) ||
            blob.numCeps > blob.numMelFilters ||
            blob.numCeps !== blob.inputCoeffs ||
            blob.means.length !== blob.inputCoeffs ||
            Math.round(blob.frameLengthS * blob.sampleRate) > blob.fftSize) {
            return { code: Status.MALFORMED };
        }
        const plans = propagate(blob);
        if (plans === null) return { code: Status.MALFORMED };
        const expectFrames = Math.floor(
            (Math.round(blob.windowS * blob.sampleRate) -
             Math.round(blob.frameLengthS * blob.sampleRate)) /
            Math.round(blob.frameStrideS * blob.sampleRate)) + 1;
        if (expectFrames !== blob.inputFrames) return { code: Status.MALFORMED };
        return { code: Status.OK, model: new StaticModel(blob, plans) };
    }

    release(): void {
        this.loaded = false;
    }

    /** MFCC features for the window, written into `out` (frames x coeffs). */
    private computeFeatures(pcm: Int16Array, out: Float64Array): void {
        const b = this.blob;
        for (let t = 0; t < b.inputFrames; t++) {
            const start = t * this.strideSamples;
            // pre-emphasis computed per sample: no window-length buffer needed
            for (let i = 0; i < this.frameSamples; i++) {
                const idx = start + i;
                const v = idx === 0
                    ? pcm[0] / PCM_SCALE
                    : pcm[idx] / PCM_SCALE - b.preEmphasis * (pcm[idx - 1] / PCM_SCALE);
                this.re[i] = v * this.hamming[i];
            }
            this.re.fill(0, this.frameSamples);
            this.im.fill(0);
            this.fft.run(this.re, this.im);
            for (let k = 0; k < this.bins; k++) {
                this.power[k] = this.re[k] * this.re[k] + this.im[k] * this.im[k];
            }
            for (let f = 0; f < b.numMelFilters; f++) {
                let acc = 0;
                const row = f * this.bins;
                for (let k = 0; k < this.bins; k++) {
                    acc += this.power[k] * this.bank[row + k];
                }
                this.logmel[f] = Math.log(acc + LOG_FLOOR);
            }
            for (let j = 0; j < b.numCeps; j++) {
                let acc = 0;
                const row = j * b.numMelFilters;
                for (let f = 0; f < b.numMelFilters; f++) {
                    acc += this.dct[row + f] * this.logmel[f];
                }
                out[t * b.numCeps + j] = (acc - b.means[j]) / b.stds[j];
            }
        }
    }

    private forward(input: Float64Array): Float64Array {
        const w = this.blob.weights;
        let src = input;
        let dst = src === this.bufA ? this.bufB : this.bufA;
        for (const plan of this.plans) {
            const layer = plan.layer;
            if (layer.kind === "reshape" || layer.kind === "dropout" ||
                layer.kind === "flatten") {
                continue;  // layout is already flat row-major
            }
            if (layer.kind === "conv1d") {
                const cin = plan.inCols;
                for (let l = 0; l < plan.outRows; l++) {
                    const base = l * layer.stride;
                    for (let f = 0; f < layer.filters; f++) {
                        let acc = w[layer.bOff + f];
                        const wBase = layer.wOff + f * cin * layer.kernel;
                        for (let c = 0; c < cin; c++) {
                            const wRow = wBase + c * layer.kernel;
                            for (let k = 0; k < layer.kernel; k++) {
                                acc += src[(base + k) * cin + c] * w[wRow + k];
                            }
                        }
                        if (layer.activation === "relu" && acc < 0) acc = 0;
                        dst[l * layer.filters + f] = acc;
                    }
                }
            } else if (layer.kind === "maxpool1d") {
                const cols = plan.inCols;
                for (let l = 0; l < plan.outRows; l++) {
                    for (let c = 0; c < cols; c++) {
                        let best = src[l * layer.pool * cols + c];
                        for (let p = 1; p < layer.pool; p++) {
                            const v = src[(l * layer.pool + p) * cols + c];
                            if (v > best) best = v;
                        }
                        dst[l * cols + c] = best;
                    }
                }
            } else {  // dense
                const inputs = plan.inCols;
                for (let u = 0; u < layer.units; u++) {
                    let acc = w[layer.bOff + u];
                    const wRow = layer.wOff + u * inputs;
                    for (let i = 0; i < inputs; i++) {
                        acc += src[i] * w[wRow + i];
                    }
                    dst[u] = acc;
                }
            }
            const t = src;
            src = dst;
            dst = t;
        }
        return src;
    }

    processWindow(pcm: Int16Array): WindowResult {
        if (!this.loaded) {
            return { code: Status.UNLOADED, probs: this.probs, nameSum: 0,
                     trigger: false };
        }
        if (pcm.length !== this.windowSamples) {
            return { code: Status.MALFORMED, probs: this.probs, nameSum: 0,
                     trigger: false };
        }
        this.computeFeatures(pcm, this.bufA);
        const logits = this.forward(this.bufA);
        const k = this.blob.numClasses;
        let max = logits[0];
        for (let i = 1; i < k; i++) {
            if (logits[i] > max) max = logits[i];
        }
        let sum = 0;
        for (let i = 0; i < k; i++) {
            this.probs[i] = Math.exp(logits[i] - max);
            sum += this.probs[i];
        }
        let nameSum = 0;
        for (let i = 0; i < k; i++) {
            this.probs[i] /= sum;
            if (i < NAME_CLASS_COUNT) nameSum += this.probs[i];
        }
        return {
            code: Status.OK,
            probs: this.probs,
            nameSum,
            trigger: nameSum >= this.threshold,
        };
    }
}
