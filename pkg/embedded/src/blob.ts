/**
 * Parser for the model blob (see docs/FORMATS.md in the repository root).
 * Little-endian throughout; returns a status code instead of throwing.
 */

import { crc32 } from "./crc32";
import { Status } from "./errors";

export const FORMAT_VERSION = 1;

export type Activation = "none" | "relu" | "softmax";

export interface ConvLayer {
    kind: "conv1d";
    filters: number;
    kernel: number;
    stride: number;
    activation: Activation;
    wOff: number;
    wLen: number;
    bOff: number;
    bLen: number;
}

export interface DenseLayer {
    kind: "dense";
    units: number;
    activation: Activation;
    wOff: number;
    wLen: number;
    bOff: number;
    bLen: number;
}

export type Layer =
    | { kind: "reshape" }
    | { kind: "flatten" }
    | { kind: "maxpool1d"; pool: number }
    | { kind: "dropout"; rate: number }
    | ConvLayer
    | DenseLayer;

export interface BlobModel {
    sampleRate: number;
    windowS: number;
    frameLengthS: number;
    frameStrideS: number;
    numMelFilters: number;
    numCeps: number;
    fftSize: number;
    preEmphasis: number;
    lowHz: number;
    highHz: number;
    inputFrames: number;
    inputCoeffs: number;
    numClasses: number;
    means: Float32Array;
    stds: Float32Array;
    layers: Layer[];
    weights: Float32Array;
    threshold: number;
    parameterCount: number;
}

const ACTIVATIONS: Record<number, Activation> = { 0: "none", 1: "relu", 2: "softmax" };

class Cursor {
    pos = 0;
    constructor(private view: DataView) {}

    private fits(n: number): boolean {
        return this.pos + n <= this.view.byteLength;
    }

    u8(): number | null {
        if (!this.fits(1)) return null;
        return this.view.getUint8(this.pos++);
    }

    u16(): number | null {
        if (!this.fits(2)) return null;
        const v = this.view.getUint16(this.pos, true);
        this.pos += 2;
        return v;
    }

    u32(): number | null {
        if (!this.fits(4)) return null;
        const v = this.view.getUint32(this.pos, true);
        this.pos += 4;
        return v;
    }

    f32(): number | null {
        if (!this.fits(4)) return null;
        const v = this.view.getFloat32(this.pos, true);
        this.pos += 4;
        return v;
    }

    f32array(count: number): Float32Array | null {
        if (!this.fits(4 * count)) return null;
        const out = new Float32Array(count);
        for (let i = 0; i < count; i++) {
            out[i] = this.view.getFloat32(this.pos + 4 * i, true);
        }
        this.pos += 4 * count;
        return out;
    }
}

export function parseBlob(bytes: Uint8Array): { code: Status; model?: BlobModel } {
    if (bytes.length < 4 || bytes[0] !== 0x4c || bytes[1] !== 0x55 ||
        bytes[2] !== 0x4d || bytes[3] !== 0x45) {  // "LUME"
        return { code: Status.BAD_MAGIC };
    }
    const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
    const c = new Cursor(view);
    c.pos = 4;
    const version = c.u16();
    if (version === null) return { code: Status.TRUNCATED };
    if (version !== FORMAT_VERSION) return { code: Status.BAD_VERSION };

    const sampleRate = c.u32();
    const windowS = c.f32();
    const frameLengthS = c.f32();
    const frameStrideS = c.f32();
    const numMelFilters = c.u32();
    const numCeps = c.u32();
    const fftSize = c.u32();
    const preEmphasis = c.f32();
    const lowHz = c.f32();
    const highHz = c.f32();
    const inputFrames = c.u32();
    const inputCoeffs = c.u32();
    const numClasses = c.u32();
    const statsCount = c.u32();
    if (statsCount === null) return { code: Status.TRUNCATED };
    const means = c.f32array(statsCount);
    const stds = c.f32array(statsCount);
    if (means === null || stds === null) return { code: Status.TRUNCATED };

    const layerCount = c.u16();
    if (layerCount === null) return { code: Status.TRUNCATED };
    const layers: Layer[] = [];
    for (let i = 0; i < layerCount; i++) {
        const kind = c.u8();
        if (kind === null) return { code: Status.TRUNCATED };
        if (kind === 0) {
            layers.push({ kind: "reshape" });
        } else if (kind === 1) {
            const filters = c.u32();
            const kernel = c.u32();
            const stride = c.u32();
            const act = c.u8();
            const wOff = c.u32();
            const wLen = c.u32();
            const bOff = c.u32();
            const bLen = c.u32();
            if (bLen === null) return { code: Status.TRUNCATED };
            const activation = ACTIVATIONS[act as number];
            if (!activation || !filters || !kernel || !stride) {
                return { code: Status.MALFORMED };
            }
            layers.push({ kind: "conv1d", filters: filters!, kernel: kernel!,
                          stride: stride!, activation, wOff: wOff!, wLen: wLen!,
                          bOff: bOff!, bLen });
        } else if (kind === 2) {
            const pool = c.u32();
            if (pool === null) return { code: Status.TRUNCATED };
            if (pool < 1) return { code: Status.MALFORMED };
            layers.push({ kind: "maxpool1d", pool });
        } else if (kind === 3) {
            const rate = c.f32();
            if (rate === null) return { code: Status.TRUNCATED };
            layers.push({ kind: "dropout", rate });
        } else if (kind === 4) {
            layers.push({ kind: "flatten" });
        } else if (kind === 5) {
            const units = c.u32();
            const act = c.u8();
            const wOff = c.u32();
            const wLen = c.u32();
            const bOff = c.u32();
            const bLen = c.u32();
            if (bLen === null) return { code: Status.TRUNCATED };
            const activation = ACTIVATIONS[act as number];
            if (!activation || !units) return { code: Status.MALFORMED };
            layers.push({ kind: "dense", units: units!, activation,
                          wOff: wOff!, wLen: wLen!, bOff: bOff!, bLen });
        } else {
            return { code: Status.MALFORMED };
        }
    }

    const weightCount = c.u32();
    if (weightCount === null) return { code: Status.TRUNCATED };
    const weights = c.f32array(weightCount);
    if (weights === null) return { code: Status.TRUNCATED };
    const threshold = c.f32();
    const storedCrc = c.u32();
    if (storedCrc === null) return { code: Status.TRUNCATED };
    if (c.pos !== bytes.length) return { code: Status.TRUNCATED };
    if (crc32(bytes, bytes.length - 4) !== storedCrc) return { code: Status.BAD_CRC };

    for (const layer of layers) {
        if (layer.kind === "conv1d" || layer.kind === "dense") {
            if (layer.wOff + layer.wLen > weightCount ||
                layer.bOff + layer.bLen > weightCount) {
                return { code: Status.MALFORMED };
            }
        }
    }

    return {
        code: Status.OK,
        model: {
            sampleRate: sampleRate!,
            windowS: windowS!,
            frameLengthS: frameLengthS!,
            frameStrideS: frameStrideS!,
            numMelFilters: numMelFilters!,
            numCeps: numCeps!,
            fftSize: fftSize!,
            preEmphasis: preEmphasis!,
            lowHz: lowHz!,
            highHz: highHz!,
            inputFrames: inputFrames!,
            inputCoeffs: inputCoeffs!,
            numClasses: numClasses!,
            means,
            stds,
            layers,
            weights,
            threshold: threshold!,
            parameterCount: weightCount,
        },
    };
}
