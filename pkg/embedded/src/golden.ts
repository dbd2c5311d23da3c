/** Parser for the golden-vector file ("GOLD"): PCM windows paired with
 * the probabilities the exporting pipeline computed for them. */

import { Status } from "./errors";

export interface GoldenRecord {
    pcm: Int16Array;
    expected: Float32Array;
}

export function parseGolden(
    bytes: Uint8Array
): { code: Status; records?: GoldenRecord[]; windowSamples?: number } {
    if (bytes.length < 16 || bytes[0] !== 0x47 || bytes[1] !== 0x4f ||
        bytes[2] !== 0x4c || bytes[3] !== 0x44) {  // "GOLD"
        return { code: Status.BAD_MAGIC };
    }
    const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
    const count = view.getUint32(4, true);
    const windowSamples = view.getUint32(8, true);
    const classes = view.getUint32(12, true);
    const recordSize = 4 + 2 * windowSamples + 4 * classes;
    if (bytes.length !== 16 + count * recordSize) {
        return { code: Status.TRUNCATED };
    }
    const records: GoldenRecord[] = [];
    let pos = 16;
    for (let i = 0; i < count; i++) {
        const index = view.getUint32(pos, true);
        if (index !== i) return { code: Status.MALFORMED };
        pos += 4;
        const pcm = new Int16Array(windowSamples);
        for (let s = 0; s < windowSamples; s++) {
            pcm[s] = view.getInt16(pos + 2 * s, true);
        }
        pos += 2 * windowSamples;
        const expected = new Float32Array(classes);
        for (let k = 0; k < classes; k++) {
            expected[k] = view.getFloat32(pos + 4 * k, true);
        }
        pos += 4 * classes;
        records.push({ pcm, expected });
    }
    return { code: Status.OK, records, windowSamples };
}
