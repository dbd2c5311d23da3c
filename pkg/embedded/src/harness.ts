/**
 * Host-side verification harness.
 *
 * Usage: node dist/harness.js <model.lume> <golden.bin> [tolerance]
 *
 * Loads the blob, replays every golden record, prints the per-record
 * deviation from the recorded probabilities, and exits 0 only if all
 * records stay within tolerance (default 1e-4).
 */

import { readFileSync } from "node:fs";

import { Status } from "./errors";
import { parseGolden } from "./golden";
import { StaticModel } from "./runtime";

function main(argv: string[]): number {
    if (argv.length < 2) {
        console.error("usage: harness <model.lume> <golden.bin> [tolerance]");
        return 2;
    }
    const tolerance = argv.length > 2 ? Number(argv[2]) : 1e-4;
    const blobBytes = new Uint8Array(readFileSync(argv[0]));
    const loaded = StaticModel.fromBlob(blobBytes);
    if (loaded.code !== Status.OK || !loaded.model) {
        console.error(`model load failed: ${Status[loaded.code]} (${loaded.code})`);
        return 1;
    }
    const model = loaded.model;
    console.log(
        `loaded ${argv[0]}: ${model.parameterCount} parameters, ` +
        `window ${model.windowSamples} samples, threshold ${model.threshold.toFixed(2)}, ` +
        `${model.guard.allocations} buffers (${model.guard.bytes} bytes) preallocated`
    );

    const golden = parseGolden(new Uint8Array(readFileSync(argv[1])));
    if (golden.code !== Status.OK || !golden.records) {
        console.error(`golden file parse failed: ${Status[golden.code]}`);
        return 1;
    }

    let worst = 0;
    let failures = 0;
    golden.records.forEach((record, i) => {
        const result = model.processWindow(record.pcm);
        if (result.code !== Status.OK) {
            console.error(`record ${i}: processWindow -> ${Status[result.code]}`);
            failures += 1;
            return;
        }
        let dev = 0;
        for (let k = 0; k < record.expected.length; k++) {
            dev = Math.max(dev, Math.abs(result.probs[k] - record.expected[k]));
        }
        worst = Math.max(worst, dev);
        const ok = dev <= tolerance;
        if (!ok) failures += 1;
        console.log(
            `record ${String(i).padStart(3)}: max deviation ${dev.toExponential(3)} ` +
            `name_sum ${result.nameSum.toFixed(4)} ${ok ? "ok" : "FAIL"}`
        );
    });

    const verdict = failures === 0 ? "PASS" : "FAIL";
    console.log(
        `${verdict}: ${golden.records.length - failures}/${golden.records.length} ` +
        `records within ${tolerance} (worst ${worst.toExponential(3)})`
    );
    return failures === 0 ? 0 : 1;
}

process.exit(main(process.argv.slice(2)));
