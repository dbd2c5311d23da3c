"""Model export, verification, and golden vectors.

Loads the trained blob back, measures the float32 round-trip deviation,
shows that corruption is rejected, and emits a golden-vector file that an
independent runtime (see embedded/) can verify against.
"""

import numpy as np

from _common import OUT, SR, ensure_model
from kwspot.export import (
    ExportError,
    emit_golden_vectors,
    load_exported,
    read_golden_vectors,
)


def main():
    blob = ensure_model()
    model = load_exported(blob)
    size = blob.stat().st_size
    params = sum(int(np.prod(lw["W"].shape)) + lw["b"].size
                 for lw in model.weights if lw)
    print(f"blob {blob} ({size} bytes, {params} parameters, "
          f"threshold {model.threshold:.2f})")

    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(50):
        window = rng.uniform(-0.5, 0.5, SR)
        probs = model.classify_window(window)
        worst = max(worst, abs(probs.sum() - 1.0))
    print(f"50 random windows classified; |sum(p) - 1| <= {worst:.2e}")

    corrupted = bytearray(blob.read_bytes())
    corrupted[len(corrupted) // 2] ^= 0x10
    bad = OUT / "model" / "corrupted.lume"
    bad.write_bytes(bytes(corrupted))
    try:
        load_exported(bad)
        print("corruption NOT detected (bug!)")
    except ExportError as exc:
        print(f"flipped one bit mid-file -> rejected: {type(exc).__name__}")

    golden = OUT / "model" / "golden.bin"
    emit_golden_vectors(blob, count=32, seed=0, out_path=golden)
    records = read_golden_vectors(golden)
    print(f"\nwrote {len(records)} golden vectors to {golden} "
          f"({golden.stat().st_size} bytes)")
    pcm, probs = records[0]
    again = model.classify_window(pcm.astype(np.float64) / 32768)
    print(f"record 0 re-classified: max deviation "
          f"{np.abs(again - probs).max():.2e} (float32 storage rounding)")
    print("\nfeed model.lume + golden.bin to the embedded runtime harness "
          "(embedded/) to prove cross-runtime equivalence.")


if __name__ == "__main__":
    main()
