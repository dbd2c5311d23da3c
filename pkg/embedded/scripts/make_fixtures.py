"""Regenerate the runtime test fixtures from the exporting pipeline.

Run from the repository root with the Python package installed:

    python embedded/scripts/make_fixtures.py

Writes fixtures/model.lume (deterministic seeded weights),
fixtures/golden.bin (32 records), and fixtures/model_80mel.lume
(over the runtime's 64-filter capacity, for the capacity-error test).
"""

from pathlib import Path

import numpy as np

from kwspot import nn
from kwspot.export import emit_golden_vectors, export_model
from kwspot.features import FeatureStats, MfccConfig

FIXTURES = Path(__file__).parent.parent / "fixtures"


def main():
    FIXTURES.mkdir(exist_ok=True)
    rng = np.random.default_rng(2024)

    mfcc = MfccConfig()
    spec = nn.default_model_spec((31, 13))
    weights = nn.init_model(spec, seed=7)
    stats = FeatureStats(
        rng.normal(0, 1, 13), rng.uniform(0.5, 2.0, 13), mfcc.fingerprint(16000)
    )
    model_path = FIXTURES / "model.lume"
    export_model(spec, weights, mfcc, stats, 0.70, model_path)
    emit_golden_vectors(model_path, count=32, seed=0, out_path=FIXTURES / "golden.bin")

    big_mfcc = MfccConfig(num_mel_filters=80)
    big_spec = nn.default_model_spec((31, 13))
    big_stats = FeatureStats(np.zeros(13), np.ones(13), big_mfcc.fingerprint(16000))
    export_model(big_spec, nn.init_model(big_spec, 1), big_mfcc, big_stats, 0.70,
                 FIXTURES / "model_80mel.lume")
    for f in sorted(FIXTURES.iterdir()):
        print(f"{f.name}: {f.stat().st_size} bytes")


if __name__ == "__main__":
    main()
