"""Session fixtures: a synthetic source tree, a small built corpus, and a
trained model blob that the export/stream/CLI tests share."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from toycorpus import build_toy_sources

from kwspot import nn, selection
from kwspot.dataset import BuildConfig, build_dataset, split_validation
from kwspot.export import RunnableModel, export_model
from kwspot.features import FeatureMatrix, MfccConfig, fit_feature_stats


@pytest.fixture(scope="session")
def toy_sources(tmp_path_factory):
    root = tmp_path_factory.mktemp("sources")
    return build_toy_sources(root, seed=12345, n_user=20, n_heldout=12, n_per_word=30)


@pytest.fixture(scope="session")
def tiny_manifest(toy_sources, tmp_path_factory):
    """6 samples per subclass, validation from held-out speakers."""
    out = tmp_path_factory.mktemp("tiny_corpus")
    config = BuildConfig(
        samples_per_subclass=6, words=toy_sources["words"], holdout_fraction=0.34
    )
    name_clips = sorted(toy_sources["user"].glob("*.wav"))
    manifest = build_dataset(
        name_clips, toy_sources["ambiance"], toy_sources["words_root"],
        config, master_seed=11, out_dir=out,
    )
    heldout = sorted(toy_sources["heldout"].glob("*.wav"))
    return split_validation(manifest, config.holdout_fraction, heldout)


@pytest.fixture(scope="session")
def trained(tiny_manifest):
    """(spec, weights, stats, mfcc_config, runnable) trained on the tiny corpus."""
    mfcc = MfccConfig()
    m = tiny_manifest
    x_tr, y_tr = selection.load_split_features(m, m.base_dir, mfcc, "train")
    x_va, y_va = selection.load_split_features(m, m.base_dir, mfcc, "validation")
    fp = mfcc.fingerprint(m.sample_rate)
    stats = fit_feature_stats([FeatureMatrix(v, fp) for v in x_tr])
    spec = nn.default_model_spec((31, 13), filters=(16, 16))
    weights, _ = nn.fit(
        spec,
        ((x_tr - stats.mean) / stats.std, y_tr),
        ((x_va - stats.mean) / stats.std, y_va),
        nn.TrainConfig(epochs=25, batch_size=16, seed=3),
    )
    runnable = RunnableModel(
        sample_rate=m.sample_rate, window_s=m.window_s, mfcc_config=mfcc,
        stats=stats, spec=spec, weights=weights, threshold=0.70,
    )
    return spec, weights, stats, mfcc, runnable


@pytest.fixture(scope="session")
def blob_path(trained, tmp_path_factory):
    spec, weights, stats, mfcc, runnable = trained
    path = tmp_path_factory.mktemp("blob") / "model.lume"
    export_model(spec, weights, mfcc, stats, 0.70, path,
                 sample_rate=runnable.sample_rate, window_s=runnable.window_s)
    return path
