"""Model evaluation and constrained random architecture search.

Predictions over the eight subclasses collapse into a NAME / NOT_NAME
confusion matrix: intra-parent confusions (static classified as ambiance,
say) still count as correct. Candidate models are drawn uniformly from a
JSON-declared space, rejected while they violate resource constraints,
trained, and ranked by parent-class F1.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

NUM_SUBCLASSES = 8
NUM_NAME_SUBCLASSES = 4  # subclass indices 0..3 collapse to the NAME parent


@dataclass(frozen=True)
class ConfusionMatrix8:
    """8x8 counts; rows = true subclass, columns = predicted subclass."""

    counts: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=np.int64)
        if arr.shape != (NUM_SUBCLASSES, NUM_SUBCLASSES):
            raise ValueError(f"expected 8x8 counts, got {arr.shape}")
        if (arr < 0).any():
            raise ValueError("counts must be non-negative")
        arr.flags.writeable = False
        object.__setattr__(self, "counts", arr)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ConfusionMatrix2:
    """2x2 parent-class counts with NAME as the positive class.

    Layout: rows = true parent (NAME, NOT_NAME), columns = predicted.
    """

    counts: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=np.int64)
        if arr.shape != (2, 2):
            raise ValueError(f"expected 2x2 counts, got {arr.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "counts", arr)

    @property
    def tp(self) -> int:
        return int(self.counts[0, 0])

    @property
    def fn(self) -> int:
        return int(self.counts[0, 1])

    @property
    def fp(self) -> int:
        return int(self.counts[1, 0])

    @property
    def tn(self) -> int:
        return int(self.counts[1, 1])

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion_from_predictions(
    predictions: np.ndarray, labels: Sequence[int]
) -> ConfusionMatrix8:
    """Count argmax decisions; ties resolve to the lowest subclass index."""
    preds = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if preds.ndim != 2 or preds.shape[1] != NUM_SUBCLASSES:
        raise ValueError(f"predictions must be (n, 8), got {preds.shape}")
    if len(preds) == 0:
        raise ValueError("no predictions to score")
    if len(preds) != len(y):
        raise ValueError(f"{len(preds)} predictions vs {len(y)} labels")
    decided = preds.argmax(axis=1)  # np.argmax takes the first maximum
    counts = np.zeros((NUM_SUBCLASSES, NUM_SUBCLASSES), dtype=np.int64)
    np.add.at(counts, (y, decided), 1)
    return ConfusionMatrix8(counts)


def collapse_to_parent(cm8: ConfusionMatrix8) -> ConfusionMatrix2:
    """Sum subclass cells into their NAME / NOT_NAME parents."""
    n = NUM_NAME_SUBCLASSES
    c = cm8.counts
    counts = np.array(
        [
            [c[:n, :n].sum(), c[:n, n:].sum()],
            [c[n:, :n].sum(), c[n:, n:].sum()],
        ],
        dtype=np.int64,
    )
    return ConfusionMatrix2(counts)


def precision_name(cm2: ConfusionMatrix2) -> float:
    denom = cm2.tp + cm2.fp
    return cm2.tp / denom if denom else 0.0


def recall_name(cm2: ConfusionMatrix2) -> float:
    denom = cm2.tp + cm2.fn
    return cm2.tp / denom if denom else 0.0


def f1_name(cm2: ConfusionMatrix2) -> float:
    """F1 with NAME positive; undefined ratios count as 0."""
    p, r = precision_name(cm2), recall_name(cm2)
    return 2 * p * r / (p + r) if p + r else 0.0


def accuracy_parent(cm2: ConfusionMatrix2) -> float:
    return (cm2.tp + cm2.tn) / cm2.total if cm2.total else 0.0


@dataclass(frozen=True)
class SearchSpace:
    """Axes and resource constraints for the constrained random search."""

    frame_length_s: tuple[float, ...] = (0.02, 0.032, 0.05)
    frame_stride_s: tuple[float, ...] = (0.016, 0.032)
    num_mel_filters: tuple[int, ...] = (20, 32, 40)
    num_cepstral_coeffs: int = 13
    conv_dim: tuple[int, ...] = (1, 2)
    conv_filters: tuple[int, ...] = (8, 16, 32)
    num_conv_layers: tuple[int, ...] = (2,)
    kernel: tuple[int, ...] = (3,)
    dropout_rate: tuple[float, float] = (0.1, 0.5)
    dense_width: tuple[int, ...] = (0, 16)
    max_parameters: int = 32_000
    max_macs_per_window: int = 2_000_000
    trial_budget: int = 72
    seed: int = 0
    sample_rate: int = 16_000
    window_s: float = 1.0

    def __post_init__(self):
        for name in ("frame_length_s", "frame_stride_s", "num_mel_filters",
                     "conv_dim", "conv_filters", "num_conv_layers", "kernel",
                     "dense_width"):
            if not getattr(self, name):
                raise ValueError(f"search axis {name} is empty")
        if self.max_parameters <= 0 or self.max_macs_per_window <= 0:
            raise ValueError("resource constraints must be positive")
        if self.trial_budget < 1:
            raise ValueError("trial_budget must be >= 1")
        lo, hi = self.dropout_rate
        if not 0 <= lo <= hi < 1:
            raise ValueError(f"bad dropout range {self.dropout_rate}")

    @classmethod
    def from_json(cls, path: str | Path) -> "SearchSpace":
        d = json.loads(Path(path).read_text())
        kw = {}
        for name in ("frame_length_s", "frame_stride_s", "num_mel_filters",
                     "conv_dim", "conv_filters", "num_conv_layers", "kernel",
                     "dense_width", "dropout_rate"):
            if name in d:
                kw[name] = tuple(d.pop(name))
        kw.update(d)
        return cls(**kw)

    def to_dict(self) -> dict:
        return {
            "frame_length_s": list(self.frame_length_s),
            "frame_stride_s": list(self.frame_stride_s),
            "num_mel_filters": list(self.num_mel_filters),
            "num_cepstral_coeffs": self.num_cepstral_coeffs,
            "conv_dim": list(self.conv_dim),
            "conv_filters": list(self.conv_filters),
            "num_conv_layers": list(self.num_conv_layers),
            "kernel": list(self.kernel),
            "dropout_rate": list(self.dropout_rate),
            "dense_width": list(self.dense_width),
            "max_parameters": self.max_parameters,
            "max_macs_per_window": self.max_macs_per_window,
            "trial_budget": self.trial_budget,
            "seed": self.seed,
            "sample_rate": self.sample_rate,
            "window_s": self.window_s,
        }


def sample_trial(space: SearchSpace, rng: np.random.Generator):
    """Uniform draw per axis, rejection-resampled until constraints hold.

    Returns (MfccConfig, ModelSpec, dropout_rate). Gives up with a
    diagnostic after 1000 consecutive rejections.
    """
    from . import nn
    from .features import MfccConfig

    window_samples = int(round(space.window_s * space.sample_rate))
    rejections = 0
    while rejections < 1000:
        try:
            cfg = MfccConfig(
                frame_length_s=float(rng.choice(space.frame_length_s)),
                frame_stride_s=float(rng.choice(space.frame_stride_s)),
                num_mel_filters=int(rng.choice(space.num_mel_filters)),
                num_cepstral_coeffs=space.num_cepstral_coeffs,
            )
            conv_dim = int(rng.choice(space.conv_dim))
            n_layers = int(rng.choice(space.num_conv_layers))
            filters = [int(rng.choice(space.conv_filters)) for _ in range(n_layers)]
            kernel = int(rng.choice(space.kernel))
            rate = float(rng.uniform(*space.dropout_rate))
            width = int(rng.choice(space.dense_width))
            cfg.validate_for_rate(space.sample_rate)
            frames = cfg.num_frames(window_samples, space.sample_rate)
            spec = nn.default_model_spec(
                (frames, cfg.num_cepstral_coeffs),
                filters=filters,
                kernel=kernel,
                dropout_rate=rate,
                dense_width=width,
                conv_dim=conv_dim,
            )
        except ValueError:
            rejections += 1
            continue
        if (nn.parameter_count(spec) > space.max_parameters
                or nn.mac_count(spec) > space.max_macs_per_window):
            rejections += 1
            continue
        return cfg, spec, rate
    raise ValueError(
        f"no feasible trial after {rejections} rejections; constraints "
        f"(max_parameters={space.max_parameters}, "
        f"max_macs_per_window={space.max_macs_per_window}) look unsatisfiable"
    )


@dataclass
class TrialResult:
    trial_id: int
    mfcc_config: dict
    model_spec: dict
    dropout_rate: float
    val_f1: float
    val_accuracy: float
    parameters: int
    macs_per_window: int
    status: str = "ok"  # ok | failed
    error: str = ""
    weights_path: str = ""
    history_path: str = ""
    stats_path: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def rank_trials(results: list[TrialResult]) -> list[TrialResult]:
    """F1 descending; ties broken by fewer parameters, then lower trial id.
    Failed trials sink to the bottom."""
    return sorted(
        results,
        key=lambda r: (r.status != "ok", -r.val_f1, r.parameters, r.trial_id),
    )


def load_split_features(manifest, manifest_dir, mfcc_config, split: str):
    """MFCC features + subclass labels for one manifest split.

    Returns (features (n, frames, coeffs), labels (n,)), record order.
    """
    from .audio import read_wav
    from .features import compute_mfcc

    records = [r for r in manifest.records if r.split == split]
    if not records:
        raise ValueError(f"manifest has no {split!r} records")
    mats, labels = [], []
    for rec in records:
        clip = read_wav(Path(manifest_dir) / rec.path)
        mats.append(compute_mfcc(clip, mfcc_config).values)
        labels.append(int(rec.subclass))
    return np.stack(mats), np.asarray(labels, dtype=np.int64)


def _save_weights_npz(path: Path, weights) -> None:
    arrays = {}
    for i, lw in enumerate(weights):
        for key, tensor in lw.items():
            arrays[f"L{i}_{key}"] = tensor
    np.savez(path, **arrays)


def load_weights_npz(path: str | Path, spec) -> list:
    data = np.load(path)
    weights = []
    for i in range(len(spec.layers)):
        lw = {}
        for key in ("W", "b"):
            name = f"L{i}_{key}"
            if name in data:
                lw[key] = data[name]
        weights.append(lw)
    return weights


def run_search(
    space: SearchSpace,
    manifest,
    manifest_dir: str | Path,
    out_dir: str | Path,
    budget: int | None = None,
    train_config=None,
) -> list[TrialResult]:
    """Train `budget` sampled trials and rank them.

    Ranking: validation parent-F1 descending, ties broken by fewer
    parameters, then lower trial id. A failed trial is recorded and
    skipped, never fatal. All artifacts (per-trial JSON, weights, history,
    ranked CSV) land in out_dir.
    """
    from . import nn
    from .features import fit_feature_stats, FeatureMatrix

    budget = space.trial_budget if budget is None else budget
    if budget < 1:
        raise ValueError("budget must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if train_config is None:
        train_config = nn.TrainConfig()

    results: list[TrialResult] = []
    for trial_id in range(budget):
        rng = np.random.default_rng(np.random.SeedSequence((space.seed, trial_id)))
        mfcc_cfg, spec, rate = sample_trial(space, rng)
        result = TrialResult(
            trial_id=trial_id,
            mfcc_config=mfcc_cfg.to_dict(),
            model_spec=spec.to_dict(),
            dropout_rate=rate,
            val_f1=0.0,
            val_accuracy=0.0,
            parameters=nn.parameter_count(spec),
            macs_per_window=nn.mac_count(spec),
        )
        try:
            x_tr, y_tr = load_split_features(manifest, manifest_dir, mfcc_cfg, "train")
            x_va, y_va = load_split_features(manifest, manifest_dir, mfcc_cfg, "validation")
            fp = mfcc_cfg.fingerprint(space.sample_rate)
            stats = fit_feature_stats([FeatureMatrix(m, fp) for m in x_tr])
            x_trn = (x_tr - stats.mean) / stats.std
            x_van = (x_va - stats.mean) / stats.std
            tc = replace(train_config, seed=int(np.random.SeedSequence(
                (space.seed, trial_id, 1)).generate_state(1)[0]))
            weights, history = nn.fit(spec, (x_trn, y_tr), (x_van, y_va), tc)
            probs = nn.forward(spec, weights, x_van, mode="infer")
            cm2 = collapse_to_parent(confusion_from_predictions(probs, y_va))
            result.val_f1 = f1_name(cm2)
            result.val_accuracy = accuracy_parent(cm2)
            wpath = out_dir / f"trial_{trial_id:03d}_weights.npz"
            hpath = out_dir / f"trial_{trial_id:03d}_history.json"
            spath = out_dir / f"trial_{trial_id:03d}_stats.json"
            _save_weights_npz(wpath, weights)
            hpath.write_text(json.dumps(history, indent=2))
            spath.write_text(json.dumps(stats.to_dict(), indent=2))
            result.weights_path = wpath.name
            result.history_path = hpath.name
            result.stats_path = spath.name
        except Exception as exc:  # isolate per-trial failures
            result.status = "failed"
            result.error = f"{type(exc).__name__}: {exc}"
        (out_dir / f"trial_{trial_id:03d}.json").write_text(
            json.dumps(result.to_dict(), indent=2, default=str)
        )
        results.append(result)

    ranked = rank_trials(results)
    with open(out_dir / "ranking.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["rank", "trial_id", "status", "val_f1", "val_accuracy",
             "parameters", "macs_per_window"]
        )
        for rank, r in enumerate(ranked, start=1):
            writer.writerow(
                [rank, r.trial_id, r.status, f"{r.val_f1:.6f}",
                 f"{r.val_accuracy:.6f}", r.parameters, r.macs_per_window]
            )
    return ranked
