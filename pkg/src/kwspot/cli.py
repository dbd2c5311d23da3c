"""Command-line entry point for the full pipeline.

Subcommands: augment, dataset build, features, train, search, eval,
detect, export, golden. Every run that produces artifacts also writes a
run_manifest.json recording inputs, seeds, and output hashes, so any
result can be reproduced from its manifest. Exit codes: 0 success,
1 validation/input error, 2 internal failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import traceback
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import nn
from .audio import read_wav, resample, write_wav
from .augment import AugmentFamily, AugmentRanges, augment_clip, sample_augment_spec
from .dataset import BuildConfig, Manifest, SubClass, build_dataset, split_validation
from .export import emit_golden_vectors, export_model, load_exported
from .features import FeatureMatrix, MfccConfig, compute_mfcc, fit_feature_stats
from .selection import (
    SearchSpace,
    accuracy_parent,
    collapse_to_parent,
    confusion_from_predictions,
    f1_name,
    load_split_features,
    load_weights_npz,
    precision_name,
    recall_name,
    run_search,
)
from .stream import DetectorConfig, log_events, replay

DEFAULT_SPACE = Path(__file__).parent / "data" / "search_space.json"


@dataclass
class PipelineConfig:
    """One JSON file configuring the whole pipeline; unknown keys rejected."""

    sample_rate: int = 16_000
    window_s: float = 1.0
    ranges: AugmentRanges = field(default_factory=AugmentRanges)
    samples_per_subclass: int = 100
    words: tuple[str, ...] = ()
    static_amplitude: float = 0.01
    holdout_fraction: float = 0.2
    min_per_subclass: int = 2
    mfcc: MfccConfig = field(default_factory=MfccConfig)
    train: nn.TrainConfig = field(default_factory=nn.TrainConfig)
    threshold: float = 0.70
    refractory_ms: float = 1000.0
    search_space_path: str | None = None
    output_dir: str = "out"

    @classmethod
    def from_json(cls, path: str | Path) -> "PipelineConfig":
        d = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        for key in d:
            if key not in known:
                raise ValueError(f"unknown config key {key!r} in {path}")
        if "ranges" in d:
            d["ranges"] = AugmentRanges.from_dict(d["ranges"])
        if "mfcc" in d:
            d["mfcc"] = MfccConfig.from_dict(d["mfcc"])
        if "train" in d:
            d["train"] = nn.TrainConfig.from_dict(d["train"])
        if "words" in d:
            d["words"] = tuple(d["words"])
        return cls(**d)

    def build_config(self) -> BuildConfig:
        return BuildConfig(
            sample_rate=self.sample_rate,
            window_s=self.window_s,
            samples_per_subclass=self.samples_per_subclass,
            ranges=self.ranges,
            words=self.words,
            static_amplitude=self.static_amplitude,
            holdout_fraction=self.holdout_fraction,
            min_per_subclass=self.min_per_subclass,
        )


def _load_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        return PipelineConfig.from_json(args.config)
    return PipelineConfig()


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_run_manifest(out_dir: Path, command: str, params: dict, artifacts: list[Path]):
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "command": command,
        "params": {k: str(v) if isinstance(v, Path) else v for k, v in params.items()},
        "artifacts": {
            str(p.relative_to(out_dir) if p.is_relative_to(out_dir) else p): _sha256(p)
            for p in artifacts
            if p.is_file()
        },
    }
    (out_dir / "run_manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True))


def _wav_files(directory: str | Path) -> list[Path]:
    files = sorted(Path(directory).glob("*.wav"))
    if not files:
        raise ValueError(f"no WAV files in {directory}")
    return files


def render_confusion(counts: np.ndarray, labels: list[str]) -> str:
    """Aligned plain-text grid, rows true / columns predicted."""
    width = max(len(l) for l in labels + ["true\\pred"]) + 2
    cell = max(6, max(len(str(int(c))) for c in counts.reshape(-1)) + 2)
    lines = [
        "true\\pred".ljust(width) + "".join(l[: cell - 1].rjust(cell) for l in labels)
    ]
    for label, row in zip(labels, counts):
        lines.append(
            label.ljust(width) + "".join(str(int(c)).rjust(cell) for c in row)
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- subcommands


def cmd_augment(args) -> int:
    cfg = _load_config(args)
    family = AugmentFamily(args.family)
    clip = resample(read_wav(args.input), cfg.sample_rate)
    ambiances = {}
    if family.uses_ambiance:
        if not args.ambiance_dir:
            raise ValueError(f"family {family.value} requires --ambiance-dir")
        from .dataset import _load_ambiances

        ambiances = _load_ambiances(Path(args.ambiance_dir), cfg.sample_rate, cfg.window_s)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts = []
    specs = []
    for i in range(args.count):
        rng = np.random.default_rng(np.random.SeedSequence((args.seed, i)))
        spec = sample_augment_spec(rng, cfg.ranges, family, sorted(ambiances))
        out = augment_clip(clip, spec, cfg.window_s, ambiances)
        path = out_dir / f"aug_{family.value}_{i:04d}.wav"
        write_wav(out, path)
        artifacts.append(path)
        specs.append(spec.to_dict())
    spec_path = out_dir / "augment_specs.json"
    spec_path.write_text(json.dumps(specs, indent=2))
    artifacts.append(spec_path)
    _write_run_manifest(
        out_dir, "augment",
        {"input": args.input, "family": args.family, "count": args.count,
         "seed": args.seed}, artifacts,
    )
    print(f"wrote {args.count} augmented clips to {out_dir}")
    return 0


def cmd_dataset_build(args) -> int:
    cfg = _load_config(args)
    if args.words:
        cfg = replace(cfg, words=tuple(args.words.split(",")))
    if not cfg.words:
        raise ValueError("no negative words configured (config.words or --words)")
    build = cfg.build_config()
    name_clips = _wav_files(args.name_clips)
    out_dir = Path(args.out_dir)
    manifest = build_dataset(
        name_clips, args.ambiance_dir, args.words_root, build, args.seed, out_dir
    )
    non_user = _wav_files(args.validation_clips) if args.validation_clips else None
    manifest = split_validation(manifest, build.holdout_fraction, non_user)
    counts = manifest.counts()
    artifacts = [out_dir / "manifest.json"]
    _write_run_manifest(
        out_dir, "dataset build",
        {"name_clips": args.name_clips, "ambiance_dir": args.ambiance_dir,
         "words_root": args.words_root, "seed": args.seed,
         "validation_clips": args.validation_clips}, artifacts,
    )
    total = sum(sum(v.values()) for v in counts.values())
    print(f"built {total} samples across {len(counts)} subclasses into {out_dir}")
    return 0


def cmd_features(args) -> int:
    cfg = _load_config(args)
    clip = resample(read_wav(args.input), cfg.sample_rate)
    feats = compute_mfcc(clip, cfg.mfcc)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    np.save(out, feats.values)
    _write_run_manifest(
        out.parent, "features", {"input": args.input, "out": str(out)}, [out]
    )
    print(f"{feats.num_frames} frames x {feats.num_coeffs} coefficients -> {out}")
    return 0


def _train_on_manifest(manifest: Manifest, cfg: PipelineConfig, train_config):
    mfcc_cfg = cfg.mfcc
    x_tr, y_tr = load_split_features(manifest, manifest.base_dir, mfcc_cfg, "train")
    x_va, y_va = load_split_features(manifest, manifest.base_dir, mfcc_cfg, "validation")
    fp = mfcc_cfg.fingerprint(cfg.sample_rate)
    stats = fit_feature_stats([FeatureMatrix(m, fp) for m in x_tr])
    x_trn = (x_tr - stats.mean) / stats.std
    x_van = (x_va - stats.mean) / stats.std
    frames = mfcc_cfg.num_frames(int(round(cfg.window_s * cfg.sample_rate)), cfg.sample_rate)
    spec = nn.default_model_spec((frames, mfcc_cfg.num_cepstral_coeffs))
    weights, history = nn.fit(spec, (x_trn, y_tr), (x_van, y_va), train_config)
    probs = nn.forward(spec, weights, x_van, mode="infer")
    cm8 = confusion_from_predictions(probs, y_va)
    cm2 = collapse_to_parent(cm8)
    return spec, weights, stats, history, cm8, cm2


def cmd_train(args) -> int:
    cfg = _load_config(args)
    train_config = cfg.train
    if args.epochs is not None:
        if args.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {args.epochs}")
        train_config = replace(train_config, epochs=args.epochs)
    if args.seed is not None:
        train_config = replace(train_config, seed=args.seed)
    manifest = Manifest.load(args.manifest)
    cfg = replace(cfg, sample_rate=manifest.sample_rate, window_s=manifest.window_s)
    spec, weights, stats, history, cm8, cm2 = _train_on_manifest(
        manifest, cfg, train_config
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model_path = out_dir / "model.lume"
    export_model(
        spec, weights, cfg.mfcc, stats, cfg.threshold, model_path,
        sample_rate=cfg.sample_rate, window_s=cfg.window_s,
    )
    (out_dir / "history.json").write_text(json.dumps(history, indent=2))
    metrics = {
        "val_f1": f1_name(cm2),
        "val_accuracy": accuracy_parent(cm2),
        "parameters": nn.parameter_count(spec),
        "macs_per_window": nn.mac_count(spec),
        "epochs_run": len(history),
    }
    (out_dir / "metrics.json").write_text(json.dumps(metrics, indent=2))
    _write_run_manifest(
        out_dir, "train",
        {"manifest": args.manifest, "seed": train_config.seed,
         "epochs": train_config.epochs},
        [model_path, out_dir / "history.json", out_dir / "metrics.json"],
    )
    print(f"val F1 {metrics['val_f1']:.4f}, accuracy {metrics['val_accuracy']:.4f} "
          f"-> {model_path}")
    return 0


def cmd_search(args) -> int:
    space_path = args.space or DEFAULT_SPACE
    space = SearchSpace.from_json(space_path)
    if args.seed is not None:
        space = dataclasses.replace(space, seed=args.seed)
    manifest = Manifest.load(args.manifest)
    out_dir = Path(args.out_dir)
    cfg = _load_config(args)
    ranked = run_search(
        space, manifest, manifest.base_dir, out_dir,
        budget=args.budget, train_config=cfg.train,
    )
    best = ranked[0]
    if best.status != "ok":
        raise RuntimeError(f"all {len(ranked)} trials failed; first error: {best.error}")
    print(f"best trial {best.trial_id}: F1 {best.val_f1:.4f}, "
          f"{best.parameters} parameters, {best.macs_per_window} MACs")
    artifacts = [out_dir / "ranking.csv"]
    if args.export_best:
        from .features import FeatureStats

        spec = nn.ModelSpec.from_dict(best.model_spec)
        weights = load_weights_npz(out_dir / best.weights_path, spec)
        stats = FeatureStats.from_dict(
            json.loads((out_dir / best.stats_path).read_text())
        )
        mfcc_cfg = MfccConfig.from_dict(best.mfcc_config)
        best_path = Path(args.export_best)
        export_model(
            spec, weights, mfcc_cfg, stats, cfg.threshold, best_path,
            sample_rate=space.sample_rate, window_s=space.window_s,
        )
        artifacts.append(best_path)
        print(f"exported best model to {best_path}")
    _write_run_manifest(
        out_dir, "search",
        {"manifest": args.manifest, "space": str(space_path),
         "budget": args.budget, "seed": space.seed}, artifacts,
    )
    return 0


def cmd_eval(args) -> int:
    model = load_exported(args.model)
    manifest = Manifest.load(args.manifest)
    records = manifest.records_for(args.split)
    if not records:
        raise ValueError(f"manifest has no {args.split!r} records")
    probs, labels = [], []
    for rec in records:
        clip = resample(read_wav(manifest.base_dir / rec.path), model.sample_rate)
        probs.append(model.classify_window(clip.samples))
        labels.append(int(rec.subclass))
    cm8 = confusion_from_predictions(np.stack(probs), labels)
    cm2 = collapse_to_parent(cm8)
    report = Path(args.report)
    report.mkdir(parents=True, exist_ok=True)
    sub_names = [s.json_name for s in SubClass]
    np.savetxt(report / "cm8.csv", cm8.counts, fmt="%d", delimiter=",",
               header=",".join(sub_names), comments="")
    np.savetxt(report / "cm2.csv", cm2.counts, fmt="%d", delimiter=",",
               header="name,not_name", comments="")
    metrics = {
        "split": args.split,
        "samples": cm8.total,
        "accuracy_parent": accuracy_parent(cm2),
        "precision_name": precision_name(cm2),
        "recall_name": recall_name(cm2),
        "f1_name": f1_name(cm2),
    }
    (report / "metrics.json").write_text(json.dumps(metrics, indent=2))
    text = (
        "subclass confusion (rows true, columns predicted)\n"
        + render_confusion(cm8.counts, sub_names)
        + "\nparent confusion\n"
        + render_confusion(cm2.counts, ["name", "not_name"])
    )
    (report / "confusion.txt").write_text(text)
    _write_run_manifest(
        report, "eval", {"model": args.model, "manifest": args.manifest,
                         "split": args.split},
        [report / n for n in ("cm8.csv", "cm2.csv", "metrics.json", "confusion.txt")],
    )
    print(f"parent accuracy {metrics['accuracy_parent']:.4f}, "
          f"NAME F1 {metrics['f1_name']:.4f} ({cm8.total} samples)")
    return 0


def _stdin_pcm_clip(rate: int):
    from .audio import AudioClip, PCM16_SCALE

    raw = sys.stdin.buffer.read()
    samples = np.frombuffer(raw[: len(raw) - len(raw) % 2], dtype="<i2")
    return AudioClip(samples.astype(np.float64) / PCM16_SCALE, rate)


def cmd_detect(args) -> int:
    model = load_exported(args.model)
    config = DetectorConfig(
        model=model,
        threshold=args.threshold if args.threshold is not None else model.threshold,
        refractory_ms=args.refractory_ms,
    )
    if args.input == "-":
        if args.raw_rate is None:
            raise ValueError("reading raw PCM from stdin requires --raw-rate")
        source = _stdin_pcm_clip(args.raw_rate)
    else:
        source = args.input
    events, report = replay(source, config, mode="realtime" if args.realtime else "fast")
    log_events(events, sys.stdout)
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "events.log", "w") as fh:
            log_events(events, fh)
        (out_dir / "replay_report.json").write_text(json.dumps(report, indent=2))
        _write_run_manifest(
            out_dir, "detect",
            {"input": args.input, "model": args.model,
             "threshold": config.threshold},
            [out_dir / "events.log", out_dir / "replay_report.json"],
        )
    return 0


def cmd_export(args) -> int:
    model = load_exported(args.model)
    threshold = args.threshold if args.threshold is not None else model.threshold
    export_model(
        model.spec, model.weights, model.mfcc_config, model.stats, threshold,
        args.out, sample_rate=model.sample_rate, window_s=model.window_s,
    )
    print(f"rewrote {args.model} -> {args.out} (threshold {threshold})")
    return 0


def cmd_golden(args) -> int:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    emit_golden_vectors(args.model, args.count, args.seed, out)
    _write_run_manifest(
        out.parent, "golden",
        {"model": args.model, "count": args.count, "seed": args.seed}, [out],
    )
    print(f"wrote {args.count} golden vectors to {out}")
    return 0


# ---------------------------------------------------------------- arg parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kwspot",
        description="Few-shot keyword spotting: augment, train, search, detect, export.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", help="pipeline config JSON")

    p = sub.add_parser("augment", help="expand one clip into augmented variants")
    p.add_argument("--input", required=True, help="source WAV")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--family", default="neither",
                   choices=[f.value for f in AugmentFamily])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ambiance-dir", help="WAV directory for ambiance families")
    add_config(p)
    p.set_defaults(func=cmd_augment)

    p_ds = sub.add_parser("dataset", help="dataset operations")
    ds_sub = p_ds.add_subparsers(dest="dataset_command", required=True)
    p = ds_sub.add_parser("build", help="build the eight-subclass corpus")
    p.add_argument("--name-clips", required=True, help="directory of user keyword WAVs")
    p.add_argument("--ambiance-dir", required=True)
    p.add_argument("--words-root", required=True,
                   help="Speech-Commands-style <root>/<word>/*.wav tree")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--words", help="comma-separated negative words (overrides config)")
    p.add_argument("--validation-clips",
                   help="directory of non-user keyword WAVs for validation")
    add_config(p)
    p.set_defaults(func=cmd_dataset_build)

    p = sub.add_parser("features", help="MFCC features for one WAV")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True, help="output .npy path")
    add_config(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train the default architecture on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    add_config(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("search", help="constrained random architecture search")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--space", help="search-space JSON (default: packaged space)")
    p.add_argument("--budget", type=int, help="trials to run (default: space budget)")
    p.add_argument("--seed", type=int)
    p.add_argument("--export-best", help="write the winning model blob here")
    add_config(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval", help="confusion matrices and metrics for a model")
    p.add_argument("--model", required=True, help=".lume blob")
    p.add_argument("--manifest", required=True)
    p.add_argument("--report", required=True, help="report output directory")
    p.add_argument("--split", default="validation",
                   choices=["train", "validation", "test"])
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("detect", help="run the streaming detector over a recording")
    p.add_argument("--input", required=True,
                   help="WAV to replay, or '-' for raw 16-bit LE PCM on stdin")
    p.add_argument("--model", required=True)
    p.add_argument("--raw-rate", type=int,
                   help="sample rate of raw stdin PCM (required with --input -)")
    p.add_argument("--threshold", type=float, help="override the blob threshold")
    p.add_argument("--refractory-ms", type=float, default=1000.0)
    p.add_argument("--realtime", action="store_true",
                   help="pace packets at 250 ms wall-clock intervals")
    p.add_argument("--out-dir", help="also write events.log and replay_report.json")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("export", help="re-export a blob (e.g. new threshold)")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("golden", help="emit golden vectors for runtime verification")
    p.add_argument("--model", required=True)
    p.add_argument("--count", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_golden)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, NotADirectoryError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
