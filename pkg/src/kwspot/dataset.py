"""Corpus construction: eight balanced subclasses plus a held-out validation set.

The keyword ("name") side is generated by augmenting user recordings under
four recipes (pitch, ambiance, both, neither); the negative side combines
synthetic microphone static, ambiance excerpts, and Speech-Commands-style
word recordings transformed like the keyword samples. A JSON manifest
catalogs every file with its subclass, split, origin, and the exact
augmentation spec that produced it, so a build is reproducible bit for bit
from its master seed.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .audio import AudioClip, read_wav, resample, write_wav
from .augment import (
    AugmentFamily,
    AugmentRanges,
    AugmentSpec,
    _fit_into_window,
    augment_clip,
    sample_augment_spec,
)

SCHEMA_VERSION = 1

# salts for deriving per-record generators from the master seed
_SALT_TRAIN = 0
_SALT_VAL = 1
_SALT_REFILL = 2
_SALT_CHOICES = 3


class ParentClass(enum.Enum):
    NAME = "name"
    NOT_NAME = "not_name"


class SubClass(enum.IntEnum):
    """The eight generation subclasses; indices double as label ids."""

    NAME_PITCH = 0
    NAME_AMBIANCE = 1
    NAME_BOTH = 2
    NAME_PLAIN = 3
    NEG_STATIC = 4
    NEG_AMBIANCE = 5
    NEG_WORDS = 6
    NEG_WORDS_AMBIANCE = 7

    @property
    def parent(self) -> ParentClass:
        return ParentClass.NAME if self < 4 else ParentClass.NOT_NAME

    @property
    def json_name(self) -> str:
        return self.name.lower()

    @classmethod
    def from_json_name(cls, name: str) -> "SubClass":
        return cls[name.upper()]

    @property
    def family(self) -> AugmentFamily | None:
        """Augmentation recipe for subclasses built from source clips."""
        return {
            SubClass.NAME_PITCH: AugmentFamily.PITCH,
            SubClass.NAME_AMBIANCE: AugmentFamily.AMBIANCE,
            SubClass.NAME_BOTH: AugmentFamily.BOTH,
            SubClass.NAME_PLAIN: AugmentFamily.NEITHER,
        }.get(self)


# word samples are "transformed similarly" to the keyword; the plain word
# subclass draws from the ambiance-free recipes, the mixed one adds ambiance
_WORD_FAMILIES = (AugmentFamily.NEITHER, AugmentFamily.PITCH)
_WORD_AMBIANCE_FAMILIES = (AugmentFamily.AMBIANCE, AugmentFamily.BOTH)


@dataclass
class SampleRecord:
    path: str  # relative to the manifest location
    subclass: SubClass
    split: str  # train | validation | test
    origin: str  # user | generated | external
    source: str | None = None  # clip this sample derives from
    spec: AugmentSpec | None = None

    def __post_init__(self):
        if self.split not in ("train", "validation", "test"):
            raise ValueError(f"bad split {self.split!r}")
        if self.origin not in ("user", "generated", "external"):
            raise ValueError(f"bad origin {self.origin!r}")

    def to_dict(self) -> dict:
        return {
            "path": self.path,
            "subclass": self.subclass.json_name,
            "split": self.split,
            "origin": self.origin,
            "source": self.source,
            "spec": self.spec.to_dict() if self.spec else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SampleRecord":
        return cls(
            path=d["path"],
            subclass=SubClass.from_json_name(d["subclass"]),
            split=d["split"],
            origin=d["origin"],
            source=d.get("source"),
            spec=AugmentSpec.from_dict(d["spec"]) if d.get("spec") else None,
        )


@dataclass
class BuildConfig:
    """Knobs for one corpus build."""

    sample_rate: int = 16_000
    window_s: float = 1.0
    samples_per_subclass: int = 100
    ranges: AugmentRanges = field(default_factory=AugmentRanges)
    words: tuple[str, ...] = ()
    static_amplitude: float = 0.01
    holdout_fraction: float = 0.2
    min_per_subclass: int = 2

    def __post_init__(self):
        if self.samples_per_subclass < 1:
            raise ValueError("samples_per_subclass must be >= 1")
        if not 0 < self.static_amplitude <= 0.05:
            raise ValueError("static_amplitude must be in (0, 0.05]")
        self.words = tuple(self.words)

    def to_dict(self) -> dict:
        return {
            "sample_rate": self.sample_rate,
            "window_s": self.window_s,
            "samples_per_subclass": self.samples_per_subclass,
            "ranges": self.ranges.to_dict(),
            "words": list(self.words),
            "static_amplitude": self.static_amplitude,
            "holdout_fraction": self.holdout_fraction,
            "min_per_subclass": self.min_per_subclass,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BuildConfig":
        kw = dict(d)
        if "ranges" in kw:
            kw["ranges"] = AugmentRanges.from_dict(kw["ranges"])
        if "words" in kw:
            kw["words"] = tuple(kw["words"])
        return cls(**kw)


@dataclass
class Manifest:
    records: list[SampleRecord]
    sample_rate: int
    window_s: float
    master_seed: int
    config: BuildConfig
    inputs: dict = field(default_factory=dict)
    validation_name_origin: str | None = None  # external | user_withheld
    base_dir: Path | None = None  # where the manifest sits; not serialized

    def counts(self) -> dict[str, dict[str, int]]:
        out: dict[str, dict[str, int]] = {}
        for rec in self.records:
            sub = out.setdefault(rec.subclass.json_name, {})
            sub[rec.split] = sub.get(rec.split, 0) + 1
        return out

    def records_for(self, split: str) -> list[SampleRecord]:
        return [r for r in self.records if r.split == split]

    def validate(self, check_files: bool = True) -> None:
        paths = [r.path for r in self.records]
        if len(paths) != len(set(paths)):
            raise ValueError("duplicate paths in manifest")
        by_split: dict[str, set] = {}
        for r in self.records:
            by_split.setdefault(r.split, set()).add(r.path)
        overlap = by_split.get("train", set()) & by_split.get("validation", set())
        if overlap:
            raise ValueError(f"paths in both splits: {sorted(overlap)[:3]}")
        counts = self.counts()
        for sub in SubClass:
            if counts.get(sub.json_name, {}).get("train", 0) < self.config.min_per_subclass:
                raise ValueError(
                    f"subclass {sub.json_name} below minimum "
                    f"{self.config.min_per_subclass} in train split"
                )
        for r in self.records:
            if r.split == "validation" and r.subclass.parent is ParentClass.NAME:
                if r.origin == "user":
                    raise ValueError(f"raw user clip in NAME validation: {r.path}")
        if check_files:
            if self.base_dir is None:
                raise ValueError("manifest has no base_dir; cannot check files")
            for r in self.records:
                if not (self.base_dir / r.path).is_file():
                    raise ValueError(f"missing audio file: {r.path}")

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "sample_rate": self.sample_rate,
            "window_s": self.window_s,
            "master_seed": self.master_seed,
            "config": self.config.to_dict(),
            "inputs": self.inputs,
            "validation_name_origin": self.validation_name_origin,
            "counts": self.counts(),
            "records": [r.to_dict() for r in self.records],
        }

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        self.base_dir = path.parent

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        path = Path(path)
        d = json.loads(path.read_text())
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported manifest schema {d.get('schema_version')}")
        m = cls(
            records=[SampleRecord.from_dict(r) for r in d["records"]],
            sample_rate=d["sample_rate"],
            window_s=d["window_s"],
            master_seed=d["master_seed"],
            config=BuildConfig.from_dict(d["config"]),
            inputs=d.get("inputs", {}),
            validation_name_origin=d.get("validation_name_origin"),
            base_dir=path.parent,
        )
        stored = d.get("counts", {})
        if stored and stored != m.counts():
            raise ValueError("stored counts do not match records")
        return m


def _rng(master_seed: int, *key: int) -> np.random.Generator:
    # stable derivation: parallel and serial generation agree
    return np.random.default_rng(np.random.SeedSequence((master_seed, *key)))


def synth_static(
    duration_s: float,
    amplitude: float,
    rng: np.random.Generator,
    sample_rate: int = 16_000,
) -> AudioClip:
    """Uniform white noise in [-amplitude, +amplitude].

    Stands in for the deployment microphone's silence floor; substitute
    real recordings by pointing the build at a static directory instead.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be > 0")
    if not 0 < amplitude <= 0.05:
        raise ValueError(f"amplitude must be in (0, 0.05], got {amplitude}")
    n = int(round(duration_s * sample_rate))
    return AudioClip(rng.uniform(-amplitude, amplitude, n), sample_rate)


def _load_window(path: Path, sample_rate: int, window_s: float) -> AudioClip:
    """Read, resample to the canonical rate, and pad/crop to the window."""
    clip = resample(read_wav(path), sample_rate)
    n_win = int(round(window_s * sample_rate))
    return AudioClip(_fit_into_window(clip.samples, n_win), sample_rate, str(path))


def ingest_speech_commands(
    root: str | Path,
    words: Sequence[str],
    per_word: int,
    rng: np.random.Generator,
    sample_rate: int = 16_000,
    window_s: float = 1.0,
    out_dir: str | Path | None = None,
    exclude: Iterable[str] = (),
) -> list[SampleRecord]:
    """Sample per_word files for each word from a <root>/<word>/*.wav tree.

    Sampling is without replacement over the sorted listing, minus any
    excluded paths. With out_dir set, normalized (resampled, window-length)
    copies are written and records point at the copies; otherwise records
    point at the originals and normalization is the caller's job.
    """
    root = Path(root)
    excluded = {str(p) for p in exclude}
    records: list[SampleRecord] = []
    for word in words:
        word_dir = root / word
        if not word_dir.is_dir():
            raise FileNotFoundError(f"no directory for word {word!r}: {word_dir}")
        files = [f for f in sorted(word_dir.glob("*.wav")) if str(f) not in excluded]
        if len(files) < per_word:
            raise ValueError(
                f"word {word!r}: need {per_word} files, only {len(files)} available"
            )
        picked = rng.choice(len(files), size=per_word, replace=False)
        for i in picked:
            src = files[int(i)]
            if out_dir is not None:
                out_dir = Path(out_dir)
                out_dir.mkdir(parents=True, exist_ok=True)
                dest = out_dir / f"{word}_{src.stem}.wav"
                write_wav(_load_window(src, sample_rate, window_s), dest)
                path = str(dest)
            else:
                path = str(src)
            records.append(
                SampleRecord(
                    path=path,
                    subclass=SubClass.NEG_WORDS,
                    split="train",
                    origin="external",
                    source=str(src),
                )
            )
    return records


def _load_ambiances(
    ambiance_dir: Path, sample_rate: int, window_s: float
) -> dict[str, AudioClip]:
    files = sorted(Path(ambiance_dir).glob("*.wav"))
    if not files:
        raise ValueError(f"ambiance directory {ambiance_dir} has no WAV files")
    n_win = int(round(window_s * sample_rate))
    out = {}
    for f in files:
        clip = resample(read_wav(f), sample_rate)
        if len(clip) < 2 * n_win:
            raise ValueError(
                f"ambiance file {f.name} shorter than two windows "
                f"({len(clip)} < {2 * n_win} samples)"
            )
        out[f.name] = clip
    return out


def _ambiance_excerpt(
    amb: AudioClip, n_win: int, rng: np.random.Generator, split: str
) -> np.ndarray:
    """Window-length excerpt; train draws from the first half of each file,
    validation from the second, so validation material is genuinely unseen."""
    half = len(amb) // 2
    if split == "train":
        start = int(rng.integers(0, half - n_win + 1))
    else:
        start = int(rng.integers(half, len(amb) - n_win + 1))
    return amb.samples[start : start + n_win]


def _word_pool(
    words_root: Path,
    config: BuildConfig,
    master_seed: int,
    needed: int,
    exclude: Iterable[str] = (),
    salt: int = _SALT_TRAIN,
) -> list[Path]:
    if not config.words:
        raise ValueError("config.words is empty; need negative words to build")
    per_word = math.ceil(needed / len(config.words))
    rng = _rng(master_seed, salt, _SALT_CHOICES)
    recs = ingest_speech_commands(
        words_root, config.words, per_word, rng,
        sample_rate=config.sample_rate, window_s=config.window_s, exclude=exclude,
    )
    return [Path(r.path) for r in recs]


def _generate_from_source(
    source: AudioClip,
    subclass: SubClass,
    family: AugmentFamily,
    rng: np.random.Generator,
    config: BuildConfig,
    ambiances: dict[str, AudioClip],
) -> tuple[AudioClip, AugmentSpec]:
    spec = sample_augment_spec(rng, config.ranges, family, sorted(ambiances))
    clip = augment_clip(source, spec, config.window_s, ambiances)
    return clip, spec


def build_dataset(
    name_clips: Sequence[str | Path],
    ambiance_dir: str | Path,
    words_root: str | Path,
    config: BuildConfig,
    master_seed: int,
    out_dir: str | Path,
) -> Manifest:
    """Generate the balanced eight-subclass training corpus under out_dir.

    Every record's generator is derived from (master_seed, salt, subclass,
    index), so records are independent of generation order and the whole
    build is byte-reproducible.
    """
    if not name_clips:
        raise ValueError("need at least one user keyword clip")
    out_dir = Path(out_dir)
    (out_dir / "train").mkdir(parents=True, exist_ok=True)

    sources = [
        _load_window(Path(p), config.sample_rate, config.window_s) for p in name_clips
    ]
    ambiances = _load_ambiances(Path(ambiance_dir), config.sample_rate, config.window_s)
    count = config.samples_per_subclass
    word_files = _word_pool(Path(words_root), config, master_seed, needed=2 * count)
    word_clips = [
        _load_window(f, config.sample_rate, config.window_s) for f in word_files
    ]
    n_win = int(round(config.window_s * config.sample_rate))
    amb_names = sorted(ambiances)

    records: list[SampleRecord] = []
    for subclass in SubClass:
        for i in range(count):
            rng = _rng(master_seed, _SALT_TRAIN, int(subclass), i)
            rel = f"train/{subclass.json_name}_{i:04d}.wav"
            spec = None
            origin = "generated"
            source_id: str | None = None

            if subclass.parent is ParentClass.NAME:
                src_idx = i % len(sources)
                clip, spec = _generate_from_source(
                    sources[src_idx], subclass, subclass.family, rng, config, ambiances
                )
                source_id = str(name_clips[src_idx])
            elif subclass is SubClass.NEG_STATIC:
                clip = synth_static(
                    config.window_s, config.static_amplitude, rng, config.sample_rate
                )
            elif subclass is SubClass.NEG_AMBIANCE:
                name = amb_names[int(rng.integers(0, len(amb_names)))]
                clip = AudioClip(
                    _ambiance_excerpt(ambiances[name], n_win, rng, "train"),
                    config.sample_rate,
                )
                source_id = name
            else:  # NEG_WORDS / NEG_WORDS_AMBIANCE
                offset = 0 if subclass is SubClass.NEG_WORDS else count
                src = word_clips[(offset + i) % len(word_clips)]
                families = (
                    _WORD_FAMILIES
                    if subclass is SubClass.NEG_WORDS
                    else _WORD_AMBIANCE_FAMILIES
                )
                family = families[int(rng.integers(0, len(families)))]
                clip, spec = _generate_from_source(
                    src, subclass, family, rng, config, ambiances
                )
                origin = "external"
                source_id = str(word_files[(offset + i) % len(word_files)])

            write_wav(clip, out_dir / rel)
            records.append(
                SampleRecord(
                    path=rel,
                    subclass=subclass,
                    split="train",
                    origin=origin,
                    source=source_id,
                    spec=spec,
                )
            )

    manifest = Manifest(
        records=records,
        sample_rate=config.sample_rate,
        window_s=config.window_s,
        master_seed=master_seed,
        config=config,
        inputs={
            "name_clips": [str(p) for p in name_clips],
            "ambiance_dir": str(ambiance_dir),
            "words_root": str(words_root),
        },
        base_dir=out_dir,
    )
    manifest.save(out_dir / "manifest.json")
    return manifest


def split_validation(
    manifest: Manifest,
    holdout_fraction: float,
    non_user_name_clips: Sequence[str | Path] | None = None,
) -> Manifest:
    """Add a validation split of unseen material to a built manifest.

    NOT_NAME validation comes from fresh static, unseen ambiance halves,
    and word files absent from training. NAME validation is generated from
    non-user keyword recordings when given; otherwise user source clips
    are withheld (their training samples regenerated from the remaining
    sources) and the manifest flags the deviation. Train and validation
    stay disjoint by path and by source clip.
    """
    if not 0 < holdout_fraction < 0.5:
        raise ValueError(f"holdout_fraction must be in (0, 0.5), got {holdout_fraction}")
    if manifest.base_dir is None:
        raise ValueError("manifest must be saved/loaded so base_dir is known")
    config = manifest.config
    out_dir = manifest.base_dir
    (out_dir / "validation").mkdir(parents=True, exist_ok=True)

    train_counts = {
        sub: sum(1 for r in manifest.records if r.split == "train" and r.subclass == sub)
        for sub in SubClass
    }
    holdout = {sub: math.ceil(holdout_fraction * n) for sub, n in train_counts.items()}
    for sub, n in train_counts.items():
        if n - holdout[sub] < config.min_per_subclass:
            raise ValueError(
                f"holdout of {holdout[sub]} would drop {sub.json_name} below "
                f"the minimum of {config.min_per_subclass} train records"
            )

    seed = manifest.master_seed
    ambiances = _load_ambiances(
        Path(manifest.inputs["ambiance_dir"]), config.sample_rate, config.window_s
    )
    amb_names = sorted(ambiances)
    n_win = int(round(config.window_s * config.sample_rate))
    records = list(manifest.records)

    # NAME validation sources
    if non_user_name_clips:
        val_sources = [
            _load_window(Path(p), config.sample_rate, config.window_s)
            for p in non_user_name_clips
        ]
        val_source_ids = [str(p) for p in non_user_name_clips]
        name_origin = "external"
        manifest_flag = "external"
    else:
        user_paths = list(manifest.inputs["name_clips"])
        k = max(1, math.ceil(holdout_fraction * len(user_paths)))
        if len(user_paths) - k < 1:
            raise ValueError(
                f"cannot withhold {k} of {len(user_paths)} user clips for validation"
            )
        pick_rng = _rng(seed, _SALT_VAL, 99)
        withheld_idx = sorted(
            int(i) for i in pick_rng.choice(len(user_paths), size=k, replace=False)
        )
        withheld = {user_paths[i] for i in withheld_idx}
        remaining = [p for p in user_paths if p not in withheld]
        remaining_clips = [
            _load_window(Path(p), config.sample_rate, config.window_s) for p in remaining
        ]
        # regenerate the training samples that derived from withheld clips
        for idx, rec in enumerate(records):
            if (
                rec.split == "train"
                and rec.subclass.parent is ParentClass.NAME
                and rec.source in withheld
            ):
                i = int(Path(rec.path).stem.rsplit("_", 1)[1])
                rng = _rng(seed, _SALT_REFILL, int(rec.subclass), i)
                src_idx = i % len(remaining_clips)
                clip, spec = _generate_from_source(
                    remaining_clips[src_idx], rec.subclass, rec.subclass.family,
                    rng, config, ambiances,
                )
                write_wav(clip, out_dir / rec.path)
                records[idx] = SampleRecord(
                    path=rec.path, subclass=rec.subclass, split="train",
                    origin="generated", source=remaining[src_idx], spec=spec,
                )
        val_sources = [
            _load_window(Path(p), config.sample_rate, config.window_s)
            for p in sorted(withheld)
        ]
        val_source_ids = sorted(withheld)
        name_origin = "generated"
        manifest_flag = "user_withheld"

    used_words = {
        r.source for r in manifest.records if r.subclass in
        (SubClass.NEG_WORDS, SubClass.NEG_WORDS_AMBIANCE) and r.source
    }
    needed_words = holdout[SubClass.NEG_WORDS] + holdout[SubClass.NEG_WORDS_AMBIANCE]
    val_word_files = _word_pool(
        Path(manifest.inputs["words_root"]), config, seed,
        needed=needed_words, exclude=used_words, salt=_SALT_VAL,
    )
    val_word_clips = [
        _load_window(f, config.sample_rate, config.window_s) for f in val_word_files
    ]

    for subclass in SubClass:
        for i in range(holdout[subclass]):
            rng = _rng(seed, _SALT_VAL, int(subclass), i)
            rel = f"validation/{subclass.json_name}_{i:04d}.wav"
            spec = None
            origin = "generated"
            source_id: str | None = None

            if subclass.parent is ParentClass.NAME:
                src_idx = i % len(val_sources)
                clip, spec = _generate_from_source(
                    val_sources[src_idx], subclass, subclass.family, rng, config, ambiances
                )
                origin = name_origin
                source_id = val_source_ids[src_idx]
            elif subclass is SubClass.NEG_STATIC:
                clip = synth_static(
                    config.window_s, config.static_amplitude, rng, config.sample_rate
                )
            elif subclass is SubClass.NEG_AMBIANCE:
                name = amb_names[int(rng.integers(0, len(amb_names)))]
                clip = AudioClip(
                    _ambiance_excerpt(ambiances[name], n_win, rng, "validation"),
                    config.sample_rate,
                )
                source_id = name
            else:
                offset = 0 if subclass is SubClass.NEG_WORDS else holdout[SubClass.NEG_WORDS]
                pos = (offset + i) % len(val_word_clips)
                families = (
                    _WORD_FAMILIES
                    if subclass is SubClass.NEG_WORDS
                    else _WORD_AMBIANCE_FAMILIES
                )
                family = families[int(rng.integers(0, len(families)))]
                clip, spec = _generate_from_source(
                    val_word_clips[pos], subclass, family, rng, config, ambiances
                )
                origin = "external"
                source_id = str(val_word_files[pos])

            write_wav(clip, out_dir / rel)
            records.append(
                SampleRecord(
                    path=rel, subclass=subclass, split="validation",
                    origin=origin, source=source_id, spec=spec,
                )
            )

    updated = Manifest(
        records=records,
        sample_rate=manifest.sample_rate,
        window_s=manifest.window_s,
        master_seed=seed,
        config=config,
        inputs=manifest.inputs,
        validation_name_origin=manifest_flag,
        base_dir=out_dir,
    )
    updated.validate(check_files=True)
    updated.save(out_dir / "manifest.json")
    return updated
