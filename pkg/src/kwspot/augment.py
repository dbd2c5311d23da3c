"""Seeded audio transformations for dataset expansion.

A small set of keyword recordings becomes a diverse corpus by randomly
varying pitch, speed, volume, and timing, optionally mixing in background
ambiance at a controlled SNR. Every transform is a pure function of its
inputs, and a sampled AugmentSpec pins all randomness, so the same clip
plus the same spec is bit-identical on every run.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .audio import AudioClip, rms

STRETCH_WINDOW_S = 0.030  # overlap-add analysis window, 50% overlap
ACTIVE_THRESHOLD = 0.001  # amplitude above which a sample counts as content


class AugmentFamily(enum.Enum):
    """Which of the four generation recipes a sample follows."""

    PITCH = "pitch"
    AMBIANCE = "ambiance"
    BOTH = "both"
    NEITHER = "neither"

    @property
    def uses_pitch(self) -> bool:
        return self in (AugmentFamily.PITCH, AugmentFamily.BOTH)

    @property
    def uses_ambiance(self) -> bool:
        return self in (AugmentFamily.AMBIANCE, AugmentFamily.BOTH)


@dataclass(frozen=True)
class AugmentRanges:
    """Sampling ranges for augmentation parameters.

    Spans cover adult-to-child pitch variation and typical room noise
    while keeping speech intelligible. Speed, gain, and time shift apply
    to every generated sample; pitch and ambiance only to the families
    that ask for them.
    """

    pitch_semitones: tuple[float, float] = (-4.0, 4.0)
    speed_factor: tuple[float, float] = (0.85, 1.15)
    gain_db: tuple[float, float] = (-6.0, 6.0)
    window_s: float = 1.0
    snr_db: tuple[float, float] = (5.0, 20.0)
    enable_speed: bool = True
    enable_gain: bool = True
    enable_shift: bool = True

    def __post_init__(self):
        for name in ("pitch_semitones", "speed_factor", "gain_db", "snr_db"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range has low > high: ({lo}, {hi})")
        if self.speed_factor[0] <= 0:
            raise ValueError("speed_factor range must be strictly positive")
        if self.window_s <= 0:
            raise ValueError("window_s must be > 0")

    def to_dict(self) -> dict:
        return {
            "pitch_semitones": list(self.pitch_semitones),
            "speed_factor": list(self.speed_factor),
            "gain_db": list(self.gain_db),
            "window_s": self.window_s,
            "snr_db": list(self.snr_db),
            "enable_speed": self.enable_speed,
            "enable_gain": self.enable_gain,
            "enable_shift": self.enable_shift,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentRanges":
        kw = dict(d)
        for name in ("pitch_semitones", "speed_factor", "gain_db", "snr_db"):
            if name in kw:
                kw[name] = tuple(kw[name])
        return cls(**kw)


@dataclass(frozen=True)
class AugmentSpec:
    """Fully seeded description of one augmentation.

    Same clip + same spec must produce bit-identical output; the seed
    drives the only internal randomness (ambiance segment choice).
    """

    pitch_semitones: float = 0.0
    speed_factor: float = 1.0
    gain_db: float = 0.0
    time_shift_s: float = 0.0
    ambiance_id: str | None = None
    snr_db: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.speed_factor <= 0:
            raise ValueError(f"speed_factor must be > 0, got {self.speed_factor}")
        if (self.ambiance_id is None) != (self.snr_db is None):
            raise ValueError("snr_db must be present iff ambiance_id is present")

    def to_dict(self) -> dict:
        return {
            "pitch_semitones": self.pitch_semitones,
            "speed_factor": self.speed_factor,
            "gain_db": self.gain_db,
            "time_shift_s": self.time_shift_s,
            "ambiance_id": self.ambiance_id,
            "snr_db": self.snr_db,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentSpec":
        return cls(**d)


def _linear_time_scale(x: np.ndarray, n_out: int) -> np.ndarray:
    # duration-only rescale; used where clips are too short for overlap-add
    if n_out == len(x):
        return x.copy()
    if len(x) == 0:
        return np.zeros(n_out)
    if n_out <= 1:
        return x[:n_out].copy()
    pos = np.arange(n_out) * (len(x) - 1) / (n_out - 1)
    return np.interp(pos, np.arange(len(x)), x)


def _stretch_to_length(x: np.ndarray, sample_rate: int, n_out: int) -> np.ndarray:
    """Waveform-similarity overlap-add: change duration, preserve pitch.

    Output frames sit on a fixed half-window grid; each copies the input
    segment near the time-scaled position that best continues the previous
    copy (max cross-correlation in a quarter-window search radius). Clips
    shorter than two windows degrade to plain time-axis interpolation.
    """
    n_in = len(x)
    win_len = int(round(STRETCH_WINDOW_S * sample_rate))
    win_len -= win_len % 2
    if win_len < 4 or n_in < 2 * win_len or n_out < 2 * win_len:
        return _linear_time_scale(x, n_out)

    hop = win_len // 2
    radius = win_len // 4
    window = np.hanning(win_len)
    factor = n_in / n_out

    acc = np.zeros(n_out + win_len)
    norm = np.zeros(n_out + win_len)
    acc[:win_len] = x[:win_len] * window
    norm[:win_len] = window
    prev = 0
    pos = hop
    while pos < n_out:
        ideal = int(round(pos * factor))
        lo = max(0, min(ideal - radius, n_in - win_len))
        hi = max(lo, min(ideal + radius, n_in - win_len))
        natural = prev + hop
        if hi > lo and natural + hop <= n_in:
            ref = x[natural : natural + hop]
            segs = sliding_window_view(x[lo : hi + hop], hop)[: hi - lo + 1]
            best = lo + int(np.argmax(segs @ ref))
        else:
            best = min(max(ideal, 0), n_in - win_len)
        acc[pos : pos + win_len] += x[best : best + win_len] * window
        norm[pos : pos + win_len] += window
        prev = best
        pos += hop

    out = acc[:n_out] / np.maximum(norm[:n_out], 1e-3)
    return out


def time_stretch(clip: AudioClip, factor: float) -> AudioClip:
    """Change duration by 1/factor while preserving pitch.

    factor > 1 speeds the clip up (shorter), < 1 slows it down. Output
    length is round(len/factor), exact to the sample.
    """
    if not 0.5 <= factor <= 2.0:
        raise ValueError(f"stretch factor {factor} outside [0.5, 2.0]")
    if factor == 1.0:
        return clip
    n_out = int(round(len(clip) / factor))
    return clip.with_samples(_stretch_to_length(clip.samples, clip.sample_rate, n_out))


def pitch_shift(clip: AudioClip, semitones: float) -> AudioClip:
    """Scale perceived pitch by 2^(semitones/12) at unchanged duration.

    Implemented as resample-by-ratio (pitch and duration both scale)
    followed by an overlap-add stretch back to the original length.
    """
    if len(clip) == 0:
        raise ValueError("cannot pitch-shift an empty clip")
    if abs(semitones) > 24:
        raise ValueError(f"pitch shift {semitones} st outside plausible voice range (±24)")
    if semitones == 0:
        return clip
    ratio = 2.0 ** (semitones / 12.0)
    n = len(clip)
    n_fast = max(1, int(round(n / ratio)))
    pos = np.arange(n_fast) * ratio
    fast = np.interp(pos, np.arange(n), clip.samples)
    return clip.with_samples(_stretch_to_length(fast, clip.sample_rate, n))


def apply_gain(clip: AudioClip, gain_db: float) -> AudioClip:
    """Scale by 10^(gain_db/20), then hard-clamp to [-1, 1].

    The clamp mirrors the 16-bit deployment path.
    """
    scaled = clip.samples * 10.0 ** (gain_db / 20.0)
    return clip.with_samples(np.clip(scaled, -1.0, 1.0))


def _active_span(samples: np.ndarray) -> tuple[int, int] | None:
    idx = np.flatnonzero(np.abs(samples) > ACTIVE_THRESHOLD)
    if idx.size == 0:
        return None
    return int(idx[0]), int(idx[-1])


def time_shift(clip: AudioClip, offset_s: float, window_s: float) -> AudioClip:
    """Displace the clip by offset_s inside a zero-padded window.

    The output is exactly window_s long. Content above the 0.001
    amplitude floor must stay inside the window; the shift is a whole
    number of samples so no voiced sample is lost or interpolated.
    """
    sr = clip.sample_rate
    n_win = int(round(window_s * sr))
    n = len(clip)
    if n > n_win:
        raise ValueError(f"clip ({n} samples) longer than window ({n_win})")
    k = int(round(offset_s * sr))
    span = _active_span(clip.samples)
    if span is not None:
        first, last = span
        if first + k < 0 or last + k >= n_win:
            raise ValueError(
                f"shift of {offset_s}s pushes active content outside the {window_s}s window"
            )
    out = np.zeros(n_win)
    src_lo = max(0, -k)
    src_hi = min(n, n_win - k)
    if src_hi > src_lo:
        out[src_lo + k : src_hi + k] = clip.samples[src_lo:src_hi]
    return AudioClip(out, sr, clip.provenance)


def mix_ambiance(
    clip: AudioClip,
    ambiance: AudioClip,
    snr_db: float,
    rng: np.random.Generator | None = None,
) -> AudioClip:
    """Add a random contiguous ambiance segment at the requested SNR.

    The segment is scaled so 10*log10(rms(clip)^2 / rms(noise)^2) equals
    snr_db, added, then clamped. Silent input is rejected (SNR undefined).
    """
    if ambiance.sample_rate != clip.sample_rate:
        raise ValueError(
            f"sample-rate mismatch: clip {clip.sample_rate} vs ambiance {ambiance.sample_rate}"
        )
    n = len(clip)
    if len(ambiance) < n:
        raise ValueError("ambiance shorter than clip")
    signal_rms = rms(clip)
    if signal_rms == 0.0:
        raise ValueError("undefined SNR: signal clip is silent")
    if rng is None:
        rng = np.random.default_rng(0)
    start = int(rng.integers(0, len(ambiance) - n + 1))
    segment = ambiance.samples[start : start + n]
    seg_rms = float(np.sqrt(np.mean(np.square(segment))))
    if seg_rms == 0.0:
        raise ValueError("ambiance segment is silent; cannot reach requested SNR")
    target = signal_rms / 10.0 ** (snr_db / 20.0)
    mixed = clip.samples + segment * (target / seg_rms)
    return clip.with_samples(np.clip(mixed, -1.0, 1.0))


def sample_augment_spec(
    rng: np.random.Generator,
    ranges: AugmentRanges,
    family: AugmentFamily,
    ambiance_ids: Sequence[str] = (),
) -> AugmentSpec:
    """Draw one AugmentSpec for the given family.

    Speed, gain, and time shift are drawn for every family; pitch and
    ambiance only where the family calls for them. Draw order is fixed so
    a seeded generator yields a reproducible spec stream.
    """
    speed = float(rng.uniform(*ranges.speed_factor)) if ranges.enable_speed else 1.0
    gain = float(rng.uniform(*ranges.gain_db)) if ranges.enable_gain else 0.0
    half = ranges.window_s / 2.0
    shift = float(rng.uniform(-half, half)) if ranges.enable_shift else 0.0
    pitch = float(rng.uniform(*ranges.pitch_semitones)) if family.uses_pitch else 0.0
    ambiance_id = None
    snr = None
    if family.uses_ambiance:
        if not ambiance_ids:
            raise ValueError(f"family {family.value} needs ambiance_ids, none given")
        ambiance_id = str(ambiance_ids[int(rng.integers(0, len(ambiance_ids)))])
        snr = float(rng.uniform(*ranges.snr_db))
    seed = int(rng.integers(0, 2**64, dtype=np.uint64))
    return AugmentSpec(
        pitch_semitones=pitch,
        speed_factor=speed,
        gain_db=gain,
        time_shift_s=shift,
        ambiance_id=ambiance_id,
        snr_db=snr,
        seed=seed,
    )


def _fit_into_window(samples: np.ndarray, n_win: int) -> np.ndarray:
    """Crop (centered on active content) or right-pad to exactly n_win."""
    if len(samples) > n_win:
        span = _active_span(samples)
        center = (span[0] + span[1] + 1) // 2 if span else len(samples) // 2
        start = min(max(center - n_win // 2, 0), len(samples) - n_win)
        samples = samples[start : start + n_win]
    if len(samples) < n_win:
        samples = np.concatenate([samples, np.zeros(n_win - len(samples))])
    return samples


def augment_clip(
    clip: AudioClip,
    spec: AugmentSpec,
    window_s: float,
    ambiances: Mapping[str, AudioClip] | None = None,
) -> AudioClip:
    """Apply one full augmentation recipe.

    Fixed order: time_stretch(speed) -> pitch_shift -> apply_gain ->
    fit-and-shift into the window -> mix_ambiance. Ambiance is mixed last
    so it is never pitch-shifted. The requested time shift is clamped to
    keep active content inside the window; output length is exactly
    round(window_s * sample_rate).
    """
    sr = clip.sample_rate
    n_win = int(round(window_s * sr))

    out = time_stretch(clip, spec.speed_factor)
    out = pitch_shift(out, spec.pitch_semitones)
    out = apply_gain(out, spec.gain_db)

    fitted = _fit_into_window(out.samples, n_win)
    k = int(round(spec.time_shift_s * sr))
    span = _active_span(fitted)
    if span is not None:
        first, last = span
        k = min(max(k, -first), n_win - 1 - last)
        shifted = np.zeros(n_win)
        src_lo = max(0, -k)
        src_hi = min(n_win, n_win - k)
        shifted[src_lo + k : src_hi + k] = fitted[src_lo:src_hi]
    else:
        shifted = fitted
    out = AudioClip(shifted, sr, clip.provenance)

    if spec.ambiance_id is not None:
        if ambiances is None or spec.ambiance_id not in ambiances:
            raise ValueError(f"unknown ambiance_id {spec.ambiance_id!r}")
        rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
        out = mix_ambiance(out, ambiances[spec.ambiance_id], spec.snr_db, rng)
    return out
