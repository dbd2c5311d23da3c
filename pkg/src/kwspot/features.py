"""MFCC front-end: one 1-second window in, frames x coefficients out.

Pipeline: pre-emphasis -> framing -> Hamming window -> |FFT|^2 ->
triangular mel filterbank -> log -> orthonormal DCT-II, keeping the first
num_cepstral_coeffs coefficients. With the defaults at 16 kHz a 1 s window
yields 31 frames x 13 coefficients.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.fftpack import dct

from .audio import AudioClip

LOG_FLOOR = 1e-10  # keeps log() finite on silence
STD_FLOOR = 1e-6


def mel_scale(hz: float | np.ndarray) -> float | np.ndarray:
    """Hz to mel: 2595 * log10(1 + hz/700)."""
    hz = np.asarray(hz, dtype=np.float64)
    if np.any(hz < 0):
        raise ValueError("mel_scale requires hz >= 0")
    out = 2595.0 * np.log10(1.0 + hz / 700.0)
    return float(out) if out.ndim == 0 else out


def mel_to_hz(mel: float | np.ndarray) -> float | np.ndarray:
    """Inverse of mel_scale."""
    mel = np.asarray(mel, dtype=np.float64)
    out = 700.0 * (10.0 ** (mel / 2595.0) - 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MfccConfig:
    frame_length_s: float = 0.032
    frame_stride_s: float = 0.032
    num_mel_filters: int = 40
    num_cepstral_coeffs: int = 13
    fft_size: int = 512
    pre_emphasis: float = 0.97
    low_freq_hz: float = 0.0
    high_freq_hz: float | None = None  # None = Nyquist at use time

    def __post_init__(self):
        if self.frame_length_s <= 0 or self.frame_stride_s <= 0:
            raise ValueError("frame length and stride must be > 0")
        if self.num_cepstral_coeffs > self.num_mel_filters:
            raise ValueError("num_cepstral_coeffs must be <= num_mel_filters")
        if self.num_mel_filters < 1 or self.fft_size < 2:
            raise ValueError("need >= 1 mel filter and fft_size >= 2")
        if self.low_freq_hz < 0:
            raise ValueError("low_freq_hz must be >= 0")

    def frame_samples(self, sample_rate: int) -> int:
        return int(round(self.frame_length_s * sample_rate))

    def stride_samples(self, sample_rate: int) -> int:
        return int(round(self.frame_stride_s * sample_rate))

    def resolved_high_hz(self, sample_rate: int) -> float:
        nyquist = sample_rate / 2.0
        high = nyquist if self.high_freq_hz is None else self.high_freq_hz
        if not self.low_freq_hz < high <= nyquist:
            raise ValueError(
                f"need low ({self.low_freq_hz}) < high ({high}) <= nyquist ({nyquist})"
            )
        return high

    def validate_for_rate(self, sample_rate: int) -> None:
        if self.frame_samples(sample_rate) > self.fft_size:
            raise ValueError(
                f"frame of {self.frame_samples(sample_rate)} samples exceeds "
                f"fft_size {self.fft_size}"
            )
        self.resolved_high_hz(sample_rate)

    def num_frames(self, window_samples: int, sample_rate: int) -> int:
        frame = self.frame_samples(sample_rate)
        stride = self.stride_samples(sample_rate)
        if window_samples < frame:
            raise ValueError("window shorter than one frame")
        return (window_samples - frame) // stride + 1

    def fingerprint(self, sample_rate: int) -> str:
        payload = json.dumps(
            {
                "frame_length_s": self.frame_length_s,
                "frame_stride_s": self.frame_stride_s,
                "num_mel_filters": self.num_mel_filters,
                "num_cepstral_coeffs": self.num_cepstral_coeffs,
                "fft_size": self.fft_size,
                "pre_emphasis": self.pre_emphasis,
                "low_freq_hz": self.low_freq_hz,
                "high_freq_hz": self.high_freq_hz,
                "sample_rate": sample_rate,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {
            "frame_length_s": self.frame_length_s,
            "frame_stride_s": self.frame_stride_s,
            "num_mel_filters": self.num_mel_filters,
            "num_cepstral_coeffs": self.num_cepstral_coeffs,
            "fft_size": self.fft_size,
            "pre_emphasis": self.pre_emphasis,
            "low_freq_hz": self.low_freq_hz,
            "high_freq_hz": self.high_freq_hz,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MfccConfig":
        return cls(**d)


@dataclass(frozen=True)
class FeatureMatrix:
    """frames x coefficients matrix plus the config fingerprint it came from."""

    values: np.ndarray
    config_fingerprint: str
    normalized: bool = False

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"feature matrix must be 2-D, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("feature matrix contains non-finite values")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    @property
    def num_coeffs(self) -> int:
        return self.values.shape[1]


def filter_centers_mel(config: MfccConfig, sample_rate: int) -> np.ndarray:
    """Mel positions of the F filter centers: low + k*(high-low)/(F+1), k=1..F."""
    low = mel_scale(config.low_freq_hz)
    high = mel_scale(config.resolved_high_hz(sample_rate))
    k = np.arange(1, config.num_mel_filters + 1)
    return low + k * (high - low) / (config.num_mel_filters + 1)


def build_filterbank(config: MfccConfig, sample_rate: int) -> np.ndarray:
    """Triangular mel filterbank, shape (num_mel_filters, fft_size/2 + 1).

    Centers are equally spaced on the mel axis; each triangle spans its
    neighbours' centers and is evaluated at the FFT bin frequencies, so
    every interior bin gets positive weight from some filter.
    """
    config.validate_for_rate(sample_rate)
    low = mel_scale(config.low_freq_hz)
    high = mel_scale(config.resolved_high_hz(sample_rate))
    edges_mel = np.linspace(low, high, config.num_mel_filters + 2)
    edges_hz = mel_to_hz(edges_mel)

    n_bins = config.fft_size // 2 + 1
    bin_hz = np.arange(n_bins) * sample_rate / config.fft_size
    bank = np.zeros((config.num_mel_filters, n_bins))
    for f in range(config.num_mel_filters):
        left, center, right = edges_hz[f], edges_hz[f + 1], edges_hz[f + 2]
        rising = (bin_hz - left) / (center - left)
        falling = (right - bin_hz) / (right - center)
        bank[f] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def frame_signal(samples: np.ndarray, frame: int, stride: int) -> np.ndarray:
    """Slice a signal into (num_frames, frame) rows; tail short of a frame is dropped."""
    n_frames = (len(samples) - frame) // stride + 1
    idx = np.arange(frame)[None, :] + stride * np.arange(n_frames)[:, None]
    return samples[idx]


def power_spectrum(frames: np.ndarray, fft_size: int) -> np.ndarray:
    """|FFT|^2 of already-windowed frames (rows), one-sided, unnormalized."""
    return np.square(np.abs(np.fft.rfft(frames, n=fft_size, axis=1)))


def compute_mfcc(clip: AudioClip, config: MfccConfig) -> FeatureMatrix:
    """MFCC features for one analysis window (e.g. one 1 s clip)."""
    config.validate_for_rate(clip.sample_rate)
    x = clip.samples
    if len(x) < config.frame_samples(clip.sample_rate):
        raise ValueError(
            f"window of {len(x)} samples shorter than one "
            f"{config.frame_samples(clip.sample_rate)}-sample frame"
        )

    emphasized = np.empty_like(x)
    emphasized[0] = x[0]
    emphasized[1:] = x[1:] - config.pre_emphasis * x[:-1]

    frame = config.frame_samples(clip.sample_rate)
    stride = config.stride_samples(clip.sample_rate)
    frames = frame_signal(emphasized, frame, stride) * np.hamming(frame)

    power = power_spectrum(frames, config.fft_size)
    bank = build_filterbank(config, clip.sample_rate)
    energies = power @ bank.T
    logmel = np.log(energies + LOG_FLOOR)
    ceps = dct(logmel, type=2, axis=1, norm="ortho")[:, : config.num_cepstral_coeffs]
    return FeatureMatrix(ceps, config.fingerprint(clip.sample_rate))


@dataclass(frozen=True)
class FeatureStats:
    """Per-coefficient mean/std fitted on the training split only."""

    mean: np.ndarray
    std: np.ndarray
    config_fingerprint: str

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.maximum(np.asarray(self.std, dtype=np.float64), STD_FLOOR)
        mean.flags.writeable = False
        std.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "config_fingerprint": self.config_fingerprint,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureStats":
        return cls(np.array(d["mean"]), np.array(d["std"]), d["config_fingerprint"])


def fit_feature_stats(features: Sequence[FeatureMatrix]) -> FeatureStats:
    """Column-wise mean/std over all frames of all given matrices."""
    if not features:
        raise ValueError("cannot fit stats on an empty feature list")
    fp = features[0].config_fingerprint
    for f in features:
        if f.config_fingerprint != fp:
            raise ValueError("feature matrices come from different MFCC configs")
    stacked = np.concatenate([f.values for f in features], axis=0)
    return FeatureStats(stacked.mean(axis=0), stacked.std(axis=0), fp)


def normalize(features: FeatureMatrix, stats: FeatureStats) -> FeatureMatrix:
    """(value - mean_c) / std_c per coefficient column.

    Refuses to run twice on the same matrix: normalization is not
    idempotent, so re-application is always a pipeline bug.
    """
    if features.config_fingerprint != stats.config_fingerprint:
        raise ValueError("feature/stats fingerprint mismatch: different MFCC config")
    if features.normalized:
        raise ValueError("features are already normalized")
    values = (features.values - stats.mean) / stats.std
    return FeatureMatrix(values, features.config_fingerprint, normalized=True)
