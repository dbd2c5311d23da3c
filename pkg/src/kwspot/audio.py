"""Mono PCM audio primitives.

Everything downstream (augmentation, features, streaming) consumes the
AudioClip type defined here: 64-bit float samples in [-1, 1] plus a sample
rate. Files on disk stay 16-bit PCM; WAV input additionally accepts IEEE
float32 and stereo (downmixed by averaging).
"""

from __future__ import annotations

import struct
import wave
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

PCM16_SCALE = 32768  # int16 full scale; -32768 maps to -1.0 exactly


class WavError(ValueError):
    """Base class for WAV container problems."""


class WavHeaderError(WavError):
    """Missing or malformed RIFF/WAVE structure."""


class UnsupportedWavError(WavError):
    """Well-formed file using a codec/layout outside the supported set."""


@dataclass(frozen=True)
class AudioClip:
    """Immutable mono audio buffer.

    samples: 1-D float64 array, finite values.
    sample_rate: Hz, > 0.
    provenance: optional source path, for manifests and error messages.
    """

    samples: np.ndarray
    sample_rate: int
    provenance: str | None = None

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples contain non-finite values")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be > 0, got {self.sample_rate}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_seconds(self) -> Fraction:
        """Exact duration as a rational number of seconds."""
        return Fraction(len(self.samples), self.sample_rate)

    def with_samples(self, samples: np.ndarray) -> "AudioClip":
        """New clip with the same rate/provenance and different samples."""
        return AudioClip(samples, self.sample_rate, self.provenance)


def read_wav(path: str | Path) -> AudioClip:
    """Read a RIFF/WAVE file into an AudioClip.

    Accepts PCM 16-bit or IEEE float 32-bit, mono or stereo. Stereo is
    downmixed by averaging the channels; 16-bit integers map to floats by
    dividing by 32768.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such audio file: {path}")
    blob = path.read_bytes()
    if len(blob) < 12 or blob[0:4] != b"RIFF":
        raise WavHeaderError(f"{path}: missing RIFF chunk id")
    if blob[8:12] != b"WAVE":
        raise WavHeaderError(f"{path}: RIFF form type is not WAVE")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(blob):
        cid = blob[pos : pos + 4]
        (size,) = struct.unpack_from("<I", blob, pos + 4)
        body = blob[pos + 8 : pos + 8 + size]
        if cid == b"fmt " and fmt is None:
            if len(body) < 16:
                raise WavHeaderError(f"{path}: fmt chunk truncated")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data" and data is None:
            if len(body) < size:
                raise WavHeaderError(f"{path}: data chunk truncated")
            data = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned

    if fmt is None:
        raise WavHeaderError(f"{path}: no fmt chunk")
    if data is None:
        raise WavHeaderError(f"{path}: no data chunk")

    audio_format, channels, rate, _byte_rate, _block_align, bits = fmt
    if audio_format not in (1, 3):
        raise UnsupportedWavError(
            f"{path}: audio_format={audio_format} (want PCM=1 or IEEE float=3)"
        )
    if channels not in (1, 2):
        raise UnsupportedWavError(f"{path}: channels={channels} (want 1 or 2)")
    if rate <= 0:
        raise WavHeaderError(f"{path}: sample_rate={rate}")

    if audio_format == 1:
        if bits != 16:
            raise UnsupportedWavError(
                f"{path}: bits_per_sample={bits} (PCM supports only 16)"
            )
        raw = np.frombuffer(data[: len(data) - len(data) % 2], dtype="<i2")
        samples = raw.astype(np.float64) / PCM16_SCALE
    else:
        if bits != 32:
            raise UnsupportedWavError(
                f"{path}: bits_per_sample={bits} (float supports only 32)"
            )
        raw = np.frombuffer(data[: len(data) - len(data) % 4], dtype="<f4")
        samples = raw.astype(np.float64)

    if channels == 2:
        samples = samples[: len(samples) - len(samples) % 2]
        samples = samples.reshape(-1, 2).mean(axis=1)

    if not np.all(np.isfinite(samples)):
        raise UnsupportedWavError(f"{path}: non-finite sample values")
    return AudioClip(samples, int(rate), provenance=str(path))


def encode_pcm16(samples: np.ndarray) -> np.ndarray:
    """Float [-1, 1] to int16: clamp, scale to full range, round to nearest.

    Scaling by 32768 with a clip at +32767 keeps the read/write round trip
    within 1/32768 per sample everywhere (a 32767 scale would not).
    """
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    q = np.round(x * PCM16_SCALE)
    return np.clip(q, -32768, 32767).astype("<i2")


def write_wav(clip: AudioClip, path: str | Path) -> None:
    """Write a clip as 16-bit PCM mono, little-endian."""
    pcm = encode_pcm16(clip.samples)
    try:
        fh = open(path, "wb")
    except OSError as exc:
        raise OSError(f"cannot write WAV to {path}: {exc}") from exc
    with fh:
        with wave.open(fh, "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(2)
            wf.setframerate(clip.sample_rate)
            wf.writeframes(pcm.tobytes())


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Linear-interpolation resampling to target_rate.

    Output length is round(len * target/source); identity when the rates
    already match. Adequate for speech-band material at desk scale.
    """
    if target_rate <= 0:
        raise ValueError(f"target_rate must be > 0, got {target_rate}")
    if target_rate == clip.sample_rate:
        return clip
    n_in = len(clip)
    n_out = int(round(n_in * target_rate / clip.sample_rate))
    if n_in == 0 or n_out == 0:
        return AudioClip(np.zeros(n_out), target_rate, clip.provenance)
    t_in = np.arange(n_in) / clip.sample_rate
    t_out = np.arange(n_out) / target_rate
    out = np.interp(t_out, t_in, clip.samples)
    return AudioClip(out, target_rate, clip.provenance)


def rms(clip: AudioClip) -> float:
    """Root-mean-square amplitude. Rejects empty clips."""
    if len(clip) == 0:
        raise ValueError("rms of an empty clip is undefined")
    return float(np.sqrt(np.mean(np.square(clip.samples))))
