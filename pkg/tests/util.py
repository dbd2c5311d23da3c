"""Small signal helpers shared across test modules."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from kwspot.audio import AudioClip


def tone(freq_hz: float, duration_s: float = 1.0, sample_rate: int = 16_000,
         amplitude: float = 0.5) -> AudioClip:
    t = np.arange(int(round(duration_s * sample_rate))) / sample_rate
    return AudioClip(amplitude * np.sin(2 * np.pi * freq_hz * t), sample_rate)


def dft_peak_hz(samples: np.ndarray, sample_rate: int) -> float:
    """Location of the DFT magnitude peak (Hann-windowed), in Hz."""
    spec = np.abs(np.fft.rfft(samples * np.hanning(len(samples))))
    return float(np.argmax(spec) * sample_rate / len(samples))


def burst(start_s: float, dur_s: float, total_s: float = 1.0,
          sample_rate: int = 16_000, amplitude: float = 0.5) -> AudioClip:
    """A window-length clip holding one rectangular tone burst."""
    n = int(round(total_s * sample_rate))
    x = np.zeros(n)
    i0, i1 = int(start_s * sample_rate), int((start_s + dur_s) * sample_rate)
    t = np.arange(i1 - i0) / sample_rate
    x[i0:i1] = amplitude * np.sin(2 * np.pi * 500 * t)
    return AudioClip(x, sample_rate)


def write_raw_wav(path: Path, fmt_code: int, channels: int, rate: int,
                  bits: int, payload: bytes) -> None:
    """Hand-rolled RIFF writer for exercising reader edge cases."""
    block_align = channels * bits // 8
    fmt = struct.pack("<HHIIHH", fmt_code, channels, rate,
                      rate * block_align, block_align, bits)
    body = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) % 2:
        body += b"\x00"
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + body)
