"""Serialize a trained model into a compact, checksummed binary blob.

One file carries everything a runtime needs to classify a window: MFCC
parameters, normalization stats, the layer table with weight offsets,
float32 weights, and the detection threshold, all little-endian, with a
trailing CRC-32. Byte offsets are documented in docs/FORMATS.md. The same
module loads a blob back into a runnable pipeline and emits golden
input/output vectors for cross-runtime equivalence testing.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import nn
from .audio import AudioClip, encode_pcm16, PCM16_SCALE
from .features import FeatureStats, MfccConfig, compute_mfcc, normalize

MAGIC = b"LUME"
GOLDEN_MAGIC = b"GOLD"
FORMAT_VERSION = 1

_KIND_CODES = {"reshape": 0, "conv1d": 1, "maxpool1d": 2, "dropout": 3,
               "flatten": 4, "dense": 5}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}
_ACT_CODES = {"none": 0, "relu": 1, "softmax": 2}
_ACT_NAMES = {v: k for k, v in _ACT_CODES.items()}


class ExportError(ValueError):
    """Base class for blob format problems."""


class BadMagicError(ExportError):
    pass


class UnsupportedVersionError(ExportError):
    pass


class ChecksumError(ExportError):
    pass


class TruncatedBlobError(ExportError):
    """File shorter than its declared structure, or sizes disagree."""


class MalformedBlobError(ExportError):
    """Structure bytes decode to an impossible layer table or shapes."""


@dataclass
class RunnableModel:
    """A loaded end-to-end window classifier: MFCC -> normalize -> forward."""

    sample_rate: int
    window_s: float
    mfcc_config: MfccConfig
    stats: FeatureStats
    spec: nn.ModelSpec
    weights: list
    threshold: float

    @property
    def window_samples(self) -> int:
        return int(round(self.window_s * self.sample_rate))

    def classify_window(self, samples: np.ndarray) -> np.ndarray:
        """Probabilities over the 8 subclasses for one window of samples."""
        clip = AudioClip(samples, self.sample_rate)
        feats = compute_mfcc(clip, self.mfcc_config)
        feats = normalize(feats, self.stats)
        return nn.forward(self.spec, self.weights, feats.values, mode="infer")


def _require_exportable(spec: nn.ModelSpec) -> None:
    for layer in spec.layers:
        if layer.kind not in _KIND_CODES:
            raise ExportError(f"layer kind {layer.kind!r} unsupported for export")


def export_model(
    spec: nn.ModelSpec,
    weights: list,
    mfcc_config: MfccConfig,
    stats: FeatureStats,
    threshold: float,
    path: str | Path,
    sample_rate: int = 16_000,
    window_s: float = 1.0,
) -> None:
    """Write the blob. Byte-deterministic for identical inputs."""
    _require_exportable(spec)
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    mfcc_config.validate_for_rate(sample_rate)

    weight_blobs: list[np.ndarray] = []
    offsets: dict[int, tuple[int, int, int, int]] = {}
    cursor = 0
    for i, (layer, lw) in enumerate(zip(spec.layers, weights)):
        if layer.kind in ("conv1d", "dense"):
            w = np.asarray(lw["W"], dtype="<f4").reshape(-1)
            b = np.asarray(lw["b"], dtype="<f4").reshape(-1)
            offsets[i] = (cursor, w.size, cursor + w.size, b.size)
            cursor += w.size + b.size
            weight_blobs += [w, b]

    out = bytearray()
    out += MAGIC
    out += struct.pack("<H", FORMAT_VERSION)
    out += struct.pack("<I", sample_rate)
    out += struct.pack("<f", window_s)
    out += struct.pack(
        "<ffIIIfff",
        mfcc_config.frame_length_s,
        mfcc_config.frame_stride_s,
        mfcc_config.num_mel_filters,
        mfcc_config.num_cepstral_coeffs,
        mfcc_config.fft_size,
        mfcc_config.pre_emphasis,
        mfcc_config.low_freq_hz,
        mfcc_config.resolved_high_hz(sample_rate),
    )
    out += struct.pack("<II", *spec.input_shape)
    out += struct.pack("<I", spec.num_classes)

    means = np.asarray(stats.mean, dtype="<f4")
    stds = np.asarray(stats.std, dtype="<f4")
    out += struct.pack("<I", means.size)
    out += means.tobytes()
    out += stds.tobytes()

    out += struct.pack("<H", len(spec.layers))
    for i, layer in enumerate(spec.layers):
        out += struct.pack("<B", _KIND_CODES[layer.kind])
        if layer.kind == "conv1d":
            out += struct.pack("<IIIB", layer.filters, layer.kernel, layer.stride,
                               _ACT_CODES[layer.activation])
            out += struct.pack("<IIII", *offsets[i])
        elif layer.kind == "maxpool1d":
            out += struct.pack("<I", layer.pool)
        elif layer.kind == "dropout":
            out += struct.pack("<f", layer.rate)
        elif layer.kind == "dense":
            out += struct.pack("<IB", layer.units, _ACT_CODES[layer.activation])
            out += struct.pack("<IIII", *offsets[i])

    total = sum(b.size for b in weight_blobs)
    out += struct.pack("<I", total)
    for blob in weight_blobs:
        out += blob.tobytes()
    out += struct.pack("<f", threshold)
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    Path(path).write_bytes(bytes(out))


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.blob):
            raise TruncatedBlobError(
                f"blob ends at byte {len(self.blob)}, need {self.pos + size}"
            )
        vals = struct.unpack_from(fmt, self.blob, self.pos)
        self.pos += size
        return vals if len(vals) > 1 else vals[0]

    def take_f32(self, count: int) -> np.ndarray:
        size = 4 * count
        if self.pos + size > len(self.blob):
            raise TruncatedBlobError(
                f"blob ends at byte {len(self.blob)}, need {self.pos + size}"
            )
        arr = np.frombuffer(self.blob, dtype="<f4", count=count, offset=self.pos)
        self.pos += size
        return arr.astype(np.float64)


def load_exported(path: str | Path) -> RunnableModel:
    """Parse and verify a blob; distinct errors for magic/version/CRC/length."""
    blob = Path(path).read_bytes()
    if len(blob) < 4 or blob[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {blob[:4]!r}")
    r = _Reader(blob)
    r.pos = 4
    version = r.take("<H")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"{path}: version {version}, support {FORMAT_VERSION}")

    sample_rate = r.take("<I")
    window_s = r.take("<f")
    (frame_len, frame_stride, n_mel, n_ceps, fft_size,
     pre_emph, low_hz, high_hz) = r.take("<ffIIIfff")
    frames, coeffs = r.take("<II")
    num_classes = r.take("<I")
    stats_count = r.take("<I")
    means = r.take_f32(stats_count)
    stds = r.take_f32(stats_count)

    layer_count = r.take("<H")
    layers: list[nn.LayerSpec] = []
    tables: list[tuple[int, int, int, int] | None] = []
    try:
        for _ in range(layer_count):
            kind = _KIND_NAMES.get(r.take("<B"))
            if kind is None:
                raise MalformedBlobError(f"{path}: unknown layer kind code")
            if kind == "conv1d":
                filters, kernel, stride, act = r.take("<IIIB")
                layers.append(nn.conv1d(filters, kernel, stride, _ACT_NAMES[act]))
                tables.append(tuple(r.take("<IIII")))
            elif kind == "maxpool1d":
                layers.append(nn.maxpool1d(r.take("<I")))
                tables.append(None)
            elif kind == "dropout":
                layers.append(nn.dropout(r.take("<f")))
                tables.append(None)
            elif kind == "dense":
                units, act = r.take("<IB")
                layers.append(nn.dense(units, _ACT_NAMES[act]))
                tables.append(tuple(r.take("<IIII")))
            else:
                layers.append(nn.LayerSpec(kind=kind))
                tables.append(None)
    except ExportError:
        raise
    except (ValueError, KeyError) as exc:
        raise MalformedBlobError(f"{path}: bad layer table ({exc})") from exc

    total = r.take("<I")
    flat = r.take_f32(total)
    threshold = r.take("<f")
    stored_crc = r.take("<I")
    if r.pos != len(blob):
        raise TruncatedBlobError(f"{path}: {len(blob) - r.pos} trailing bytes")
    if zlib.crc32(blob[:-4]) != stored_crc:
        raise ChecksumError(f"{path}: CRC mismatch")

    spec = nn.ModelSpec(tuple(layers), (frames, coeffs), num_classes)
    shapes = nn.propagate_shapes(spec)
    weights: list[dict] = []
    shape: tuple[int, ...] = spec.input_shape
    for layer, table, out_shape in zip(spec.layers, tables, shapes):
        if table is None:
            weights.append({})
        else:
            w_off, w_len, b_off, b_len = table
            if max(w_off + w_len, b_off + b_len) > total:
                raise TruncatedBlobError(f"{path}: weight table exceeds weight block")
            if layer.kind == "conv1d":
                w_shape = (layer.filters, shape[-1], layer.kernel)
                b_shape = (layer.filters,)
            else:
                w_shape = (layer.units, shape[0])
                b_shape = (layer.units,)
            if w_len != int(np.prod(w_shape)) or b_len != b_shape[0]:
                raise TruncatedBlobError(f"{path}: weight length mismatch on {layer.kind}")
            weights.append({
                "W": flat[w_off : w_off + w_len].reshape(w_shape),
                "b": flat[b_off : b_off + b_len],
            })
        shape = out_shape

    mfcc_config = MfccConfig(
        frame_length_s=float(frame_len),
        frame_stride_s=float(frame_stride),
        num_mel_filters=int(n_mel),
        num_cepstral_coeffs=int(n_ceps),
        fft_size=int(fft_size),
        pre_emphasis=float(pre_emph),
        low_freq_hz=float(low_hz),
        high_freq_hz=float(high_hz),
    )
    stats = FeatureStats(means, stds, mfcc_config.fingerprint(sample_rate))
    return RunnableModel(
        sample_rate=int(sample_rate),
        window_s=float(window_s),
        mfcc_config=mfcc_config,
        stats=stats,
        spec=spec,
        weights=weights,
        threshold=float(threshold),
    )


def _golden_window(rng: np.random.Generator, n: int, sample_rate: int) -> np.ndarray:
    """Seeded synthetic audio: noise, tones, mixes, and sweeps, cycled."""
    kind = int(rng.integers(0, 4))
    t = np.arange(n) / sample_rate
    if kind == 0:
        amp = rng.uniform(0.005, 0.3)
        return rng.uniform(-amp, amp, n)
    freq = rng.uniform(100.0, sample_rate / 4.5)
    amp = rng.uniform(0.05, 0.7)
    if kind == 1:
        return amp * np.sin(2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
    if kind == 2:
        noise = rng.uniform(-1, 1, n) * rng.uniform(0.005, 0.1)
        return amp * np.sin(2 * np.pi * freq * t) + noise
    f1 = rng.uniform(100.0, sample_rate / 4.5)
    sweep = np.sin(2 * np.pi * (freq + (f1 - freq) * t / t[-1] / 2) * t)
    return amp * sweep


def emit_golden_vectors(
    model_path: str | Path, count: int, seed: int, out_path: str | Path
) -> None:
    """Write `count` (PCM window, expected probabilities) records.

    Layout: "GOLD", u32 count, u32 window_samples, u32 num_classes; then
    per record a u32 index, int16 PCM, and float32 probabilities. The
    probabilities come from classifying the dequantized PCM, so another
    runtime sees bit-identical input.
    """
    model = load_exported(model_path)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n = model.window_samples
    out = bytearray()
    out += GOLDEN_MAGIC
    out += struct.pack("<III", count, n, model.spec.num_classes)
    for i in range(count):
        pcm = encode_pcm16(_golden_window(rng, n, model.sample_rate))
        samples = pcm.astype(np.float64) / PCM16_SCALE
        probs = model.classify_window(samples).astype("<f4")
        out += struct.pack("<I", i)
        out += pcm.tobytes()
        out += probs.tobytes()
    Path(out_path).write_bytes(bytes(out))


def read_golden_vectors(path: str | Path) -> list[tuple[np.ndarray, np.ndarray]]:
    """Parse a golden-vector file into (pcm int16, probabilities) pairs."""
    blob = Path(path).read_bytes()
    if blob[:4] != GOLDEN_MAGIC:
        raise BadMagicError(f"{path}: bad golden magic {blob[:4]!r}")
    count, n, classes = struct.unpack_from("<III", blob, 4)
    pos = 16
    records = []
    for i in range(count):
        (idx,) = struct.unpack_from("<I", blob, pos)
        if idx != i:
            raise TruncatedBlobError(f"{path}: record {i} has index {idx}")
        pos += 4
        pcm = np.frombuffer(blob, dtype="<i2", count=n, offset=pos)
        pos += 2 * n
        probs = np.frombuffer(blob, dtype="<f4", count=classes, offset=pos)
        pos += 4 * classes
        records.append((pcm, probs.astype(np.float64)))
    if pos != len(blob):
        raise TruncatedBlobError(f"{path}: {len(blob) - pos} trailing bytes")
    return records
