"""Sliding-window streaming detection.

Audio arrives in 250 ms packets; the last four packets form a one-second
window that is classified on every packet boundary. When the summed
probability of the four keyword subclasses reaches the threshold (and the
refractory period has elapsed) a DetectionEvent fires. The ring buffer
never holds more than four packets, so no audio survives beyond the
window that contained it.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .audio import AudioClip, read_wav, resample
from .export import RunnableModel

PACKET_S = 0.25
NAME_CLASSES = slice(0, 4)  # subclass indices that sum into the trigger score


@dataclass(frozen=True)
class Packet:
    """One fixed-length capture buffer; timestamp marks the packet's end."""

    samples: np.ndarray
    seq: int
    timestamp_ms: float

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)


@dataclass
class DetectorConfig:
    model: RunnableModel
    threshold: float = 0.70
    refractory_ms: float = 1000.0

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.refractory_ms < 0:
            raise ValueError("refractory_ms must be >= 0")


@dataclass(frozen=True)
class DetectionEvent:
    window_end_ms: float
    name_sum: float
    probs: tuple[float, ...]
    latency_ms: float = field(compare=False, default=0.0)  # wall-clock, excluded from ==


class StreamDetector:
    """Owns the four-packet ring buffer and the trigger state.

    Contract: a single producer pushes packets in sequence order; a
    sequence gap clears the buffer (no phantom windows over spliced
    audio). Classification happens only when four contiguous packets are
    present.
    """

    def __init__(self, config: DetectorConfig):
        self.config = config
        self.packet_samples = config.model.sample_rate // 4
        self._buffer: deque[Packet] = deque(maxlen=4)
        self._last_seq: int | None = None
        self._last_trigger_ms: float | None = None
        self.windows_processed = 0
        self._latency_sum_ms = 0.0
        self.max_latency_ms = 0.0

    @property
    def mean_latency_ms(self) -> float:
        return self._latency_sum_ms / self.windows_processed if self.windows_processed else 0.0

    def state_size(self) -> int:
        """Samples currently retained; constant (<= 4 packets) by design."""
        return sum(len(p.samples) for p in self._buffer)

    def decide(self, probs: np.ndarray, window_end_ms: float) -> tuple[bool, float]:
        """Threshold-plus-refractory rule; updates trigger state on fire.

        The comparison is inclusive: a name-sum of exactly the threshold
        triggers.
        """
        probs = np.asarray(probs, dtype=np.float64)
        if abs(probs.sum() - 1.0) > 1e-6:
            raise ValueError(f"probabilities sum to {probs.sum()}, expected 1")
        name_sum = float(probs[NAME_CLASSES].sum())
        if name_sum < self.config.threshold:
            return False, name_sum
        if (
            self._last_trigger_ms is not None
            and window_end_ms - self._last_trigger_ms < self.config.refractory_ms
        ):
            return False, name_sum
        self._last_trigger_ms = window_end_ms
        return True, name_sum

    def push(self, packet: Packet) -> DetectionEvent | None:
        if len(packet.samples) != self.packet_samples:
            raise ValueError(
                f"packet has {len(packet.samples)} samples, need {self.packet_samples}"
            )
        if self._last_seq is not None:
            if packet.seq <= self._last_seq:
                raise ValueError(
                    f"non-monotonic sequence: {packet.seq} after {self._last_seq}"
                )
            if packet.seq != self._last_seq + 1:
                self._buffer.clear()  # discontinuity: drop the partial window
        self._last_seq = packet.seq
        self._buffer.append(packet)
        if len(self._buffer) < 4:
            return None

        started = time.perf_counter()
        window = np.concatenate([p.samples for p in self._buffer])
        probs = self.config.model.classify_window(window)
        self.windows_processed += 1
        triggered, name_sum = self.decide(probs, packet.timestamp_ms)
        latency_ms = (time.perf_counter() - started) * 1000.0
        self._latency_sum_ms += latency_ms
        self.max_latency_ms = max(self.max_latency_ms, latency_ms)
        if not triggered:
            return None
        return DetectionEvent(
            window_end_ms=packet.timestamp_ms,
            name_sum=name_sum,
            probs=tuple(float(p) for p in probs),
            latency_ms=latency_ms,
        )


def push_packet(
    detector: StreamDetector, packet: Packet
) -> DetectionEvent | None:
    """Functional alias for StreamDetector.push."""
    return detector.push(packet)


def packets_from_clip(clip: AudioClip) -> Iterable[Packet]:
    """Cut a clip into 250 ms packets; the trailing partial one is zero-padded."""
    n = clip.sample_rate // 4
    total = len(clip)
    count = -(-total // n) if total else 0
    for i in range(count):
        chunk = clip.samples[i * n : (i + 1) * n]
        if len(chunk) < n:
            chunk = np.concatenate([chunk, np.zeros(n - len(chunk))])
        yield Packet(samples=chunk, seq=i, timestamp_ms=(i + 1) * PACKET_S * 1000.0)


def replay(
    source: AudioClip | str | Path,
    config: DetectorConfig,
    mode: str = "fast",
) -> tuple[list[DetectionEvent], dict]:
    """Feed a recording through the detector as if it were streamed live.

    mode="realtime" paces packets at 250 ms wall-clock intervals;
    mode="fast" runs unpaced. Timestamps are audio time, so both modes
    produce identical event lists.
    """
    if mode not in ("fast", "realtime"):
        raise ValueError(f"mode must be fast|realtime, got {mode!r}")
    clip = read_wav(source) if isinstance(source, (str, Path)) else source
    clip = resample(clip, config.model.sample_rate)

    detector = StreamDetector(config)
    events: list[DetectionEvent] = []
    for packet in packets_from_clip(clip):
        if mode == "realtime":
            time.sleep(PACKET_S)
        event = detector.push(packet)
        if event is not None:
            events.append(event)
    report = {
        "mode": mode,
        "packets": detector._last_seq + 1 if detector._last_seq is not None else 0,
        "windows": detector.windows_processed,
        "events": len(events),
        "mean_latency_ms": detector.mean_latency_ms,
        "max_latency_ms": detector.max_latency_ms,
    }
    return events, report


def format_event(event: DetectionEvent) -> str:
    """One log line: ISO-8601 timestamp (audio time from epoch 0),
    summed NAME probability to 4 decimals, processing latency."""
    stamp = datetime.fromtimestamp(event.window_end_ms / 1000.0, tz=timezone.utc)
    return (
        f"{stamp.isoformat(timespec='milliseconds')} "
        f"name_sum={event.name_sum:.4f} latency_ms={event.latency_ms:.1f}"
    )


def log_events(events: Iterable[DetectionEvent], sink: TextIO) -> int:
    """Default alert sink: one line per event plus a count summary."""
    count = 0
    for event in sorted(events, key=lambda e: e.window_end_ms):
        sink.write(format_event(event) + "\n")
        count += 1
    sink.write(f"{count} detections\n")
    return count
