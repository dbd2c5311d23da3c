"""Procedural audio corpus for tests.

Synthesizes "words" as formant-trajectory harmonic stacks and "speakers"
as (f0, formant-scale) pairs, laid out like a Speech-Commands tree. The
keyword is just another synthetic word, so end-to-end tests can check the
whole pipeline (augment -> features -> train -> select -> detect) without
shipping real recordings. Validation speakers are disjoint from training
speakers.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from kwspot.audio import AudioClip, write_wav

SR = 16_000

# formant (F1, F2) trajectories per word; each tuple is one "phoneme"
WORD_FORMANTS = {
    "keyword": [(700, 1150), (320, 2300), (520, 980)],
    "stop": [(420, 900), (1250, 2550)],
    "go": [(620, 1700), (350, 800)],
    "left": [(480, 1900), (950, 1450), (380, 2600)],
    "right": [(850, 1350), (400, 2100)],
}

TRAIN_SPEAKERS = [(115.0, 1.00), (155.0, 0.95), (205.0, 1.05)]
HELDOUT_SPEAKERS = [(135.0, 1.10), (180.0, 0.90), (240.0, 1.08)]


@dataclass(frozen=True)
class Speaker:
    f0: float
    formant_scale: float


def synth_word(
    word: str, speaker: Speaker, rng: np.random.Generator, duration_s: float = 0.6
) -> AudioClip:
    """One utterance: harmonic stack shaped by per-segment formant pairs."""
    segments = WORD_FORMANTS[word]
    n_total = int(duration_s * SR)
    n_seg = n_total // len(segments)
    f0 = speaker.f0 * rng.uniform(0.96, 1.04)
    pieces = []
    for f1, f2 in segments:
        t = np.arange(n_seg) / SR
        f1 = f1 * speaker.formant_scale * rng.uniform(0.97, 1.03)
        f2 = f2 * speaker.formant_scale * rng.uniform(0.97, 1.03)
        vibrato = 1.0 + 0.004 * np.sin(2 * np.pi * 5.5 * t + rng.uniform(0, 2 * np.pi))
        x = np.zeros(n_seg)
        for h in range(1, 25):
            freq = h * f0
            if freq > SR / 2 - 200:
                break
            # amplitude from distance to the two formants
            amp = np.exp(-0.5 * ((freq - f1) / 160.0) ** 2)
            amp += 0.7 * np.exp(-0.5 * ((freq - f2) / 220.0) ** 2)
            amp += 0.02  # weak harmonic floor
            phase = rng.uniform(0, 2 * np.pi)
            x += amp * np.sin(2 * np.pi * freq * vibrato * t + phase)
        env = np.minimum(1.0, np.minimum(np.arange(n_seg), n_seg - np.arange(n_seg)) / (0.02 * SR))
        pieces.append(x * env)
    signal = np.concatenate(pieces)
    signal = signal / (np.abs(signal).max() + 1e-9) * rng.uniform(0.25, 0.45)
    signal += rng.normal(0, 0.001, len(signal))
    return AudioClip(np.clip(signal, -1, 1), SR)


def synth_ambiance(rng: np.random.Generator, duration_s: float = 6.0) -> AudioClip:
    """Room-tone stand-in: low-passed noise plus a faint mains hum."""
    from scipy.signal import lfilter

    n = int(duration_s * SR)
    white = rng.normal(0, 1, n)
    out = lfilter([0.05], [1.0, -0.995], white)  # one-pole low-pass, brown-ish
    out += 0.02 * np.sin(2 * np.pi * 60 * np.arange(n) / SR)
    out = out / (np.abs(out).max() + 1e-9) * 0.25
    return AudioClip(out, SR)


def build_toy_sources(
    root: str | Path,
    seed: int = 12345,
    n_user: int = 20,
    n_heldout: int = 12,
    n_per_word: int = 30,
    words: tuple[str, ...] = ("stop", "go", "left", "right"),
) -> dict:
    """Write the full source tree and return its paths.

    root/user/            keyword clips from the training speakers
    root/heldout/         keyword clips from unseen speakers
    root/words/<word>/    negative words from all speakers
    root/ambiance/        background recordings
    """
    root = Path(root)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    layout = {
        "user": root / "user",
        "heldout": root / "heldout",
        "words_root": root / "words",
        "ambiance": root / "ambiance",
        "words": words,
    }

    user_dir = layout["user"]
    user_dir.mkdir(parents=True, exist_ok=True)
    for i in range(n_user):
        spk = Speaker(*TRAIN_SPEAKERS[i % len(TRAIN_SPEAKERS)])
        write_wav(synth_word("keyword", spk, rng), user_dir / f"user_{i:03d}.wav")

    held_dir = layout["heldout"]
    held_dir.mkdir(parents=True, exist_ok=True)
    for i in range(n_heldout):
        spk = Speaker(*HELDOUT_SPEAKERS[i % len(HELDOUT_SPEAKERS)])
        write_wav(synth_word("keyword", spk, rng), held_dir / f"held_{i:03d}.wav")

    all_speakers = [Speaker(*s) for s in TRAIN_SPEAKERS + HELDOUT_SPEAKERS]
    for word in words:
        word_dir = layout["words_root"] / word
        word_dir.mkdir(parents=True, exist_ok=True)
        for i in range(n_per_word):
            spk = all_speakers[i % len(all_speakers)]
            write_wav(synth_word(word, spk, rng), word_dir / f"{word}_{i:03d}.wav")

    amb_dir = layout["ambiance"]
    amb_dir.mkdir(parents=True, exist_ok=True)
    for i in range(3):
        write_wav(synth_ambiance(rng), amb_dir / f"ambiance_{i}.wav")
    return layout
