"""Shared scaffolding for the demo scripts.

Synthesizes a miniature voice-like corpus (a "keyword" and a few negative
words spoken by procedural speakers) and caches the built dataset and a
trained model under demos/out/ so later demos can build on earlier ones.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from kwspot.audio import AudioClip, write_wav

OUT = Path(__file__).parent / "out"
SR = 16_000

WORD_FORMANTS = {
    "keyword": [(700, 1150), (320, 2300), (520, 980)],
    "stop": [(420, 900), (1250, 2550)],
    "go": [(620, 1700), (350, 800)],
}
SPEAKERS = [(115.0, 1.0), (160.0, 0.95), (210.0, 1.05), (140.0, 1.1)]


def synth_word(word: str, f0: float, scale: float, rng: np.random.Generator,
               duration_s: float = 0.6) -> AudioClip:
    segments = WORD_FORMANTS[word]
    n_seg = int(duration_s * SR) // len(segments)
    f0 = f0 * rng.uniform(0.97, 1.03)
    pieces = []
    for f1, f2 in segments:
        t = np.arange(n_seg) / SR
        f1, f2 = f1 * scale, f2 * scale
        x = np.zeros(n_seg)
        for h in range(1, 25):
            freq = h * f0
            if freq > SR / 2 - 200:
                break
            amp = np.exp(-0.5 * ((freq - f1) / 160) ** 2)
            amp += 0.7 * np.exp(-0.5 * ((freq - f2) / 220) ** 2) + 0.02
            x += amp * np.sin(2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
        edge = np.minimum(1.0, np.minimum(np.arange(n_seg), n_seg - np.arange(n_seg))
                          / (0.02 * SR))
        pieces.append(x * edge)
    signal = np.concatenate(pieces)
    signal = signal / (np.abs(signal).max() + 1e-9) * 0.35
    return AudioClip(np.clip(signal, -1, 1), SR)


def synth_ambiance(rng: np.random.Generator, duration_s: float = 6.0) -> AudioClip:
    white = rng.normal(0, 1, int(duration_s * SR))
    out = lfilter([0.05], [1.0, -0.995], white)
    out = out / (np.abs(out).max() + 1e-9) * 0.25
    return AudioClip(out, SR)


def ensure_sources() -> dict:
    """Lay out user clips, negative words, and ambiance under demos/out/sources."""
    root = OUT / "sources"
    marker = root / ".done"
    layout = {
        "user": root / "user",
        "heldout": root / "heldout",
        "words_root": root / "words",
        "ambiance": root / "ambiance",
        "words": ("stop", "go"),
    }
    if marker.exists():
        return layout
    rng = np.random.default_rng(7)
    layout["user"].mkdir(parents=True, exist_ok=True)
    layout["heldout"].mkdir(parents=True, exist_ok=True)
    for i in range(12):
        f0, scale = SPEAKERS[i % 3]
        write_wav(synth_word("keyword", f0, scale, rng),
                  layout["user"] / f"user_{i:02d}.wav")
    for i in range(4):
        f0, scale = SPEAKERS[3]
        write_wav(synth_word("keyword", f0, scale, rng),
                  layout["heldout"] / f"held_{i:02d}.wav")
    for word in layout["words"]:
        word_dir = layout["words_root"] / word
        word_dir.mkdir(parents=True, exist_ok=True)
        for i in range(60):
            f0, scale = SPEAKERS[i % len(SPEAKERS)]
            write_wav(synth_word(word, f0, scale, rng), word_dir / f"{word}_{i:02d}.wav")
    layout["ambiance"].mkdir(parents=True, exist_ok=True)
    for i in range(2):
        write_wav(synth_ambiance(rng), layout["ambiance"] / f"ambiance_{i}.wav")
    marker.touch()
    return layout


def ensure_corpus():
    """Build the eight-subclass dataset once; reuse on later runs."""
    from kwspot.dataset import BuildConfig, Manifest, build_dataset, split_validation

    corpus = OUT / "corpus"
    manifest_path = corpus / "manifest.json"
    sources = ensure_sources()
    if manifest_path.exists():
        return Manifest.load(manifest_path)
    config = BuildConfig(samples_per_subclass=40, words=sources["words"],
                         holdout_fraction=0.2)
    manifest = build_dataset(sorted(sources["user"].glob("*.wav")),
                             sources["ambiance"], sources["words_root"],
                             config, master_seed=7, out_dir=corpus)
    heldout = sorted(sources["heldout"].glob("*.wav"))
    return split_validation(manifest, config.holdout_fraction, heldout)


def ensure_model() -> Path:
    """Train the reference architecture on the demo corpus and export it."""
    from kwspot.cli import main

    blob = OUT / "model" / "model.lume"
    if blob.exists():
        return blob
    manifest = ensure_corpus()
    rc = main(["train", "--manifest", str(manifest.base_dir / "manifest.json"),
               "--out-dir", str(blob.parent), "--epochs", "40", "--seed", "0"])
    if rc != 0:
        raise RuntimeError("training demo step failed")
    return blob
