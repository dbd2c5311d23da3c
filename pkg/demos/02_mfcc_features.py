"""The MFCC front-end, step by step.

Shows the mel scale, the triangular filterbank geometry, and the feature
matrix a one-second window produces, then demonstrates train-set
normalization. Saves the feature matrix under demos/out/features/.
"""

import numpy as np

from _common import OUT, SR, synth_word
from kwspot.audio import AudioClip
from kwspot.features import (
    MfccConfig,
    build_filterbank,
    compute_mfcc,
    filter_centers_mel,
    fit_feature_stats,
    mel_scale,
    mel_to_hz,
    normalize,
)


def main():
    out = OUT / "features"
    out.mkdir(parents=True, exist_ok=True)
    config = MfccConfig()  # 0.032 s frames, 0.032 s stride, 40 filters

    print("mel scale checkpoints:")
    for hz in (100, 440, 1000, 4000, 8000):
        print(f"  {hz:5d} Hz -> {mel_scale(hz):8.2f} mel")

    bank = build_filterbank(config, SR)
    centers = mel_to_hz(filter_centers_mel(config, SR))
    print(f"\nfilterbank: {bank.shape[0]} filters x {bank.shape[1]} bins; "
          f"centers {centers[0]:.0f} Hz .. {centers[-1]:.0f} Hz")
    print(f"filter 20 centered at {centers[19]:.1f} Hz")

    clip = synth_word("keyword", 150.0, 1.0, np.random.default_rng(0))
    window = AudioClip(np.concatenate([clip.samples,
                                       np.zeros(SR - len(clip))]), SR)
    feats = compute_mfcc(window, config)
    print(f"\none 1 s window -> {feats.num_frames} frames x "
          f"{feats.num_coeffs} coefficients")
    np.save(out / "keyword_mfcc.npy", feats.values)

    # coefficient 0 tracks frame log-energy; show the utterance envelope
    c0 = feats.values[:, 0]
    lo, hi = c0.min(), c0.max()
    bars = ((c0 - lo) / (hi - lo + 1e-9) * 20).astype(int)
    print("\nper-frame energy profile (coefficient 0):")
    for i, b in enumerate(bars):
        print(f"  frame {i:2d} |{'#' * b}")

    rng = np.random.default_rng(1)
    train = [compute_mfcc(AudioClip(rng.uniform(-0.3, 0.3, SR), SR), config)
             for _ in range(10)]
    stats = fit_feature_stats(train)
    normed = normalize(train[0], stats)
    print(f"\nnormalized training sample: column means ~0 "
          f"(max |mean| {np.abs(np.concatenate([normalize(t, stats).values for t in train]).mean(axis=0)).max():.2e})")
    print(f"saved feature matrix to {out / 'keyword_mfcc.npy'}")


if __name__ == "__main__":
    main()
