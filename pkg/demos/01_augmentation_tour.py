"""Tour of the seeded augmentation transforms.

Takes one synthetic keyword utterance and walks it through every
transform family, printing the measurable effect of each (durations, DFT
peaks, RMS levels, SNR) and saving the audio under demos/out/augment/.
"""

import numpy as np

from _common import OUT, ensure_sources, synth_word
from kwspot.audio import read_wav, rms, write_wav
from kwspot.augment import (
    AugmentFamily,
    AugmentRanges,
    apply_gain,
    augment_clip,
    mix_ambiance,
    pitch_shift,
    sample_augment_spec,
    time_shift,
    time_stretch,
)


def peak_hz(clip):
    spec = np.abs(np.fft.rfft(clip.samples * np.hanning(len(clip))))
    return np.argmax(spec) * clip.sample_rate / len(clip)


def main():
    out = OUT / "augment"
    out.mkdir(parents=True, exist_ok=True)
    sources = ensure_sources()
    clip = synth_word("keyword", 150.0, 1.0, np.random.default_rng(0))
    write_wav(clip, out / "original.wav")
    print(f"original: {len(clip)} samples, rms {rms(clip):.4f}, "
          f"peak {peak_hz(clip):.0f} Hz")

    up = pitch_shift(clip, +4)
    down = pitch_shift(clip, -4)
    print(f"pitch +4 st: peak {peak_hz(up):.0f} Hz (x{2**(4/12):.3f} expected)")
    print(f"pitch -4 st: peak {peak_hz(down):.0f} Hz (x{2**(-4/12):.3f} expected)")
    write_wav(up, out / "pitch_up.wav")
    write_wav(down, out / "pitch_down.wav")

    slow = time_stretch(clip, 0.85)
    fast = time_stretch(clip, 1.15)
    print(f"stretch 0.85: {len(clip)} -> {len(slow)} samples, "
          f"peak still {peak_hz(slow):.0f} Hz")
    print(f"stretch 1.15: {len(clip)} -> {len(fast)} samples")
    write_wav(slow, out / "slower.wav")
    write_wav(fast, out / "faster.wav")

    quieter = apply_gain(clip, -6.0)
    print(f"gain -6 dB: rms {rms(clip):.4f} -> {rms(quieter):.4f}")

    shifted = time_shift(clip, 0.25, 1.0)
    print(f"time shift +0.25 s inside a 1 s window: {len(shifted)} samples out")
    write_wav(shifted, out / "shifted.wav")

    ambiance = read_wav(sorted(sources["ambiance"].glob("*.wav"))[0])
    noisy = mix_ambiance(time_shift(clip, 0.0, 1.0), ambiance, snr_db=10.0,
                         rng=np.random.default_rng(1))
    measured = 20 * np.log10(rms(clip) / rms(noisy.with_samples(
        noisy.samples - time_shift(clip, 0.0, 1.0).samples)))
    print(f"ambiance mix at 10 dB SNR: measured {measured:.2f} dB")
    write_wav(noisy, out / "with_ambiance.wav")

    # one fully sampled recipe per family, reproducible under its seed
    ranges = AugmentRanges()
    amb_map = {p.name: read_wav(p) for p in sorted(sources["ambiance"].glob("*.wav"))}
    for family in AugmentFamily:
        rng = np.random.default_rng(42)
        spec = sample_augment_spec(rng, ranges, family, sorted(amb_map))
        result = augment_clip(clip, spec, 1.0, amb_map)
        write_wav(result, out / f"family_{family.value}.wav")
        print(f"family {family.value:8s}: pitch {spec.pitch_semitones:+.2f} st, "
              f"speed x{spec.speed_factor:.3f}, gain {spec.gain_db:+.2f} dB, "
              f"shift {spec.time_shift_s:+.3f} s, "
              f"ambiance {spec.ambiance_id or '-'}")
    print(f"\nwrote clips to {out}")


if __name__ == "__main__":
    main()
