"""Seeded augmentation transforms and their spectral/energy laws."""

import numpy as np
import pytest

from kwspot.audio import AudioClip, rms
from kwspot.augment import (
    AugmentFamily,
    AugmentRanges,
    AugmentSpec,
    apply_gain,
    augment_clip,
    mix_ambiance,
    pitch_shift,
    sample_augment_spec,
    time_shift,
    time_stretch,
)

from util import burst, dft_peak_hz, tone

SR = 16_000


class TestPitchShift:
    def test_identity(self):
        clip = tone(440)
        out = pitch_shift(clip, 0)
        assert len(out) == len(clip)
        assert abs(dft_peak_hz(out.samples, SR) - 440) <= 1.0

    @pytest.mark.parametrize("semitones,target", [(12, 880.0), (-12, 220.0),
                                                  (4, 440 * 2 ** (4 / 12)),
                                                  (-4, 440 * 2 ** (-4 / 12))])
    def test_peak_scales(self, semitones, target):
        out = pitch_shift(tone(440), semitones)
        assert len(out) == SR  # duration preserved exactly
        bin_hz = SR / len(out)
        assert abs(dft_peak_hz(out.samples, SR) - target) <= bin_hz

    def test_rejects_extreme_shift(self):
        with pytest.raises(ValueError, match="24"):
            pitch_shift(tone(440), 25)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            pitch_shift(AudioClip(np.zeros(0), SR), 1)


class TestTimeStretch:
    def test_identity_factor(self):
        clip = tone(440)
        out = time_stretch(clip, 1.0)
        assert len(out) == len(clip)
        corr = np.corrcoef(out.samples, clip.samples)[0, 1]
        assert corr >= 0.99

    def test_half_speed_duration(self):
        out = time_stretch(tone(440, 1.0), 0.5)
        assert abs(len(out) - 32000) <= 0.015 * SR

    def test_faster_keeps_pitch(self):
        out = time_stretch(tone(440, 1.0), 1.15)
        assert len(out) == round(SR / 1.15)
        bin_hz = SR / len(out)
        peak = dft_peak_hz(out.samples, SR)
        assert abs(peak - 440) <= bin_hz
        assert abs(peak - 440) / 440 < 0.03

    def test_rejects_out_of_range(self):
        for factor in (0.49, 2.01, -1.0):
            with pytest.raises(ValueError):
                time_stretch(tone(440), factor)


class TestApplyGain:
    def test_zero_db_identity(self):
        clip = tone(440, amplitude=0.3)
        out = apply_gain(clip, 0.0)
        assert np.array_equal(out.samples, clip.samples)

    def test_doubling_gain(self):
        clip = tone(440, amplitude=0.1414)  # rms ~0.1
        out = apply_gain(clip, 6.0206)
        assert abs(rms(out) - 2 * rms(clip)) < 1e-6

    def test_clamp_at_full_scale(self):
        out = apply_gain(tone(440, amplitude=1.0), 40.0)
        assert np.abs(out.samples).max() == 1.0


class TestTimeShift:
    def test_zero_offset_keeps_position(self):
        clip = burst(0.25, 0.5)
        out = time_shift(clip, 0.0, 1.0)
        assert len(out) == SR
        assert np.array_equal(out.samples[: len(clip)], clip.samples)

    def test_shift_moves_and_conserves_energy(self):
        clip = burst(0.1, 0.3)
        out = time_shift(clip, 0.2, 1.0)
        active = np.flatnonzero(np.abs(out.samples) > 0.001)
        assert abs(active[0] - 0.3 * SR) <= 2
        assert abs(np.abs(out.samples).sum() - np.abs(clip.samples).sum()) < 1e-9

    def test_shift_out_of_window_rejected(self):
        clip = burst(0.1, 0.3)
        with pytest.raises(ValueError, match="outside"):
            time_shift(clip, 0.9, 1.0)

    def test_clip_longer_than_window_rejected(self):
        with pytest.raises(ValueError, match="longer"):
            time_shift(tone(440, 1.5), 0.0, 1.0)


class TestMixAmbiance:
    def _ambiance(self, seed=0, duration=2.0, amp=0.2):
        rng = np.random.default_rng(seed)
        return AudioClip(rng.uniform(-amp, amp, int(duration * SR)), SR)

    def test_high_snr_near_clean(self):
        clip = tone(440, amplitude=0.4)
        out = mix_ambiance(clip, self._ambiance(), 60.0)
        assert np.abs(out.samples - clip.samples).max() < 0.002

    def test_snr_sets_noise_rms(self):
        clip = tone(440, amplitude=0.2 * np.sqrt(2))  # rms 0.2
        rng = np.random.default_rng(7)
        out = mix_ambiance(clip, self._ambiance(), 10.0, rng)
        noise = out.samples - clip.samples  # no clamping at these levels
        assert abs(rms(AudioClip(noise, SR)) - 0.2 / 10 ** 0.5) < 1e-6

    def test_measured_snr_matches_requested(self):
        clip = tone(300, amplitude=0.3)
        for snr in (5.0, 12.5, 20.0):
            out = mix_ambiance(clip, self._ambiance(3), snr)
            noise = out.samples - clip.samples
            measured = 20 * np.log10(rms(clip) / rms(AudioClip(noise, SR)))
            assert abs(measured - snr) < 0.1

    def test_silent_clip_rejected(self):
        with pytest.raises(ValueError, match="undefined SNR"):
            mix_ambiance(AudioClip(np.zeros(SR), SR), self._ambiance(), 10.0)

    def test_rate_mismatch_rejected(self):
        amb = AudioClip(np.ones(SR), 8000)
        with pytest.raises(ValueError, match="sample-rate"):
            mix_ambiance(tone(440), amb, 10.0)

    def test_short_ambiance_rejected(self):
        amb = AudioClip(np.ones(100) * 0.1, SR)
        with pytest.raises(ValueError, match="shorter"):
            mix_ambiance(tone(440), amb, 10.0)

    def test_deterministic_under_rng(self):
        clip = tone(440, amplitude=0.3)
        a = mix_ambiance(clip, self._ambiance(), 10.0, np.random.default_rng(5))
        b = mix_ambiance(clip, self._ambiance(), 10.0, np.random.default_rng(5))
        assert np.array_equal(a.samples, b.samples)


class TestSampleAugmentSpec:
    def test_neither_family_still_varies_speed_gain_shift(self):
        rng = np.random.default_rng(1)
        spec = sample_augment_spec(rng, AugmentRanges(), AugmentFamily.NEITHER)
        assert spec.pitch_semitones == 0.0
        assert spec.ambiance_id is None and spec.snr_db is None
        assert spec.speed_factor != 1.0
        assert spec.gain_db != 0.0
        assert spec.time_shift_s != 0.0

    def test_both_family_populates_everything(self):
        rng = np.random.default_rng(2)
        spec = sample_augment_spec(rng, AugmentRanges(), AugmentFamily.BOTH,
                                   ambiance_ids=["amb_a.wav", "amb_b.wav"])
        assert spec.pitch_semitones != 0.0
        assert spec.ambiance_id in ("amb_a.wav", "amb_b.wav")
        assert 5.0 <= spec.snr_db <= 20.0

    def test_ambiance_family_needs_ids(self):
        with pytest.raises(ValueError, match="ambiance_ids"):
            sample_augment_spec(np.random.default_rng(0), AugmentRanges(),
                                AugmentFamily.AMBIANCE)

    def test_same_seed_same_spec(self):
        ranges = AugmentRanges()
        a = sample_augment_spec(np.random.default_rng(9), ranges, AugmentFamily.PITCH)
        b = sample_augment_spec(np.random.default_rng(9), ranges, AugmentFamily.PITCH)
        assert a == b

    def test_draws_respect_ranges(self):
        ranges = AugmentRanges()
        rng = np.random.default_rng(0)
        for _ in range(50):
            spec = sample_augment_spec(rng, ranges, AugmentFamily.PITCH)
            assert -4 <= spec.pitch_semitones <= 4
            assert 0.85 <= spec.speed_factor <= 1.15
            assert -6 <= spec.gain_db <= 6
            assert -0.5 <= spec.time_shift_s <= 0.5


class TestAugmentSpecType:
    def test_snr_requires_ambiance(self):
        with pytest.raises(ValueError):
            AugmentSpec(snr_db=10.0)
        with pytest.raises(ValueError):
            AugmentSpec(ambiance_id="a.wav")

    def test_speed_positive(self):
        with pytest.raises(ValueError):
            AugmentSpec(speed_factor=0.0)

    def test_dict_round_trip(self):
        spec = AugmentSpec(pitch_semitones=2.0, speed_factor=1.1, gain_db=-3.0,
                           time_shift_s=0.1, ambiance_id="a.wav", snr_db=12.0, seed=42)
        assert AugmentSpec.from_dict(spec.to_dict()) == spec


class TestAugmentClip:
    def test_identity_spec_high_correlation(self):
        clip = tone(440, 1.0)
        spec = AugmentSpec()
        out = augment_clip(clip, spec, 1.0)
        assert len(out) == SR
        assert np.corrcoef(out.samples, clip.samples)[0, 1] >= 0.99

    def test_gain_only_spec(self):
        clip = tone(440, 1.0, amplitude=0.4)
        spec = AugmentSpec(gain_db=-6.0206)
        out = augment_clip(clip, spec, 1.0)
        assert abs(rms(out) - rms(clip) / 2) < 1e-6

    def test_bit_identical_reruns(self):
        clip = tone(350, 0.7, amplitude=0.3)
        amb = {"a.wav": AudioClip(np.random.default_rng(1).uniform(-0.2, 0.2, 2 * SR), SR)}
        spec = AugmentSpec(pitch_semitones=2.5, speed_factor=0.9, gain_db=3.0,
                           time_shift_s=0.15, ambiance_id="a.wav", snr_db=8.0, seed=77)
        a = augment_clip(clip, spec, 1.0, amb)
        b = augment_clip(clip, spec, 1.0, amb)
        assert np.array_equal(a.samples, b.samples)

    def test_duration_law(self):
        rng = np.random.default_rng(4)
        ranges = AugmentRanges()
        clip = tone(500, 0.8, amplitude=0.3)
        for window_s in (1.0, 1.5):
            for _ in range(5):
                spec = sample_augment_spec(rng, ranges, AugmentFamily.PITCH)
                out = augment_clip(clip, spec, window_s)
                assert len(out) == round(window_s * SR)

    def test_long_input_cropped_to_window(self):
        clip = tone(440, 1.3, amplitude=0.3)
        out = augment_clip(clip, AugmentSpec(speed_factor=0.85), 1.0)
        assert len(out) == SR

    def test_unknown_ambiance_id(self):
        spec = AugmentSpec(ambiance_id="missing.wav", snr_db=10.0)
        with pytest.raises(ValueError, match="missing.wav"):
            augment_clip(tone(440), spec, 1.0, ambiances={})
