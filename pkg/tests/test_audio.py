"""WAV I/O, resampling, and RMS."""

import struct

import numpy as np
import pytest

from kwspot.audio import (
    AudioClip,
    UnsupportedWavError,
    WavHeaderError,
    encode_pcm16,
    read_wav,
    resample,
    rms,
    write_wav,
)
from kwspot.augment import apply_gain

from util import dft_peak_hz, tone, write_raw_wav


class TestAudioClip:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            AudioClip(np.array([0.0, np.nan]), 16000)

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            AudioClip(np.zeros(4), 0)

    def test_duration_exact_rational(self):
        clip = AudioClip(np.zeros(24000), 16000)
        assert clip.duration_seconds == 1.5

    def test_samples_immutable(self):
        clip = AudioClip(np.zeros(4), 16000)
        with pytest.raises(ValueError):
            clip.samples[0] = 1.0


class TestReadWav:
    def test_zero_signal(self, tmp_path):
        path = tmp_path / "z.wav"
        write_wav(AudioClip(np.zeros(16000), 16000), path)
        clip = read_wav(path)
        assert len(clip) == 16000
        assert clip.sample_rate == 16000
        assert np.all(clip.samples == 0.0)

    def test_int16_mapping(self, tmp_path):
        path = tmp_path / "m.wav"
        payload = struct.pack("<2h", -32768, 32767)
        write_raw_wav(path, 1, 1, 16000, 16, payload)
        clip = read_wav(path)
        assert clip.samples[0] == -1.0
        assert clip.samples[1] == 0.999969482421875  # 32767/32768 exactly

    def test_stereo_averaged(self, tmp_path):
        path = tmp_path / "s.wav"
        frames = struct.pack("<2h", 16384, -16384) * 100  # (+0.5, -0.5)
        write_raw_wav(path, 1, 2, 16000, 16, frames)
        clip = read_wav(path)
        assert len(clip) == 100
        assert np.all(clip.samples == 0.0)

    def test_float32_input(self, tmp_path):
        path = tmp_path / "f.wav"
        values = np.array([0.25, -0.75, 1.0], dtype="<f4")
        write_raw_wav(path, 3, 1, 8000, 32, values.tobytes())
        clip = read_wav(path)
        assert clip.sample_rate == 8000
        np.testing.assert_allclose(clip.samples, [0.25, -0.75, 1.0])

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_wav(tmp_path / "nope.wav")

    def test_not_riff(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(b"OggS" + b"\x00" * 40)
        with pytest.raises(WavHeaderError, match="RIFF"):
            read_wav(path)

    def test_missing_fmt_chunk(self, tmp_path):
        path = tmp_path / "nofmt.wav"
        path.write_bytes(b"RIFF" + struct.pack("<I", 4) + b"WAVE")
        with pytest.raises(WavHeaderError, match="fmt"):
            read_wav(path)

    def test_unsupported_codec(self, tmp_path):
        path = tmp_path / "ulaw.wav"
        write_raw_wav(path, 7, 1, 8000, 8, b"\x00" * 16)
        with pytest.raises(UnsupportedWavError, match="audio_format=7"):
            read_wav(path)

    def test_unsupported_bit_depth(self, tmp_path):
        path = tmp_path / "pcm8.wav"
        write_raw_wav(path, 1, 1, 8000, 8, b"\x00" * 16)
        with pytest.raises(UnsupportedWavError, match="bits_per_sample=8"):
            read_wav(path)

    def test_too_many_channels(self, tmp_path):
        path = tmp_path / "quad.wav"
        write_raw_wav(path, 1, 4, 8000, 16, b"\x00" * 32)
        with pytest.raises(UnsupportedWavError, match="channels=4"):
            read_wav(path)


class TestWriteWav:
    def test_sine_round_trip_error_bound(self, tmp_path):
        clip = tone(440, 1.0, 16000, amplitude=1.0)
        path = tmp_path / "sine.wav"
        write_wav(clip, path)
        back = read_wav(path)
        assert len(back) == len(clip)
        assert np.abs(back.samples - clip.samples).max() <= 1 / 32768

    def test_random_round_trip_error_bound(self, tmp_path):
        rng = np.random.default_rng(0)
        clip = AudioClip(rng.uniform(-1, 1, 20000), 16000)
        path = tmp_path / "r.wav"
        write_wav(clip, path)
        back = read_wav(path)
        assert np.abs(back.samples - clip.samples).max() <= 1 / 32768

    def test_zero_clip_zero_words(self, tmp_path):
        path = tmp_path / "z.wav"
        write_wav(AudioClip(np.zeros(64), 16000), path)
        blob = path.read_bytes()
        data_at = blob.index(b"data")
        assert blob[data_at + 8 :] == b"\x00" * 128

    def test_out_of_range_clamps_to_full_scale(self):
        assert encode_pcm16(np.array([2.0]))[0] == 32767
        assert encode_pcm16(np.array([-2.0]))[0] == -32768

    def test_unwritable_path(self, trained=None):
        with pytest.raises(OSError):
            write_wav(AudioClip(np.zeros(4), 16000), "/nonexistent_dir/x.wav")


class TestResample:
    def test_identity_at_equal_rate(self):
        clip = tone(440, 1.0, 16000)
        out = resample(clip, 16000)
        assert out.sample_rate == 16000
        assert np.array_equal(out.samples, clip.samples)

    def test_constant_preserved(self):
        clip = AudioClip(np.full(8000, 0.25), 8000)
        out = resample(clip, 16000)
        assert len(out) == 16000
        assert np.all(out.samples == 0.25)

    def test_sine_peak_survives_downsample(self):
        clip = tone(440, 1.0, 48000)
        out = resample(clip, 16000)
        assert len(out) == 16000
        assert abs(dft_peak_hz(out.samples, 16000) - 440) <= 1.0

    def test_output_length_rounds(self):
        clip = AudioClip(np.zeros(999), 16000)
        assert len(resample(clip, 8000)) == round(999 * 8000 / 16000)

    def test_bad_rate(self):
        with pytest.raises(ValueError):
            resample(tone(440), 0)


class TestRms:
    def test_zero(self):
        assert rms(AudioClip(np.zeros(100), 16000)) == 0.0

    def test_square_wave(self):
        x = np.ones(1000)
        x[::2] = -1.0
        assert rms(AudioClip(x, 16000)) == 1.0

    def test_unit_sine(self):
        clip = tone(400, 1.0, 16000, amplitude=1.0)  # whole number of periods
        assert abs(rms(clip) - 1 / np.sqrt(2)) < 1e-6

    def test_empty_clip(self):
        with pytest.raises(ValueError):
            rms(AudioClip(np.zeros(0), 16000))

    def test_gain_law_cross_module(self):
        clip = tone(300, 0.5, 16000, amplitude=0.3)
        base = rms(clip)
        for gain_db in (-6, -2.5, 0, 2.5, 6):
            got = rms(apply_gain(clip, gain_db))
            want = base * 10 ** (gain_db / 20)
            assert abs(got - want) / want < 1e-9
