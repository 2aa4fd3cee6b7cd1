import numpy as np
import pytest
from scipy.io import wavfile

from adrspeech import audio
from adrspeech.errors import (EmptyStreamError, ShortRecordingError,
                              ShortRecordingWarning, SilentRecordingError,
                              UnsupportedCodecError)
from conftest import sine


def k_gain_squared(sample_rate, freq):
    """|H(f)|^2 of the K-weighting filter, evaluated directly from the
    biquad coefficients (independent of any time-domain filtering)."""
    sos = audio.k_weighting_sos(sample_rate)
    z = np.exp(-2j * np.pi * freq / sample_rate)
    h = 1.0 + 0.0j
    for b0, b1, b2, a0, a1, a2 in sos:
        h *= (b0 + b1 * z + b2 * z * z) / (a0 + a1 * z + a2 * z * z)
    return abs(h) ** 2


class TestLoadWav:
    def test_int16_scaling(self, tmp_path):
        data = np.array([16384, -16384, 0], dtype=np.int16)
        wavfile.write(tmp_path / "a.wav", 16000, np.tile(data, 100))
        rec = audio.load_wav(tmp_path / "a.wav")
        assert abs(rec.samples[0] - 0.5) <= 1.0 / 32768
        assert rec.sample_rate == 16000
        assert rec.id == "a"

    def test_stereo_downmix(self, tmp_path):
        stereo = np.tile(np.array([[0.2, 0.6]], dtype=np.float32), (100, 1))
        wavfile.write(tmp_path / "s.wav", 16000, stereo)
        rec = audio.load_wav(tmp_path / "s.wav")
        assert np.allclose(rec.samples, 0.4, atol=1e-6)

    def test_24bit(self, tmp_path):
        import struct
        samples = [0.5, -0.5, 0.25] * 50
        data = b"".join(struct.pack("<i", int(s * (2 ** 23 - 1)))[:3] for s in samples)
        hdr = b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE"
        hdr += b"fmt " + struct.pack("<I", 16)
        hdr += struct.pack("<HHIIHH", 1, 1, 16000, 16000 * 3, 3, 24)
        hdr += b"data" + struct.pack("<I", len(data))
        (tmp_path / "b.wav").write_bytes(hdr + data)
        rec = audio.load_wav(tmp_path / "b.wav")
        assert abs(rec.samples[0] - 0.5) < 1e-6

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            audio.load_wav(tmp_path / "nope.wav")

    def test_empty_data_chunk(self, tmp_path):
        wavfile.write(tmp_path / "e.wav", 16000, np.empty(0, dtype=np.int16))
        with pytest.raises(EmptyStreamError):
            audio.load_wav(tmp_path / "e.wav")

    def test_low_sample_rate_rejected(self, tmp_path):
        wavfile.write(tmp_path / "lo.wav", 8000, np.zeros(8000, dtype=np.int16))
        with pytest.raises(UnsupportedCodecError):
            audio.load_wav(tmp_path / "lo.wav")

    def test_not_a_wav(self, tmp_path):
        (tmp_path / "x.wav").write_bytes(b"definitely not RIFF data")
        with pytest.raises(UnsupportedCodecError):
            audio.load_wav(tmp_path / "x.wav")


class TestMeasureLoudness:
    def test_997_sine_analytic(self):
        # full-scale sine: mean square 0.5 scaled by the K-filter response
        sr = 48000
        rec = audio.Recording("sine997", sine(997, 5.0, sr=sr), sr)
        got = audio.measure_loudness(rec).integrated_loudness
        expected = -0.691 + 10 * np.log10(0.5 * k_gain_squared(sr, 997.0))
        assert abs(got - expected) < 0.1
        assert abs(got - (-3.01)) < 0.1

    def test_silence_sentinel(self):
        rec = audio.Recording("sil", np.zeros(5 * 16000), 16000)
        rep = audio.measure_loudness(rec)
        assert rep.integrated_loudness == -np.inf
        assert rep.gating_block_count == 0

    def test_gain_linearity(self):
        sr = 16000
        base = sine(997, 5.0, sr=sr)
        l_full = audio.measure_loudness(audio.Recording("a", base, sr)).integrated_loudness
        l_att = audio.measure_loudness(
            audio.Recording("b", base * 10 ** (-20 / 20), sr)).integrated_loudness
        assert abs((l_full - l_att) - 20.0) < 1e-6

    def test_too_short(self):
        rec = audio.Recording("tiny", np.ones(100), 16000)
        with pytest.raises(ShortRecordingError):
            audio.measure_loudness(rec)

    def test_gain_equivariance_random(self):
        rng = np.random.default_rng(3)
        sr = 16000
        for _ in range(5):
            x = rng.normal(0, 0.2, 2 * sr)
            g_db = rng.uniform(-30, -5)
            l0 = audio.measure_loudness(audio.Recording("x", x, sr)).integrated_loudness
            l1 = audio.measure_loudness(
                audio.Recording("y", x * 10 ** (g_db / 20), sr)).integrated_loudness
            assert abs((l1 - l0) - g_db) < 0.05


class TestNormalizeLoudness:
    def test_loop_property_random(self):
        rng = np.random.default_rng(11)
        sr = 16000
        for _ in range(10):
            x = rng.normal(0, rng.uniform(0.01, 0.3), int(rng.uniform(1.0, 3.0) * sr))
            out, rep = audio.normalize_loudness(audio.Recording("r", x, sr), -23.0)
            measured = audio.measure_loudness(out).integrated_loudness
            assert abs(measured - (-23.0)) < 0.5
            assert np.abs(out.samples).max() <= 1.0
            assert rep.target == -23.0

    def test_identity_when_at_target(self):
        sr = 16000
        x = sine(440, 2.0, sr=sr, amp=0.1)
        measured = audio.measure_loudness(audio.Recording("x", x, sr)).integrated_loudness
        out, rep = audio.normalize_loudness(audio.Recording("x", x, sr), measured)
        assert rep.applied_gain == 0.0
        assert out.samples.tobytes() == x.tobytes()

    def test_gain_sign(self):
        sr = 16000
        quiet = sine(440, 2.0, sr=sr, amp=0.01)
        _, rep = audio.normalize_loudness(audio.Recording("q", quiet, sr), -23.0)
        loud = sine(440, 2.0, sr=sr, amp=0.9)
        out, rep2 = audio.normalize_loudness(audio.Recording("l", loud, sr), -23.0)
        assert rep.applied_gain > 0
        assert rep2.applied_gain < -15
        assert rep2.clipped_samples == 0

    def test_silent_refused(self):
        with pytest.raises(SilentRecordingError, match="sil"):
            audio.normalize_loudness(audio.Recording("sil", np.zeros(16000 * 2), 16000))

    def test_clipping_counted(self):
        sr = 16000
        x = sine(440, 2.0, sr=sr, amp=0.9)
        out, rep = audio.normalize_loudness(audio.Recording("c", x, sr), -1.0)
        assert rep.clipped_samples > 0
        assert np.abs(out.samples).max() == 1.0


class TestFraming:
    def test_floor_rule(self):
        sr = 16000
        rec = audio.Recording("r", np.arange(int(10.7 * sr)) * 1e-9, sr)
        frames = audio.frame_1s(rec)
        assert len(frames) == 10
        assert all(len(f.samples) == sr for f in frames)
        assert [f.index for f in frames] == list(range(10))

    def test_exact_multiple(self):
        sr = 16000
        assert len(audio.frame_1s(audio.Recording("r", np.zeros(3 * sr), sr))) == 3

    def test_short_recording_warns(self):
        sr = 16000
        rec = audio.Recording("short", np.zeros(int(0.9 * sr)), sr)
        with pytest.warns(ShortRecordingWarning):
            frames = audio.frame_1s(rec)
        assert frames == []

    def test_concatenation_reproduces_source(self):
        rng = np.random.default_rng(5)
        sr = 16000
        x = rng.normal(0, 0.1, int(3.6 * sr))
        frames = audio.frame_1s(audio.Recording("r", x, sr))
        rebuilt = np.concatenate([f.samples for f in frames])
        assert np.array_equal(rebuilt, x[:3 * sr])
