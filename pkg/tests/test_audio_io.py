import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speech_augment.audio_io import (
    AudioClip,
    UnsupportedEncodingError,
    WavHeaderError,
    load_wav,
    resample,
    save_wav,
    save_wav_float32,
    to_canonical,
)

RATE = 16000


def write_pcm16(path, data, rate=RATE, channels=1):
    pcm = np.asarray(data).astype("<i2").tobytes()
    header = b"".join([
        b"RIFF", struct.pack("<I", 36 + len(pcm)), b"WAVE",
        b"fmt ", struct.pack("<IHHIIHH", 16, 1, channels, rate,
                             rate * 2 * channels, 2 * channels, 16),
        b"data", struct.pack("<I", len(pcm)),
    ])
    path.write_bytes(header + pcm)


class TestLoadWav:
    def test_silence(self, tmp_path):
        p = tmp_path / "sil.wav"
        write_pcm16(p, np.zeros(RATE, dtype=np.int16))
        clip = load_wav(p)
        assert len(clip.samples) == RATE
        assert clip.sample_rate == RATE
        assert np.all(clip.samples == 0.0)

    def test_stereo_mixdown_cancels(self, tmp_path):
        p = tmp_path / "st.wav"
        left = np.full(1000, 16384, dtype=np.int16)
        right = np.full(1000, -16384, dtype=np.int16)
        interleaved = np.empty(2000, dtype=np.int16)
        interleaved[0::2] = left
        interleaved[1::2] = right
        write_pcm16(p, interleaved, channels=2)
        clip = load_wav(p)
        assert len(clip.samples) == 1000
        assert np.all(clip.samples == 0.0)

    def test_full_scale_square_wave(self, tmp_path):
        p = tmp_path / "sq.wav"
        sq = np.tile(np.array([32767, -32768], dtype=np.int16), 100)
        write_pcm16(p, sq)
        clip = load_wav(p)
        # oracle: direct integer-to-float scaling by 32768
        assert np.array_equal(clip.samples, sq.astype(np.float64) / 32768.0)
        assert np.max(np.abs(clip.samples)) <= 1.0
        assert np.max(np.abs(clip.samples)) >= 0.999

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_wav(tmp_path / "nope.wav")

    def test_malformed_header(self, tmp_path):
        p = tmp_path / "bad.wav"
        p.write_bytes(b"NOTAWAVEFILE" * 4)
        with pytest.raises(WavHeaderError):
            load_wav(p)

    def test_unsupported_encoding(self, tmp_path):
        p = tmp_path / "ulaw.wav"
        payload = b"\0" * 64
        header = b"".join([
            b"RIFF", struct.pack("<I", 36 + len(payload)), b"WAVE",
            b"fmt ", struct.pack("<IHHIIHH", 16, 7, 1, 8000, 8000, 1, 8),
            b"data", struct.pack("<I", len(payload)),
        ])
        p.write_bytes(header + payload)
        with pytest.raises(UnsupportedEncodingError):
            load_wav(p)

    def test_float32_roundtrip(self, tmp_path):
        p = tmp_path / "f32.wav"
        x = np.sin(np.linspace(0, 20, 500)) * 0.7
        save_wav_float32(AudioClip(x, RATE), p)
        clip = load_wav(p)
        assert np.allclose(clip.samples, x, atol=1e-7)


class TestSaveWav:
    def test_quantization_roundtrip(self, tmp_path):
        t = np.arange(RATE) / RATE
        x = 0.25 * np.sin(2 * np.pi * 440 * t)
        p = tmp_path / "sine.wav"
        clipped = save_wav(AudioClip(x, RATE), p)
        assert clipped == 0
        back = load_wav(p)
        assert np.max(np.abs(back.samples - x)) <= 1.0 / 32768.0

    def test_clipping_counted(self, tmp_path):
        x = np.array([0.0, 1.5, -0.2])
        p = tmp_path / "clip.wav"
        clipped = save_wav(AudioClip(x, RATE), p)
        assert clipped == 1
        back = load_wav(p)
        assert back.samples[1] == 32767.0 / 32768.0

    def test_empty_clip_rejected(self, tmp_path):
        p = tmp_path / "empty.wav"
        with pytest.raises(ValueError):
            save_wav(AudioClip(np.zeros(0), RATE), p)
        assert not p.exists()

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(min_value=-1.0, max_value=1.0), min_size=1, max_size=400))
    def test_roundtrip_property(self, tmp_path_factory, values):
        p = tmp_path_factory.mktemp("rt") / "x.wav"
        x = np.asarray(values)
        save_wav(AudioClip(x, RATE), p)
        back = load_wav(p)
        assert np.max(np.abs(back.samples - x)) <= 1.0 / 32768.0


class TestResample:
    def test_identity_passthrough(self):
        x = np.random.default_rng(0).standard_normal(1000) * 0.1
        out = resample(AudioClip(x, RATE), RATE)
        assert np.array_equal(out.samples, x)

    def test_length_48k_to_16k(self):
        out = resample(AudioClip(np.zeros(48000), 48000), 16000)
        assert abs(len(out.samples) - 16000) <= 1

    def test_tone_peak_preserved(self):
        t = np.arange(48000) / 48000.0
        x = 0.5 * np.sin(2 * np.pi * 1000 * t)
        out = resample(AudioClip(x, 48000), 16000)
        spec = np.abs(np.fft.rfft(out.samples))
        peak_hz = np.argmax(spec) * 16000.0 / len(out.samples)
        bin_hz = 16000.0 / len(out.samples)
        assert abs(peak_hz - 1000.0) <= bin_hz

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            resample(AudioClip(np.zeros(10), RATE), 0)

    def test_stopband_attenuation(self):
        t = np.arange(48000) / 48000.0
        x = 0.5 * np.sin(2 * np.pi * 10000 * t) * np.hanning(48000)
        out = resample(AudioClip(x, 48000), 16000)
        att = np.sqrt(np.mean(out.samples**2)) / np.sqrt(np.mean(x**2))
        assert 20 * np.log10(att) <= -60.0

    def test_up_down_snr(self):
        from scipy.signal import firwin

        rng = np.random.default_rng(1)
        x = np.convolve(rng.standard_normal(RATE) * 0.3, firwin(401, 6500 / 8000.0), "same")
        down = resample(resample(AudioClip(x, RATE), 48000), RATE)
        n = min(len(down.samples), len(x))
        err = down.samples[:n] - x[:n]
        snr = 10 * np.log10(np.sum(x[:n] ** 2) / np.sum(err**2))
        assert snr >= 40.0

    def test_to_canonical(self):
        out = to_canonical(AudioClip(np.zeros(44100), 44100))
        assert out.sample_rate == 16000
        assert abs(len(out.samples) - 16000) <= 1
