import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import sawtooth

from speech_augment.audio_io import AudioClip
from speech_augment.spectral import (
    BadMagicError,
    DimensionError,
    FeatureMatrix,
    PitchTrack,
    TruncatedPayloadError,
    estimate_f0,
    extract_features,
    istft,
    read_features,
    spectral_envelope,
    stft,
    synthesize_from_features,
    write_features,
)
from synth import RATE, make_vowel


class TestStft:
    def test_zero_signal_zero_frames(self):
        gram = stft(AudioClip(np.zeros(4000), RATE), 1024, 256)
        assert np.all(gram.frames == 0)

    def test_sine_peak_bin(self):
        t = np.arange(RATE) / RATE
        clip = AudioClip(0.5 * np.sin(2 * np.pi * 1000 * t), RATE)
        gram = stft(clip, 1024, 256)
        mags = np.abs(gram.frames)
        # interior frames peak at bin f * fft / rate = 64
        for k in range(2, gram.frame_count - 2):
            assert np.argmax(mags[k]) == 64

    def test_roundtrip_white_noise(self):
        x = np.random.default_rng(0).standard_normal(RATE) * 0.3
        rec = istft(stft(AudioClip(x, RATE), 1024, 256))
        assert len(rec) == len(x)
        assert np.sqrt(np.mean((rec - x) ** 2)) <= 1e-6

    def test_frame_count_formula(self):
        clip = AudioClip(np.zeros(5000), RATE)
        gram = stft(clip, 1024, 256)
        padded = 5000 + 2 * (1024 // 2)
        assert gram.frame_count == 1 + (padded - 1024) // 256

    def test_short_clip_rejected(self):
        with pytest.raises(ValueError):
            stft(AudioClip(np.zeros(100), RATE), 1024, 256)

    def test_non_power_of_two_rejected(self):
        with pytest.raises(ValueError):
            stft(AudioClip(np.zeros(4000), RATE), 1000, 256)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=2000, max_value=9000), st.sampled_from([128, 256, 512]))
    def test_roundtrip_property(self, n, hop):
        x = np.random.default_rng(n).standard_normal(n) * 0.2
        rec = istft(stft(AudioClip(x, RATE), 1024, hop))
        assert np.sqrt(np.mean((rec - x) ** 2)) <= 1e-6


class TestEstimateF0:
    def test_sawtooth_200hz(self):
        x = 0.5 * sawtooth(2 * np.pi * 200 * np.arange(RATE) / RATE)
        track = estimate_f0(AudioClip(x, RATE))
        assert abs(track.median_voiced_f0() - 200.0) <= 2.0

    def test_white_noise_mostly_unvoiced(self):
        x = np.random.default_rng(7).standard_normal(RATE) * 0.3
        track = estimate_f0(AudioClip(x, RATE))
        assert np.mean(~track.voicing) >= 0.9

    def test_silence_all_unvoiced(self):
        track = estimate_f0(AudioClip(np.zeros(RATE), RATE))
        assert not track.voicing.any()
        assert np.all(track.f0 == 0.0)

    def test_scale_invariance(self):
        clip = make_vowel(220.0)
        a = estimate_f0(clip)
        b = estimate_f0(AudioClip(clip.samples * 0.5, RATE))
        both = a.voicing & b.voicing
        assert both.any()
        assert np.max(np.abs(a.f0[both] - b.f0[both])) <= 1.0

    def test_voiced_range_invariant(self):
        track = estimate_f0(make_vowel(300.0))
        voiced = track.f0[track.voicing]
        assert np.all((voiced >= 50.0) & (voiced <= 600.0))

    def test_zero_iff_unvoiced(self):
        with pytest.raises(ValueError):
            PitchTrack(np.array([100.0, 0.0]), 0.005, np.array([False, False]))


class TestSpectralEnvelope:
    def test_flat_spectrum_flat_envelope(self):
        env = spectral_envelope(np.full(513, 2.0))
        assert np.max(np.abs(env - 2.0)) / 2.0 <= 0.01

    def test_all_zero_frame(self):
        env = spectral_envelope(np.zeros(513))
        assert np.all(env == 0.0)

    def test_envelope_non_negative(self):
        rng = np.random.default_rng(0)
        env = spectral_envelope(np.abs(rng.standard_normal(513)))
        assert np.all(env >= 0.0)

    def test_harmonic_spectrum_formant_peak(self):
        # line spectrum: harmonics of 200 Hz weighted by a formant at 1200 Hz
        nfft = 1024
        freqs = np.fft.rfftfreq(nfft, 1.0 / RATE)
        mags = np.zeros(len(freqs))
        for k in range(1, 38):
            b = int(round(k * 200.0 * nfft / RATE))
            mags[b] = np.exp(-0.5 * ((k * 200.0 - 1200.0) / 300.0) ** 2) + 1e-3
        env = spectral_envelope(mags)
        band = (freqs > 400) & (freqs < 4000)
        peak_bin = np.where(band)[0][np.argmax(env[band])]
        expect_bin = 1200.0 * nfft / RATE
        assert abs(peak_bin - expect_bin) <= 2.0

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            spectral_envelope(np.full(513, -1.0))


class TestExtractFeatures:
    def test_frame_count_one_second(self):
        feats, track = extract_features(make_vowel())
        assert feats.frame_count == 196
        assert track.frame_count == 196
        assert feats.dim == 25

    def test_silence_energy_floor(self):
        feats, track = extract_features(AudioClip(np.zeros(RATE), RATE))
        log_floor_c0 = np.sqrt(26) * np.log(1e-10)
        assert np.allclose(feats.frames[:, 0], log_floor_c0, rtol=1e-6)
        assert np.max(np.abs(feats.frames[:, 1:])) <= 1e-9
        assert not track.voicing.any()

    def test_deterministic(self):
        clip = make_vowel()
        a, _ = extract_features(clip)
        b, _ = extract_features(clip)
        assert np.array_equal(a.frames, b.frames)

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            extract_features(AudioClip(np.zeros(100), RATE))

    def test_wrong_rate_rejected(self):
        with pytest.raises(ValueError):
            extract_features(AudioClip(np.zeros(44100), 44100))


class TestSynthesize:
    def test_roundtrip_preserves_f0(self):
        feats, track = extract_features(make_vowel(200.0))
        out = synthesize_from_features(feats, track)
        assert abs(estimate_f0(out).median_voiced_f0() - 200.0) <= 10.0

    def test_duration(self):
        feats, track = extract_features(make_vowel())
        out = synthesize_from_features(feats, track)
        assert abs(len(out.samples) / RATE - feats.frame_count * 0.005) <= 0.005

    def test_unvoiced_synthesis_is_noise(self):
        feats, _ = extract_features(make_vowel())
        n = feats.frame_count
        silent_track = PitchTrack(np.zeros(n), 0.005, np.zeros(n, dtype=bool))
        out = synthesize_from_features(feats, silent_track)
        assert not estimate_f0(out).voicing.any()

    def test_frame_mismatch_rejected(self):
        feats, track = extract_features(make_vowel())
        short = PitchTrack(track.f0[:-5], track.frame_shift, track.voicing[:-5])
        with pytest.raises(ValueError):
            synthesize_from_features(feats, short)


class TestFeatureFiles:
    def test_bit_exact_roundtrip(self, tmp_path):
        feats, track = extract_features(make_vowel())
        p = tmp_path / "x.mcp1"
        write_features(p, feats, track)
        f2, t2 = read_features(p)
        assert np.array_equal(f2.frames, feats.frames.astype(np.float32).astype(np.float64))
        assert np.array_equal(t2.f0, track.f0.astype(np.float32).astype(np.float64))
        assert f2.frame_shift == feats.frame_shift
        # second generation writes identical bytes
        p2 = tmp_path / "y.mcp1"
        write_features(p2, f2, t2)
        assert p.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.mcp1"
        p.write_bytes(b"JUNK" + b"\0" * 64)
        with pytest.raises(BadMagicError):
            read_features(p)

    def test_truncated(self, tmp_path):
        feats, track = extract_features(make_vowel(duration=0.2))
        p = tmp_path / "x.mcp1"
        write_features(p, feats, track)
        (tmp_path / "t.mcp1").write_bytes(p.read_bytes()[:50])
        with pytest.raises(TruncatedPayloadError):
            read_features(tmp_path / "t.mcp1")

    def test_dimension_overflow(self, tmp_path):
        import struct

        p = tmp_path / "d.mcp1"
        p.write_bytes(b"MCP1" + struct.pack("<IId", 10, 1 << 20, 0.005) + b"\0" * 64)
        with pytest.raises(DimensionError):
            read_features(p)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=1, max_value=40), st.integers(min_value=1, max_value=30))
    def test_roundtrip_random_matrices(self, tmp_path_factory, n, dim):
        rng = np.random.default_rng(n * 100 + dim)
        frames = rng.standard_normal((n, dim)).astype(np.float32).astype(np.float64)
        f0 = np.where(rng.random(n) > 0.5, rng.uniform(50, 600, n), 0.0)
        f0 = f0.astype(np.float32).astype(np.float64)
        feats = FeatureMatrix(frames, 0.005)
        track = PitchTrack(f0, 0.005, f0 > 0)
        p = tmp_path_factory.mktemp("mcp") / "r.mcp1"
        write_features(p, feats, track)
        f2, t2 = read_features(p)
        assert np.array_equal(f2.frames, frames)
        assert np.array_equal(t2.f0, f0)
