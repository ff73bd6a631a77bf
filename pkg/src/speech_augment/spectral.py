"""Shared analysis/synthesis kernel.

STFT/ISTFT, autocorrelation F0 tracking, cepstrally smoothed spectral
envelopes, mel-cepstral feature extraction, pulse/noise source-filter
resynthesis, and the binary MCP1 feature-file format used to hand features
to external components. No operation here draws fresh randomness: the
resynthesis noise source is seeded per call, so equal inputs give equal
outputs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.fft import dct, idct
from scipy.signal import get_window

from .audio_io import CANONICAL_RATE, AudioClip

FRAME_SHIFT = 0.005  # seconds
MEL_WINDOW = 0.025  # seconds
MEL_FFT = 512
FEATURE_DIM = 25  # 24th-order mel-cepstrum + energy coefficient
N_MEL_BANDS = 26

F0_MIN = 50.0
F0_MAX = 600.0
F0_WINDOW = 0.040  # seconds
VOICING_THRESHOLD = 0.3

LOG_FLOOR = 1e-10
ENVELOPE_LIFTER = 30

MCP1_MAGIC = b"MCP1"


class FeatureFormatError(ValueError):
    """Base error for malformed MCP1 feature files."""


class BadMagicError(FeatureFormatError):
    """File does not start with the MCP1 magic bytes."""


class TruncatedPayloadError(FeatureFormatError):
    """Header advertises more data than the file holds."""


class DimensionError(FeatureFormatError):
    """Header dimensions are zero or implausibly large."""


@dataclass
class Spectrogram:
    """Complex STFT frames plus the geometry needed to invert them.

    Analysis is center-padded: the signal is extended by fft_size//2 zeros
    on both ends so every original sample gets full window coverage and
    the inverse transform is exact.
    """

    frames: np.ndarray  # complex, frame_count x (fft_size//2 + 1)
    fft_size: int
    hop: int
    window: str = "hann"
    orig_length: int = 0  # sample count before center padding

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]


@dataclass
class PitchTrack:
    """Frame-level F0 contour; f0 == 0 exactly where voicing is False."""

    f0: np.ndarray
    frame_shift: float
    voicing: np.ndarray

    def __post_init__(self):
        self.f0 = np.asarray(self.f0, dtype=np.float64)
        self.voicing = np.asarray(self.voicing, dtype=bool)
        if self.f0.shape != self.voicing.shape:
            raise ValueError("f0 and voicing must be parallel sequences")
        if np.any((self.f0 == 0) & self.voicing) or np.any((self.f0 != 0) & ~self.voicing):
            raise ValueError("f0 must be zero exactly on unvoiced frames")
        if np.any(self.f0 < 0) or not np.all(np.isfinite(self.f0)):
            raise ValueError("f0 values must be finite and non-negative")

    @property
    def frame_count(self) -> int:
        return len(self.f0)

    def median_voiced_f0(self) -> float:
        """Median F0 over voiced frames; 0.0 if nothing is voiced."""
        if not np.any(self.voicing):
            return 0.0
        return float(np.median(self.f0[self.voicing]))


@dataclass
class FeatureMatrix:
    """Frame-by-coefficient mel-cepstra (coefficient 0 carries energy)."""

    frames: np.ndarray  # frame_count x dim
    frame_shift: float = FRAME_SHIFT

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2:
            raise ValueError("feature frames must be a 2-D matrix")
        if not np.all(np.isfinite(self.frames)):
            raise ValueError("feature frames must be finite")

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


# ---------------------------------------------------------------------------
# STFT / ISTFT


def stft(clip: AudioClip, fft_size: int = 1024, hop: int = 256) -> Spectrogram:
    """Hann-windowed, center-padded short-time Fourier transform."""
    x = clip.samples
    if fft_size <= 0 or fft_size & (fft_size - 1):
        raise ValueError(f"fft_size must be a power of two, got {fft_size}")
    if hop < 1 or hop > fft_size:
        raise ValueError(f"hop must be in [1, fft_size], got {hop}")
    if len(x) < fft_size:
        raise ValueError(f"clip has {len(x)} samples, shorter than one {fft_size}-sample frame")

    pad = fft_size // 2
    xp = np.pad(x, (pad, pad))
    win = get_window("hann", fft_size, fftbins=True)
    n_frames = 1 + (len(xp) - fft_size) // hop
    idx = hop * np.arange(n_frames)[:, None] + np.arange(fft_size)[None, :]
    frames = np.fft.rfft(xp[idx] * win, axis=1)
    return Spectrogram(frames, fft_size, hop, "hann", orig_length=len(x))


def istft(spec: Spectrogram) -> np.ndarray:
    """Overlap-add inverse with window-sum normalization.

    For hop <= fft_size/2 this reconstructs the analyzed signal to within
    floating-point roundoff.
    """
    fft_size, hop = spec.fft_size, spec.hop
    win = get_window(spec.window, fft_size, fftbins=True)
    grains = np.fft.irfft(spec.frames, n=fft_size, axis=1) * win
    total = fft_size + (spec.frame_count - 1) * hop
    out = np.zeros(total)
    wsum = np.zeros(total)
    for k in range(spec.frame_count):
        s = k * hop
        out[s : s + fft_size] += grains[k]
        wsum[s : s + fft_size] += win * win
    good = wsum > 1e-10
    out[good] /= wsum[good]
    pad = fft_size // 2
    return out[pad : pad + spec.orig_length]


# ---------------------------------------------------------------------------
# F0 estimation


def _f0_at_centers(x: np.ndarray, rate: int, centers: np.ndarray):
    """Autocorrelation F0 with parabolic lag refinement at given centers."""
    win = int(round(F0_WINDOW * rate))
    half = win // 2
    lag_min = max(2, int(np.floor(rate / F0_MAX)))
    lag_max = int(np.ceil(rate / F0_MIN))
    nfft = 1 << int(np.ceil(np.log2(win + lag_max + 2)))

    frames = np.zeros((len(centers), win))
    for i, c in enumerate(centers):
        a = max(0, int(c) - half)
        b = min(len(x), int(c) - half + win)
        frames[i, a - (int(c) - half) : b - (int(c) - half)] = x[a:b]
    frames -= frames.mean(axis=1, keepdims=True)

    spec = np.fft.rfft(frames, nfft, axis=1)
    ac = np.fft.irfft(spec * np.conj(spec), nfft, axis=1)[:, : lag_max + 2]
    r0 = ac[:, 0]
    has_energy = r0 > 1e-10 * win

    rn = ac / np.where(r0 > 0, r0, 1.0)[:, None]
    search = rn[:, lag_min : lag_max + 1]
    rel = np.argmax(search, axis=1)
    lag = lag_min + rel
    peak = search[np.arange(len(lag)), rel]
    voiced = has_energy & (peak >= VOICING_THRESHOLD)

    # parabolic interpolation around the winning lag
    rows = np.arange(len(lag))
    y0, y1, y2 = ac[rows, lag - 1], ac[rows, lag], ac[rows, lag + 1]
    denom = y0 - 2 * y1 + y2
    shift = np.where(np.abs(denom) > 1e-30, 0.5 * (y0 - y2) / np.where(denom != 0, denom, 1.0), 0.0)
    shift = np.clip(shift, -0.5, 0.5)
    f0 = rate / (lag + shift)
    f0 = np.clip(f0, F0_MIN, F0_MAX)
    f0 = np.where(voiced, f0, 0.0)
    f0 = _median3_on_voiced_runs(f0, voiced)
    return f0, voiced


def _median3_on_voiced_runs(f0: np.ndarray, voiced: np.ndarray) -> np.ndarray:
    out = f0.copy()
    n = len(f0)
    i = 0
    while i < n:
        if not voiced[i]:
            i += 1
            continue
        j = i
        while j < n and voiced[j]:
            j += 1
        seg = f0[i:j]
        if len(seg) >= 3:
            smoothed = seg.copy()
            smoothed[1:-1] = np.median(np.stack([seg[:-2], seg[1:-1], seg[2:]]), axis=0)
            out[i:j] = smoothed
        i = j
    return out


def estimate_f0(clip: AudioClip, frame_shift: float = FRAME_SHIFT) -> PitchTrack:
    """Track F0 in 50-600 Hz with a 40 ms autocorrelation window.

    Voicing is decided by the normalized autocorrelation peak (threshold
    0.3); degenerate input comes back all-unvoiced rather than erroring.
    """
    x = clip.samples
    rate = clip.sample_rate
    win = int(round(F0_WINDOW * rate))
    hop = max(1, int(round(frame_shift * rate)))
    n_frames = max(1, 1 + (len(x) - win) // hop) if len(x) >= win else 1
    centers = win // 2 + hop * np.arange(n_frames)
    f0, voiced = _f0_at_centers(x, rate, centers)
    return PitchTrack(f0, frame_shift, voiced)


# ---------------------------------------------------------------------------
# Spectral envelope


def _cepstral_envelope_rows(mags: np.ndarray, lifter: int, iterations: int = 10) -> np.ndarray:
    """Cepstrally smoothed envelope of each row of a magnitude matrix.

    After the initial liftering pass the envelope is refined by iterating
    smooth(max(log spectrum, envelope)), which rides the harmonic peaks
    instead of averaging through them, so the excitation residual stays
    free of formant structure.
    """
    n_bins = mags.shape[-1]
    nfft = 2 * (n_bins - 1)
    keep = np.zeros(nfft)
    keep[:lifter] = 1.0
    keep[-(lifter - 1) :] = 1.0

    def smooth(v):
        return np.fft.rfft(np.fft.irfft(v, nfft, axis=-1) * keep, nfft, axis=-1).real

    logm = np.log(np.maximum(mags, LOG_FLOOR))
    env = smooth(logm)
    for _ in range(iterations):
        env = smooth(np.maximum(logm, env))
    env = np.exp(env)
    # rows that were all-zero stay all-zero instead of exp(log floor)
    dead = ~np.any(mags > 0, axis=-1)
    env[dead] = 0.0
    return env


def spectral_envelope(frame_magnitudes, lifter: int = ENVELOPE_LIFTER) -> np.ndarray:
    """Smooth envelope of one magnitude spectrum (length fft/2 + 1).

    Keeps the first `lifter` quefrency coefficients, which removes
    harmonic ripple while preserving formant structure. All-zero input
    yields an all-zero envelope.
    """
    m = np.asarray(frame_magnitudes, dtype=np.float64)
    if m.ndim != 1 or len(m) < 2:
        raise ValueError("expected a 1-D magnitude spectrum")
    if np.any(m < 0):
        raise ValueError("magnitudes must be non-negative")
    return _cepstral_envelope_rows(m[None, :], lifter)[0]


# ---------------------------------------------------------------------------
# Mel-cepstral features


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def _mel_filterbank(nfft: int, rate: int, n_bands: int) -> np.ndarray:
    """Triangular mel filters, n_bands x (nfft//2 + 1)."""
    mel_pts = np.linspace(_hz_to_mel(0.0), _hz_to_mel(rate / 2.0), n_bands + 2)
    hz_pts = _mel_to_hz(mel_pts)
    bins = np.fft.rfftfreq(nfft, 1.0 / rate)
    fb = np.zeros((n_bands, len(bins)))
    for b in range(n_bands):
        lo, mid, hi = hz_pts[b], hz_pts[b + 1], hz_pts[b + 2]
        up = (bins - lo) / (mid - lo)
        down = (hi - bins) / (hi - mid)
        fb[b] = np.maximum(0.0, np.minimum(up, down))
    return fb


def _mel_band_centers(rate: int, n_bands: int) -> np.ndarray:
    mel_pts = np.linspace(_hz_to_mel(0.0), _hz_to_mel(rate / 2.0), n_bands + 2)
    return _mel_to_hz(mel_pts[1:-1])


def extract_features(clip: AudioClip) -> tuple[FeatureMatrix, PitchTrack]:
    """25-dim mel-cepstra (25 ms window, 5 ms shift) plus an aligned F0 track.

    Pipeline per frame: Hann window, power spectrum, 26-band mel filterbank,
    log (floored for silence), DCT-II, keep the first 25 coefficients.
    """
    if clip.sample_rate != CANONICAL_RATE:
        raise ValueError(f"features are defined at {CANONICAL_RATE} Hz, got {clip.sample_rate}")
    x = clip.samples
    rate = clip.sample_rate
    win = int(round(MEL_WINDOW * rate))
    hop = int(round(FRAME_SHIFT * rate))
    if len(x) < win:
        raise ValueError(f"clip has {len(x)} samples, shorter than one {win}-sample window")

    n_frames = 1 + (len(x) - win) // hop
    idx = hop * np.arange(n_frames)[:, None] + np.arange(win)[None, :]
    hann = get_window("hann", win, fftbins=True)
    spec = np.fft.rfft(x[idx] * hann, MEL_FFT, axis=1)
    power = np.abs(spec) ** 2

    fb = _mel_filterbank(MEL_FFT, rate, N_MEL_BANDS)
    mel_energy = power @ fb.T
    log_mel = np.log(np.maximum(mel_energy, LOG_FLOOR))
    cep = dct(log_mel, type=2, norm="ortho", axis=1)[:, :FEATURE_DIM]

    centers = win // 2 + hop * np.arange(n_frames)
    f0, voiced = _f0_at_centers(x, rate, centers)
    return FeatureMatrix(cep, FRAME_SHIFT), PitchTrack(f0, FRAME_SHIFT, voiced)


# ---------------------------------------------------------------------------
# Source-filter resynthesis


def _excitation(f0_per_sample: np.ndarray, rate: int, seed: int = 12345) -> np.ndarray:
    """Unit-power pulse train where voiced, white noise where unvoiced."""
    voiced = f0_per_sample > 0
    rng = np.random.default_rng(seed)
    exc = np.where(voiced, 0.0, rng.standard_normal(len(f0_per_sample)))
    phase = np.cumsum(np.where(voiced, f0_per_sample, 0.0)) / rate
    ticks = np.diff(np.floor(phase), prepend=0.0) > 0
    pulses = ticks & voiced
    exc[pulses] = np.sqrt(rate / f0_per_sample[pulses])
    return exc


def _mel_interp_matrix(nfft: int, rate: int, n_bands: int) -> np.ndarray:
    """Linear interpolation from mel band centers to FFT bins, (bins x bands)."""
    centers = _mel_band_centers(rate, n_bands)
    bins = np.fft.rfftfreq(nfft, 1.0 / rate)
    pos = np.clip(np.searchsorted(centers, bins) - 1, 0, n_bands - 2)
    span = centers[pos + 1] - centers[pos]
    w = np.clip((bins - centers[pos]) / span, 0.0, 1.0)
    mat = np.zeros((len(bins), n_bands))
    mat[np.arange(len(bins)), pos] = 1.0 - w
    mat[np.arange(len(bins)), pos + 1] = w
    return mat


def synthesize_from_features(features: FeatureMatrix, pitch: PitchTrack) -> AudioClip:
    """Rebuild audio from mel-cepstra and an F0 track.

    Excitation is a pulse train at the tracked F0 (white noise on unvoiced
    frames); the filter is the envelope obtained by inverting the DCT of
    the mel-cepstrum, applied frame-by-frame with overlap-add. Output runs
    frame_count * frame_shift seconds.
    """
    n_feat, n_pitch = features.frame_count, pitch.frame_count
    if abs(n_feat - n_pitch) > 1:
        raise ValueError(f"frame-count mismatch: {n_feat} feature vs {n_pitch} pitch frames")
    n = min(n_feat, n_pitch)
    if n == 0:
        raise ValueError("nothing to synthesize: zero frames")

    rate = CANONICAL_RATE
    hop = int(round(features.frame_shift * rate))
    win = int(round(MEL_WINDOW * rate))
    total = n * hop + win

    f0_per_sample = np.repeat(pitch.f0[:n], hop)
    f0_per_sample = np.pad(f0_per_sample, (0, total - len(f0_per_sample)), mode="edge")
    exc = _excitation(f0_per_sample, rate)

    coeffs = np.zeros((n, N_MEL_BANDS))
    coeffs[:, : min(features.dim, N_MEL_BANDS)] = features.frames[:n, :N_MEL_BANDS]
    log_mel = idct(coeffs, type=2, norm="ortho", axis=1)
    interp = _mel_interp_matrix(MEL_FFT, rate, N_MEL_BANDS)
    envelope = np.exp(0.5 * (log_mel @ interp.T))  # power -> amplitude

    hann = get_window("hann", win, fftbins=True)
    out = np.zeros(total + MEL_FFT)
    wsum = np.zeros(total + MEL_FFT)
    for k in range(n):
        s = k * hop
        seg = exc[s : s + win] * hann
        y = np.fft.irfft(np.fft.rfft(seg, MEL_FFT) * envelope[k], MEL_FFT)
        out[s : s + MEL_FFT] += y
        wsum[s : s + win] += hann

    good = wsum > 1e-3
    out[good] /= wsum[good]
    out = out[: n * hop]
    peak = np.max(np.abs(out)) if len(out) else 0.0
    if peak > 1.0:
        out = out * (0.99 / peak)
    return AudioClip(out, rate)


# ---------------------------------------------------------------------------
# MCP1 feature files


def write_features(path, features: FeatureMatrix, pitch: PitchTrack) -> None:
    """Serialize features + F0 to one MCP1 file (bit-exact round trip)."""
    n = features.frame_count
    if pitch.frame_count != n:
        raise ValueError(
            f"feature/pitch frame counts differ: {n} vs {pitch.frame_count}"
        )
    header = MCP1_MAGIC + struct.pack("<IId", n, features.dim, features.frame_shift)
    body = features.frames.astype("<f4").tobytes() + pitch.f0.astype("<f4").tobytes()
    Path(path).write_bytes(header + body)


def read_features(path) -> tuple[FeatureMatrix, PitchTrack]:
    """Parse an MCP1 file back into (FeatureMatrix, PitchTrack)."""
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != MCP1_MAGIC:
        raise BadMagicError(f"{path}: not an MCP1 file (bad magic)")
    if len(data) < 20:
        raise TruncatedPayloadError(f"{path}: header cut short at {len(data)} bytes")
    n, dim, frame_shift = struct.unpack_from("<IId", data, 4)
    if dim == 0 or dim > 1 << 16 or n > 1 << 28:
        raise DimensionError(f"{path}: implausible dimensions {n} x {dim}")
    expected = 20 + 4 * n * dim + 4 * n
    if len(data) < expected:
        raise TruncatedPayloadError(
            f"{path}: header claims {n} frames x {dim} but only {len(data)} bytes present"
        )
    frames = np.frombuffer(data, "<f4", count=n * dim, offset=20).reshape(n, dim)
    f0 = np.frombuffer(data, "<f4", count=n, offset=20 + 4 * n * dim)
    f0 = f0.astype(np.float64)
    return (
        FeatureMatrix(frames.astype(np.float64), frame_shift),
        PitchTrack(f0, frame_shift, f0 > 0),
    )
