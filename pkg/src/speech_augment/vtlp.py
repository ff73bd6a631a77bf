"""Vocal tract length perturbation.

Warps the smoothed spectral envelope of each STFT frame along the frequency
axis by a factor alpha while keeping the excitation residual (and with it
the pitch) and the sample count untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import AudioClip
from .spectral import Spectrogram, _cepstral_envelope_rows, istft, stft

ALPHA_GRID = tuple(round(0.90 + 0.02 * k, 2) for k in range(11))
ALPHA_MIN, ALPHA_MAX = 0.9, 1.1
DEFAULT_BOUNDARY = 0.8

VTLP_FFT = 1024
VTLP_HOP = 256


@dataclass(frozen=True)
class WarpSpec:
    """Warp factor plus the Nyquist fraction where the warp bends."""

    alpha: float
    boundary_fraction: float = DEFAULT_BOUNDARY

    def __post_init__(self):
        if not ALPHA_MIN <= self.alpha <= ALPHA_MAX:
            raise ValueError(f"alpha must lie in [{ALPHA_MIN}, {ALPHA_MAX}], got {self.alpha}")
        if not 0.0 < self.boundary_fraction < 1.0:
            raise ValueError(f"boundary_fraction must lie in (0, 1), got {self.boundary_fraction}")


def sample_alpha(rng_seed: int) -> float:
    """Uniform draw from the 11-point grid 0.90, 0.92, ..., 1.10."""
    rng = np.random.default_rng(rng_seed)
    return ALPHA_GRID[int(rng.integers(len(ALPHA_GRID)))]


def warp_frequency(f, alpha: float, nyquist: float, boundary_fraction: float = DEFAULT_BOUNDARY):
    """Piecewise-linear frequency map g with g(0)=0 and g(nyquist)=nyquist.

    Below the bend at boundary_fraction * nyquist * min(1, 1/alpha) the map
    is g(f) = alpha * f; above it a straight segment reaches the Nyquist
    fixed point. Strictly increasing for every admissible alpha. Accepts
    scalars or arrays.
    """
    f_arr = np.asarray(f, dtype=np.float64)
    if np.any(f_arr < 0) or np.any(f_arr > nyquist):
        raise ValueError(f"frequencies must lie in [0, {nyquist}]")
    f_b = boundary_fraction * nyquist * min(1.0, 1.0 / alpha)
    low = alpha * f_arr
    high = alpha * f_b + (f_arr - f_b) * (nyquist - alpha * f_b) / (nyquist - f_b)
    out = np.where(f_arr <= f_b, low, high)
    return float(out) if np.isscalar(f) else out


def apply_vtlp(clip: AudioClip, spec: WarpSpec, fft_size: int = VTLP_FFT, hop: int = VTLP_HOP) -> AudioClip:
    """Warp the per-frame spectral envelope; duration and F0 are preserved.

    The new envelope at frequency f takes the old envelope's value at the
    warped frequency g(f) (linear interpolation in magnitude); the residual
    magnitude and the phase are carried over unchanged before resynthesis.
    """
    gram = stft(clip, fft_size, hop)
    mag = np.abs(gram.frames)
    tiny = 1e-300
    phase = gram.frames / np.maximum(mag, tiny)

    env = _cepstral_envelope_rows(mag, lifter=30)
    residual = mag / np.maximum(env, 1e-12)

    nyquist = clip.sample_rate / 2.0
    freqs = np.fft.rfftfreq(fft_size, 1.0 / clip.sample_rate)
    warped = warp_frequency(freqs, spec.alpha, nyquist, spec.boundary_fraction)

    bin_width = clip.sample_rate / fft_size
    pos = warped / bin_width
    i0 = np.clip(np.floor(pos).astype(int), 0, mag.shape[1] - 2)
    w = pos - i0
    new_env = env[:, i0] * (1.0 - w) + env[:, i0 + 1] * w

    new_frames = new_env * residual * phase
    out = istft(Spectrogram(new_frames, fft_size, hop, gram.window, gram.orig_length))
    return AudioClip(out, clip.sample_rate, clip.id)
