"""Room reverberation via the image-source method.

Generates an impulse response for a rectangular room by enumerating mirror
images of the source, then convolves it with the input. Image amplitudes
fall off as 1/(4 pi d) with one wall-reflection coefficient factor per
bounce; arrivals are placed with fractional-delay windowed-sinc taps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .audio_io import CANONICAL_RATE, AudioClip

SPEED_OF_SOUND = 343.0
FRAC_TAPS = 16  # windowed-sinc taps per arrival


@dataclass
class RoomSpec:
    """Rectangular room geometry for image-source simulation.

    reflection_coeffs order: (x_low, x_high, y_low, y_high, z_low, z_high),
    where "low" is the wall through the coordinate origin.
    """

    dimensions: tuple
    source: tuple
    mic: tuple
    reflection_coeffs: tuple = (0.7,) * 6
    max_order: int = 10
    sample_rate: int = CANONICAL_RATE
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self):
        self.dimensions = tuple(float(v) for v in self.dimensions)
        self.source = tuple(float(v) for v in self.source)
        self.mic = tuple(float(v) for v in self.mic)
        self.reflection_coeffs = tuple(float(v) for v in self.reflection_coeffs)
        self.validate()

    def validate(self) -> None:
        if len(self.dimensions) != 3 or any(d <= 0 for d in self.dimensions):
            raise ValueError(f"room dimensions must be 3 positive lengths, got {self.dimensions}")
        for name, p in (("source", self.source), ("mic", self.mic)):
            if len(p) != 3 or any(not 0.0 < c < d for c, d in zip(p, self.dimensions)):
                raise ValueError(f"{name} {p} must lie strictly inside room {self.dimensions}")
        if len(self.reflection_coeffs) != 6 or any(not 0.0 <= r <= 1.0 for r in self.reflection_coeffs):
            raise ValueError(f"need 6 reflection coefficients in [0, 1], got {self.reflection_coeffs}")
        if self.max_order < 0:
            raise ValueError(f"max_order must be >= 0, got {self.max_order}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")


@dataclass
class ImpulseResponse:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)


def _axis_images(coord: float, length: float, k: int) -> tuple[float, int, int]:
    """One axis: image coordinate and (low, high) wall bounce counts for index k."""
    if k % 2 == 0:
        pos = k * length + coord
    else:
        pos = (k + 1) * length - coord
    if k > 0:
        n_high, n_low = (k + 1) // 2, k // 2
    elif k < 0:
        n_low, n_high = (-k + 1) // 2, (-k) // 2
    else:
        n_low = n_high = 0
    return pos, n_low, n_high


def image_sources(room: RoomSpec) -> tuple[np.ndarray, np.ndarray]:
    """All image arrivals with combined order <= max_order.

    Returns (delays_seconds, amplitudes) sorted by delay. The combined
    order of an image is its total wall-bounce count summed over axes;
    order 0 is the direct path alone.
    """
    room.validate()
    mo = room.max_order
    per_axis = []
    for axis in range(3):
        lo, hi = room.reflection_coeffs[2 * axis], room.reflection_coeffs[2 * axis + 1]
        entries = {}
        for k in range(-mo, mo + 1):
            pos, n_lo, n_hi = _axis_images(room.source[axis], room.dimensions[axis], k)
            entries[k] = (pos, (lo ** n_lo) * (hi ** n_hi))
        per_axis.append(entries)

    mic = np.asarray(room.mic)
    delays, amps = [], []
    for kx in range(-mo, mo + 1):
        for ky in range(-(mo - abs(kx)), mo - abs(kx) + 1):
            kz_span = mo - abs(kx) - abs(ky)
            for kz in range(-kz_span, kz_span + 1):
                px, cx = per_axis[0][kx]
                py, cy = per_axis[1][ky]
                pz, cz = per_axis[2][kz]
                d = float(np.linalg.norm(np.array([px, py, pz]) - mic))
                delays.append(d / room.speed_of_sound)
                amps.append(cx * cy * cz / (4.0 * np.pi * d))
    delays = np.asarray(delays)
    amps = np.asarray(amps)
    order = np.argsort(delays, kind="stable")
    return delays[order], amps[order]


def generate_rir(room: RoomSpec) -> ImpulseResponse:
    """Render the image arrivals into a sampled impulse response.

    Each arrival lands at its fractional delay through a 16-tap windowed
    sinc spanning one sample before to 14 after the integer delay, which
    keeps the response causal up to that single sample of pre-ring.
    """
    delays, amps = image_sources(room)
    rate = room.sample_rate
    n = int(np.ceil(delays.max() * rate)) + FRAC_TAPS
    h = np.zeros(n)
    j = np.arange(-1, FRAC_TAPS - 1)
    for delay, amp in zip(delays, amps):
        n0 = int(np.floor(delay * rate))
        t = j - (delay * rate - n0)
        taps = 0.5 * (1.0 + np.cos(np.pi * t / FRAC_TAPS)) * np.sinc(t)
        idx = n0 + j
        ok = idx >= 0
        h[idx[ok]] += amp * taps[ok]
    return ImpulseResponse(h, rate)


def apply_reverb(clip: AudioClip, rir: ImpulseResponse) -> AudioClip:
    """Full FFT convolution with the impulse response.

    Output length is len(clip) + len(rir) - 1; if the result would exceed
    full scale it is scaled back to the input's peak.
    """
    if clip.sample_rate != rir.sample_rate:
        raise ValueError(
            f"sample-rate mismatch: clip {clip.sample_rate} vs RIR {rir.sample_rate}"
        )
    y = fftconvolve(clip.samples, rir.samples)
    peak = np.max(np.abs(y)) if len(y) else 0.0
    if peak > 1.0:
        in_peak = np.max(np.abs(clip.samples))
        y = y * (in_peak / peak)
    return AudioClip(y, clip.sample_rate, clip.id)


def default_room(seed: int, sample_rate: int = CANONICAL_RATE) -> RoomSpec:
    """4 x 5 x 3 m room, coefficient 0.7 walls, seeded source/mic jitter."""
    rng = np.random.default_rng(seed)
    src = np.array([1.5, 1.8, 1.4]) + rng.uniform(-0.5, 0.5, 3)
    mic = np.array([2.6, 3.4, 1.5]) + rng.uniform(-0.5, 0.5, 3)
    return RoomSpec(
        dimensions=(4.0, 5.0, 3.0),
        source=tuple(src),
        mic=tuple(mic),
        reflection_coeffs=(0.7,) * 6,
        max_order=10,
        sample_rate=sample_rate,
    )
