"""Pitch modification by time-domain pitch-synchronous overlap-add.

Voiced stretches are decomposed into two-period grains centered on epoch
marks; re-spacing the grains at period/beta scales F0 by beta while grain
duplication/dropping keeps the total duration fixed. Unvoiced audio passes
through untouched apart from short crossfades at the boundaries.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .audio_io import AudioClip
from .spectral import estimate_f0

log = logging.getLogger(__name__)

BETA_MIN, BETA_MAX = 0.5, 2.0
MIN_VOICED_FRACTION = 0.10
CROSSFADE_SECONDS = 0.005


@dataclass(frozen=True)
class PitchModSpec:
    """Multiplier applied to the F0 contour."""

    beta: float

    def __post_init__(self):
        if not BETA_MIN <= self.beta <= BETA_MAX:
            raise ValueError(
                f"beta must lie in [{BETA_MIN}, {BETA_MAX}] (grain re-spacing "
                f"degrades beyond that), got {self.beta}"
            )


@dataclass(frozen=True)
class BetaResult:
    beta: float
    clamped: bool


def compute_beta(clp_mean_f0s, normal_mean_f0s) -> BetaResult:
    """Ratio of per-speaker mean-F0 dispersions between the two groups.

    beta = population stddev of the disordered group's speaker means over
    that of the control group, clamped into [0.5, 2.0] with a flag.
    """
    clp = np.asarray(clp_mean_f0s, dtype=np.float64)
    nrm = np.asarray(normal_mean_f0s, dtype=np.float64)
    if len(clp) < 2 or len(nrm) < 2:
        raise ValueError("need at least 2 speakers per group to take a stddev")
    s_clp = float(np.std(clp))
    s_nrm = float(np.std(nrm))
    if s_nrm == 0.0:
        raise ValueError("zero variance in the normal group's mean F0 values")
    beta = s_clp / s_nrm
    clamped = not BETA_MIN <= beta <= BETA_MAX
    return BetaResult(float(np.clip(beta, BETA_MIN, BETA_MAX)), clamped)


def _voiced_segments(track, n_samples: int, rate: int):
    """Sample ranges of contiguous voiced frames plus an f0-lookup per range."""
    hop = int(round(track.frame_shift * rate))
    win = int(round(0.040 * rate))
    centers = win // 2 + hop * np.arange(track.frame_count)
    v = track.voicing
    segments = []
    i = 0
    while i < len(v):
        if not v[i]:
            i += 1
            continue
        j = i
        while j < len(v) and v[j]:
            j += 1
        start = max(0, int(centers[i]) - hop // 2)
        end = min(n_samples, int(centers[j - 1]) + hop // 2)
        if end - start > hop:
            seg_centers = centers[i:j].astype(np.float64)
            seg_f0 = track.f0[i:j]
            segments.append((start, end, (seg_centers, seg_f0)))
        i = j
    return segments


def _f0_at(sample: float, lookup) -> float:
    centers, f0 = lookup
    return float(np.interp(sample, centers, f0))


def _epoch_marks(x: np.ndarray, start: int, end: int, lookup, rate: int) -> list[int]:
    """One mark per period, snapped to local waveform-energy peaks."""
    period0 = rate / _f0_at(start, lookup)
    first_hi = min(end, start + int(round(1.5 * period0)))
    if first_hi - start < 4:
        return []
    m = start + int(np.argmax(np.abs(x[start:first_hi])))
    marks = [m]
    while True:
        period = rate / _f0_at(marks[-1], lookup)
        target = marks[-1] + period
        if target >= end - period / 2:
            break
        slack = max(2, int(round(period / 5.0)))
        lo = max(marks[-1] + int(period / 2), int(round(target)) - slack)
        hi = min(end, int(round(target)) + slack + 1)
        if hi - lo < 1:
            break
        marks.append(lo + int(np.argmax(np.abs(x[lo:hi]))))
    return marks


def _grain_window(left: int, right: int) -> np.ndarray:
    """Asymmetric two-half Hann window peaking at index `left`."""
    rise = 0.5 - 0.5 * np.cos(np.pi * np.arange(left) / left)
    fall = 0.5 + 0.5 * np.cos(np.pi * np.arange(right) / right)
    return np.concatenate([rise, fall])


def _psola_segment(x: np.ndarray, marks: list[int], beta: float, start: int, end: int) -> np.ndarray:
    """Re-space two-period grains at period/beta over [start, end)."""
    marks_arr = np.asarray(marks)
    gaps = np.diff(marks_arr)
    num = np.zeros(end - start)
    den = np.zeros(end - start)

    t = float(marks_arr[0])
    while t < end:
        i = int(np.argmin(np.abs(marks_arr - t)))
        left = int(gaps[i - 1]) if i > 0 else int(gaps[0])
        right = int(gaps[i]) if i < len(gaps) else int(gaps[-1])
        center = int(marks_arr[i])
        a, b = center - left, center + right
        if a < 0 or b > len(x):
            t += right / beta
            continue
        w = _grain_window(left, right)
        pos = int(round(t)) - left - start
        g_lo = max(0, -pos)
        g_hi = min(len(w), len(num) - pos)
        if g_hi > g_lo:
            num[pos + g_lo : pos + g_hi] += (x[a:b] * w)[g_lo:g_hi]
            den[pos + g_lo : pos + g_hi] += w[g_lo:g_hi]
        t += right / beta

    out = x[start:end].copy()
    ok = den > 0.05
    out[ok] = num[ok] / den[ok]
    return out


def _blend(out: np.ndarray, synth: np.ndarray, start: int, end: int, rate: int) -> None:
    """Write a synthesized span with short crossfades against the original."""
    fade = min(int(CROSSFADE_SECONDS * rate), (end - start) // 2)
    span = out[start:end].copy()
    out[start:end] = synth
    if fade > 0:
        ramp = np.linspace(0.0, 1.0, fade, endpoint=False)
        out[start : start + fade] = ramp * synth[:fade] + (1 - ramp) * span[:fade]
        out[end - fade : end] = ramp[::-1] * span[-fade:] + (1 - ramp[::-1]) * synth[-fade:]


def apply_pitch_mod(clip: AudioClip, spec: PitchModSpec) -> AudioClip:
    """Scale the F0 of voiced speech by beta without changing duration.

    Inputs with under 10% voiced frames come back bit-identical (with a
    warning): there is nothing pitch-synchronous to anchor on.
    """
    x = clip.samples
    rate = clip.sample_rate
    track = estimate_f0(clip)
    if float(np.mean(track.voicing)) < MIN_VOICED_FRACTION:
        log.warning("clip %r is %.0f%% voiced; pitch modification passed through",
                    clip.id, 100 * float(np.mean(track.voicing)))
        return AudioClip(x.copy(), rate, clip.id)

    out = x.copy()
    for start, end, lookup in _voiced_segments(track, len(x), rate):
        marks = _epoch_marks(x, start, end, lookup, rate)
        if len(marks) < 3:
            continue
        synth = _psola_segment(x, marks, spec.beta, start, end)
        _blend(out, synth, start, end, rate)
    return AudioClip(out, rate, clip.id)
