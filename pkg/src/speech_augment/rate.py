"""Speaking-rate transformation.

A normal utterance is aligned to a slower/faster reference by dynamic time
warping over mel-cepstral frames; the path slope becomes a local rate curve
that drives waveform-similarity overlap-add resynthesis, changing duration
while leaving pitch and spectral envelope alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window
from scipy.spatial.distance import cdist

from .audio_io import AudioClip
from .spectral import FRAME_SHIFT, FeatureMatrix, extract_features

FACTOR_MIN, FACTOR_MAX = 0.25, 4.0
SLOPE_HALF_WINDOW = 2  # 5-frame slope estimate
MEDIAN_WIDTH = 5

WSOLA_WINDOW = 0.025  # seconds
WSOLA_SEARCH = 0.005  # seconds, correlation refinement span


@dataclass
class WarpPath:
    """Monotone frame alignment; steps are (1,0), (0,1) or (1,1)."""

    pairs: np.ndarray  # K x 2 int
    cost: float

    def __post_init__(self):
        self.pairs = np.asarray(self.pairs, dtype=int)
        if self.pairs.ndim != 2 or self.pairs.shape[1] != 2 or len(self.pairs) == 0:
            raise ValueError("path must be a non-empty K x 2 index array")
        if tuple(self.pairs[0]) != (0, 0):
            raise ValueError(f"path must start at (0, 0), got {tuple(self.pairs[0])}")
        steps = np.diff(self.pairs, axis=0)
        if len(steps):
            legal = (steps >= 0).all(axis=1) & (steps <= 1).all(axis=1) & (steps.sum(axis=1) >= 1)
            if not legal.all():
                raise ValueError("path steps must be (1,0), (0,1) or (1,1)")


@dataclass
class RateCurve:
    """Per-source-frame local time-scale factors (2.0 = twice as long)."""

    factors: np.ndarray
    frame_shift: float = FRAME_SHIFT

    def __post_init__(self):
        self.factors = np.asarray(self.factors, dtype=np.float64)
        if self.factors.ndim != 1 or len(self.factors) == 0:
            raise ValueError("rate curve must be a non-empty 1-D factor array")
        if np.any(self.factors < FACTOR_MIN) or np.any(self.factors > FACTOR_MAX):
            raise ValueError(f"factors must lie in [{FACTOR_MIN}, {FACTOR_MAX}]")


def _frames_of(x) -> np.ndarray:
    if isinstance(x, FeatureMatrix):
        return x.frames
    return np.asarray(x, dtype=np.float64)


def dtw_align(a, b) -> WarpPath:
    """Minimal-cost monotone alignment under Euclidean frame distance.

    Backtrace ties are broken preferring the diagonal step, then holding
    the source frame, then holding the target frame, so paths are
    reproducible.
    """
    A, B = _frames_of(a), _frames_of(b)
    if A.ndim != 2 or B.ndim != 2 or len(A) == 0 or len(B) == 0:
        raise ValueError("both feature matrices must be non-empty and 2-D")
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")

    dist = cdist(A, B)
    m, n = dist.shape
    acc = np.full((m + 1, n + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, m + 1):
        row = acc[i]
        prev = acc[i - 1]
        d = dist[i - 1]
        for j in range(1, n + 1):
            row[j] = d[j - 1] + min(prev[j - 1], prev[j], row[j - 1])

    pairs = [(m - 1, n - 1)]
    i, j = m, n
    while (i, j) != (1, 1):
        # follow the cheapest predecessor; argmin order gives the
        # documented tie preference diagonal > hold-source > hold-target
        k = int(np.argmin((acc[i - 1, j - 1], acc[i, j - 1], acc[i - 1, j])))
        if k == 0:
            i, j = i - 1, j - 1
        elif k == 1:
            j -= 1
        else:
            i -= 1
        pairs.append((i - 1, j - 1))
    pairs.reverse()
    return WarpPath(np.asarray(pairs), float(acc[m, n]))


def _running_median(arr: np.ndarray, width: int) -> np.ndarray:
    half = width // 2
    out = np.empty_like(arr)
    for i in range(len(arr)):
        lo, hi = max(0, i - half), min(len(arr), i + half + 1)
        out[i] = np.median(arr[lo:hi])
    return out


def path_to_rate_curve(path: WarpPath, frame_shift: float = FRAME_SHIFT) -> RateCurve:
    """Turn a warp path into smoothed per-source-frame scale factors.

    The local slope dj/di over a 5-frame window gives raw factors; these
    are median-smoothed, clamped into [0.25, 4.0], and rescaled so their
    sum reproduces the target frame count.
    """
    pairs = path.pairs
    if len(pairs) < 2:
        raise ValueError("degenerate single-pair path has no usable slope")
    m = int(pairs[-1, 0]) + 1
    n = int(pairs[-1, 1]) + 1

    j_sum = np.zeros(m)
    j_cnt = np.zeros(m)
    np.add.at(j_sum, pairs[:, 0], pairs[:, 1].astype(np.float64))
    np.add.at(j_cnt, pairs[:, 0], 1.0)
    j_of_i = j_sum / j_cnt

    factors = np.empty(m)
    for i in range(m):
        lo = max(0, i - SLOPE_HALF_WINDOW)
        hi = min(m - 1, i + SLOPE_HALF_WINDOW)
        factors[i] = (j_of_i[hi] - j_of_i[lo]) / (hi - lo) if hi > lo else float(n) / m

    factors = _running_median(factors, MEDIAN_WIDTH)
    factors = np.clip(factors, FACTOR_MIN, FACTOR_MAX)
    total = factors.sum()
    if total > 0:
        factors = np.clip(factors * (n / total), FACTOR_MIN, FACTOR_MAX)
    return RateCurve(factors, frame_shift)


def constant_rate_curve(factor: float, n_frames: int, frame_shift: float = FRAME_SHIFT) -> RateCurve:
    """Uniform curve for global speed changes (factor 2.0 = twice as long)."""
    return RateCurve(np.full(max(1, n_frames), float(factor)), frame_shift)


def apply_rate(clip: AudioClip, curve: RateCurve) -> AudioClip:
    """Waveform-similarity overlap-add time-scale modification.

    Analysis grains are 25 ms; each output grain's source position is
    refined within +-5 ms by cross-correlation against the natural
    continuation of the previous grain, which keeps pitch and envelope
    intact. Output duration is the integral of the local factors.
    """
    x = clip.samples
    rate = clip.sample_rate
    win = int(round(WSOLA_WINDOW * rate))
    if len(x) < win:
        raise ValueError(f"clip has {len(x)} samples, shorter than one {win}-sample grain")

    hop_in = int(round(curve.frame_shift * rate))
    n_cells = int(np.ceil(len(x) / hop_in))
    f = curve.factors
    if len(f) < n_cells:
        f = np.append(f, np.full(n_cells - len(f), f[-1]))
    else:
        f = f[:n_cells]

    in_edges = np.minimum(hop_in * np.arange(n_cells + 1), len(x)).astype(np.float64)
    cell_len = np.diff(in_edges)
    out_edges = np.concatenate([[0.0], np.cumsum(cell_len * f)])
    total_out = int(round(out_edges[-1]))

    hann = get_window("hann", win, fftbins=True)
    hop_out = win // 4
    search = int(round(WSOLA_SEARCH * rate))

    num = np.zeros(total_out + win)
    den = np.zeros(total_out + win)
    prev_start = None
    o = 0
    while o < total_out:
        u_center = np.interp(o + win / 2.0, out_edges, in_edges)
        base = int(round(u_center)) - win // 2
        base = min(max(base, 0), len(x) - win)
        if prev_start is None:
            start = base
        else:
            lo = max(0, base - search)
            hi = min(len(x) - win, base + search)
            if hi <= lo:
                start = base
            else:
                rs = min(prev_start + hop_out, len(x) - win)
                ref = x[rs : rs + win]
                cands = np.lib.stride_tricks.sliding_window_view(x[lo : hi + win], win)
                scores = cands @ ref
                norms = np.linalg.norm(cands, axis=1) * (np.linalg.norm(ref) + 1e-12)
                start = lo + int(np.argmax(scores / (norms + 1e-12)))
        num[o : o + win] += x[start : start + win] * hann
        den[o : o + win] += hann
        prev_start = start
        o += hop_out

    out = np.zeros(total_out + win)
    ok = den > 1e-8
    out[ok] = num[ok] / den[ok]
    return AudioClip(out[:total_out], rate, clip.id)


def match_rate(normal: AudioClip, clp: AudioClip) -> AudioClip:
    """Re-time `normal` so its speaking rate follows the paired reference."""
    feats_n, _ = extract_features(normal)
    feats_c, _ = extract_features(clp)
    path = dtw_align(feats_n, feats_c)
    curve = path_to_rate_curve(path, feats_n.frame_shift)
    return apply_rate(normal, curve)
