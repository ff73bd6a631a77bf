"""Independent reference implementations the fast paths are checked against.

These deliberately avoid sharing code or formulas with the package: the
room enumerator reflects positions recursively instead of using the lattice
closed form, and the alignment oracles enumerate paths instead of running
dynamic programming.
"""

from functools import lru_cache

import numpy as np


def brute_force_images(room):
    """Image-source arrivals by breadth-first mirror reflection with dedup.

    Reflecting across each of the six walls up to max_order times and
    keeping the first (lowest-order) visit of every position reproduces
    the image lattice and its amplitudes. Returns (delays, amplitudes)
    sorted by (delay, amplitude).
    """
    dims = np.asarray(room.dimensions)
    mic = np.asarray(room.mic)
    src = np.asarray(room.source, dtype=float)
    seen = {tuple(np.round(src, 9)): 1.0}
    frontier = [(src, 1.0)]
    for _ in range(room.max_order):
        nxt = []
        for pos, amp in frontier:
            for axis in range(3):
                for side in (0, 1):
                    p = pos.copy()
                    p[axis] = -pos[axis] if side == 0 else 2 * dims[axis] - pos[axis]
                    a = amp * room.reflection_coeffs[2 * axis + side]
                    key = tuple(np.round(p, 9))
                    if key not in seen:
                        seen[key] = a
                        nxt.append((p, a))
        frontier = nxt

    delays, amps = [], []
    for key, amp in seen.items():
        d = float(np.linalg.norm(np.asarray(key) - mic))
        delays.append(d / room.speed_of_sound)
        amps.append(amp / (4.0 * np.pi * d))
    delays = np.asarray(delays)
    amps = np.asarray(amps)
    idx = np.lexsort((amps, delays))
    return delays[idx], amps[idx]


@lru_cache(maxsize=None)
def _monotone_path_matrix(m, n):
    """All monotone step-constrained paths through an m x n grid.

    Padded matrix of flattened cell indices; the pad index m*n points at
    an appended zero-cost cell.
    """
    paths = []

    def walk(i, j, acc):
        if (i, j) == (m - 1, n - 1):
            paths.append(acc + [i * n + j])
            return
        if i + 1 < m:
            walk(i + 1, j, acc + [i * n + j])
        if j + 1 < n:
            walk(i, j + 1, acc + [i * n + j])
        if i + 1 < m and j + 1 < n:
            walk(i + 1, j + 1, acc + [i * n + j])

    walk(0, 0, [])
    width = max(len(p) for p in paths)
    mat = np.full((len(paths), width), m * n, dtype=np.int64)
    for r, p in enumerate(paths):
        mat[r, : len(p)] = p
    return mat

def exhaustive_dtw_cost(dist):
    """Minimum path cost by enumerating every monotone path (m, n <= 8)."""
    m, n = dist.shape
    mat = _monotone_path_matrix(m, n)
    flat = np.append(dist.ravel(), 0.0)
    return float(flat[mat].sum(axis=1).min())


def exhaustive_edit_distance(ref, hyp):
    """Minimum S+D+I by recursive enumeration of edit scripts."""
    from functools import lru_cache as _lru

    ref = tuple(ref)
    hyp = tuple(hyp)

    @_lru(maxsize=None)
    def best(i, j):
        if i == len(ref):
            return len(hyp) - j
        if j == len(hyp):
            return len(ref) - i
        candidates = [
            best(i + 1, j + 1) + (0 if ref[i] == hyp[j] else 1),
            best(i, j + 1) + 1,
            best(i + 1, j) + 1,
        ]
        return min(candidates)

    return best(0, 0)
