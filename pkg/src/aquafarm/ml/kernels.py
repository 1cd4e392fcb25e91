"""Hot numeric kernels for tree induction.

The split scan dominates fitting time for trees, forests and boosting
stages, so it ships in two interchangeable flavors: a numba @njit loop and
a vectorized pure-numpy fallback. Set AQF_NO_NUMBA=1 to force the numpy
path (or when numba is unavailable it is picked automatically). Both paths
perform the identical arithmetic in the identical order, so they return
bit-identical splits; tests and the benchmark rely on that.

Scan contract: given one feature column pre-sorted ascending (with y
reordered to match), evaluate every boundary between distinct neighbors as
a candidate threshold (midpoint), score it by the summed SSE of the two
children, and return the first (lowest-threshold) strict minimum.
"""

from __future__ import annotations

import os

import numpy as np

_INVALID = (np.inf, 0.0, False)


def _split_scan_py(xs, ys, min_leaf):
    n = xs.shape[0]
    if n < 2 * min_leaf:
        return np.inf, 0.0, False
    total1 = 0.0
    total2 = 0.0
    for i in range(n):
        total1 += ys[i]
        total2 += ys[i] * ys[i]
    best_cost = np.inf
    best_thr = 0.0
    found = False
    run1 = 0.0
    run2 = 0.0
    for i in range(n - 1):
        run1 += ys[i]
        run2 += ys[i] * ys[i]
        n_left = i + 1
        n_right = n - n_left
        if n_left < min_leaf or n_right < min_leaf or xs[i] >= xs[i + 1]:
            continue
        sse_left = run2 - run1 * run1 / n_left
        right1 = total1 - run1
        sse_right = (total2 - run2) - right1 * right1 / n_right
        cost = sse_left + sse_right
        if cost < best_cost:
            best_cost = cost
            best_thr = (xs[i] + xs[i + 1]) / 2.0
            found = True
    return best_cost, best_thr, found


def split_scan_numpy(xs: np.ndarray, ys: np.ndarray, min_leaf: int) -> tuple[float, float, bool]:
    """Vectorized scan; arithmetic mirrors the loop version exactly
    (np.cumsum accumulates left to right, like the running sums)."""
    n = xs.shape[0]
    if n < 2 * min_leaf:
        return _INVALID
    c1 = np.cumsum(ys)
    c2 = np.cumsum(ys * ys)
    total1 = c1[-1]
    total2 = c2[-1]
    i = np.arange(n - 1)
    n_left = i + 1.0
    n_right = n - n_left
    valid = (n_left >= min_leaf) & (n_right >= min_leaf) & (xs[:-1] < xs[1:])
    if not valid.any():
        return _INVALID
    sse_left = c2[:-1] - c1[:-1] * c1[:-1] / n_left
    right1 = total1 - c1[:-1]
    sse_right = (total2 - c2[:-1]) - right1 * right1 / n_right
    cost = np.where(valid, sse_left + sse_right, np.inf)
    best = int(np.argmin(cost))  # first occurrence = lowest threshold on ties
    return float(cost[best]), float((xs[best] + xs[best + 1]) / 2.0), True


def _want_numba() -> bool:
    return os.environ.get("AQF_NO_NUMBA", "").strip() not in ("1", "true", "yes")


split_scan_numba = None
if _want_numba():
    try:
        from numba import njit

        split_scan_numba = njit(cache=True)(_split_scan_py)
    except ImportError:
        split_scan_numba = None

split_scan = split_scan_numba if split_scan_numba is not None else split_scan_numpy
BACKEND = "numba" if split_scan_numba is not None else "numpy"
