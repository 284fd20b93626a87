"""Dynamic time warping for ranking candidate control series."""

from __future__ import annotations

import numpy as np
from numba import njit

from .exceptions import DimensionError, NumericalError, ValidationError


@njit(cache=True)
def _dtw_accumulated(a, b):
    n, m = a.size, b.size
    D = np.full((n + 1, m + 1), np.inf)
    D[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            c = (a[i - 1] - b[j - 1]) ** 2
            best = D[i - 1, j - 1]
            if D[i - 1, j] < best:
                best = D[i - 1, j]
            if D[i, j - 1] < best:
                best = D[i, j - 1]
            D[i, j] = c + best
    return D[n, m]


def standardize(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    sd = x.std()
    if sd <= 0:
        raise NumericalError("cannot standardize a constant series")
    return (x - x.mean()) / sd


def dtw_distance(a, b, normalize: bool = False) -> float:
    """DTW cost with squared local distance and an unconstrained window.

    Returns the square root of the minimal accumulated cost, so that for
    equal-length series it is never larger than the Euclidean distance.
    """
    a = np.ascontiguousarray(a, dtype=float).ravel()
    b = np.ascontiguousarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValidationError("series must be non-empty")
    if normalize:
        a, b = standardize(a), standardize(b)
    return float(np.sqrt(_dtw_accumulated(a, b)))


def dtw_preselect_controls(target, pool, top_n: int, standardize_series: bool = True):
    """Rank candidate controls by DTW cost against ``target``.

    Returns ``(indices, costs)`` for the ``top_n`` best candidates, sorted by
    ascending cost with ties broken by pool index.
    """
    target = np.asarray(target, dtype=float).ravel()
    pool = [np.asarray(p, dtype=float).ravel() for p in pool]
    if not pool:
        raise ValidationError("candidate pool is empty")
    if not 1 <= top_n <= len(pool):
        raise ValidationError(f"top_n must be in [1, {len(pool)}]")
    for i, p in enumerate(pool):
        if p.size != target.size:
            raise DimensionError(f"candidate {i} has length {p.size}, target has {target.size}")
    if standardize_series:
        target = standardize(target)
        pool = [standardize(p) for p in pool]
    costs = np.array([np.sqrt(_dtw_accumulated(target, p)) for p in pool])
    order = np.lexsort((np.arange(len(pool)), costs))[:top_n]
    return order, costs[order]
