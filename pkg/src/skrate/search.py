"""Golden-section and bisection helpers (vectorized where it pays)."""

from __future__ import annotations

import math

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(f, lo, hi, tol=1e-10, max_iter=200):
    """Maximize a unimodal ``f`` on ``[lo, hi]`` by golden-section search.

    ``lo`` and ``hi`` may be arrays, in which case ``f`` must be vectorized
    and every interval is searched simultaneously.  Returns ``(x, f(x))``.
    Ties go to the left (smaller) argument.
    """
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)
    for _ in range(max_iter):
        if np.all(np.abs(b - a) <= tol * np.maximum(1.0, np.abs(a) + np.abs(b))):
            break
        c = b - INV_PHI * (b - a)
        d = a + INV_PHI * (b - a)
        left = f(c) >= f(d)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    # the end points can beat the midpoint on monotone objectives
    cand = np.stack([a, 0.5 * (a + b), b])
    vals = np.stack([f(a), f(0.5 * (a + b)), f(b)])
    best = np.argmax(vals, axis=0)
    x = np.take_along_axis(cand, np.expand_dims(best, 0), 0)[0]
    fx = np.take_along_axis(vals, np.expand_dims(best, 0), 0)[0]
    if x.ndim == 0:
        return float(x), float(fx)
    return x, fx


def grid_then_golden(f, lo, hi, n_grid=17, tol=1e-8):
    """Scalar maximization: coarse grid scan, then golden section on the best bracket.

    Guards against local optima that a bare golden-section search would
    lock onto when the objective is only approximately unimodal.
    """
    xs = np.linspace(lo, hi, n_grid)
    vals = np.array([f(x) for x in xs])
    i = int(np.argmax(vals))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, n_grid - 1)]
    x, fx = golden_max(lambda t: np.vectorize(f)(t), a, b, tol=tol)
    if fx < vals[i]:
        return float(xs[i]), float(vals[i])
    return x, fx


def bisect_decreasing(g, target, lo, hi, tol=1e-12, max_iter=200):
    """Find ``x`` in ``[lo, hi]`` with ``g(x) ~ target`` for non-increasing ``g``.

    Returns the bracket ``(x_lo, x_hi)`` with ``g(x_lo) >= target >= g(x_hi)``.
    """
    for _ in range(max_iter):
        if hi - lo <= tol * max(1.0, abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if g(mid) >= target:
            lo = mid
        else:
            hi = mid
    return lo, hi
