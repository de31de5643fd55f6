"""One-dimensional maximization: uniform scan followed by golden-section.

The compiled and numpy stage kernels replicate exactly this sequence of
evaluation points, so a change here must be mirrored in ``_kernels.pyx``
and ``_fallback.py``.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0


def golden_iterations(width: float, tol: float) -> int:
    """Number of golden-section shrink steps to bring ``width`` below ``tol``."""
    if width <= tol:
        return 0
    return int(math.ceil(math.log(tol / width) / math.log(INV_PHI)))


def golden_max(f: Callable[[float], float], a: float, b: float, tol: float = 1e-8):
    """Maximize ``f`` on ``[a, b]``; returns ``(x, f(x))``.

    Ties move the bracket left, so the result is deterministic.
    """
    n = golden_iterations(b - a, tol)
    if n == 0:
        x = 0.5 * (a + b)
        return x, f(x)
    c = a + INV_PHI2 * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(n - 1):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = a + INV_PHI2 * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def scan_points(lo: float, hi: float, n: int, periodic: bool) -> np.ndarray:
    """Scan abscissae; a periodic interval excludes its right end."""
    if periodic:
        return lo + (hi - lo) * np.arange(n) / n
    return np.linspace(lo, hi, n)


def scan_then_refine(f: Callable[[float], float], lo: float, hi: float, n_scan: int,
                     tol: float = 1e-8, periodic: bool = False):
    """Global scan over ``n_scan`` points, then golden refinement around the best.

    Returns ``(x, value)``. The refinement bracket is one scan step on each
    side of the best point; for a periodic domain the result is not wrapped.
    """
    xs = scan_points(lo, hi, n_scan, periodic)
    vals = np.array([f(x) for x in xs])
    i = int(np.argmax(vals))
    step = (hi - lo) / n_scan if periodic else (hi - lo) / max(n_scan - 1, 1)
    a, b = xs[i] - step, xs[i] + step
    if not periodic:
        a, b = max(a, lo), min(b, hi)
    xg, fg = golden_max(f, a, b, tol)
    if fg > vals[i]:
        return xg, fg
    return float(xs[i]), float(vals[i])


def scan_then_refine_min(f, lo, hi, n_scan, tol=1e-10):
    """Minimization counterpart of :func:`scan_then_refine` (bounded domain)."""
    x, v = scan_then_refine(lambda t: -f(t), lo, hi, n_scan, tol)
    return x, -v
