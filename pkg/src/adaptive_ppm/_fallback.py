"""Pure numpy stage maximization, vectorized across grid cells.

Same contract and evaluation sequence as the compiled ``_kernels`` module;
used when the extension is not built or when ``ADAPTIVE_PPM_BACKEND=python``.
"""

from __future__ import annotations

import numpy as np

from .search import INV_PHI, INV_PHI2, golden_iterations, scan_points

PROJECTIVE, GK = 0, 1
BACKWARD, LEAF = 0, 1
_BOUND_SLACK = 1e-12


def lookup_many(values, du, dv, nearest, x, y):
    values = np.asarray(values, dtype=float)
    nu, nv = values.shape
    fx = np.clip(np.asarray(x, dtype=float) / du, 0.0, nu - 1)
    fy = np.clip(np.asarray(y, dtype=float) / dv, 0.0, nv - 1)
    if nearest:
        return values[np.floor(fx + 0.5).astype(np.intp), np.floor(fy + 0.5).astype(np.intp)]
    i = np.minimum(fx.astype(np.intp), nu - 2)
    j = np.minimum(fy.astype(np.intp), nv - 2)
    t = fx - i
    s = fy - j
    flat = values.ravel()
    base = i * nv + j
    r0 = (1.0 - s) * flat[base] + s * flat[base + 1]
    r1 = (1.0 - s) * flat[base + nv] + s * flat[base + nv + 1]
    return (1.0 - t) * r0 + t * r1


def _kernel(family, theta, alpha, x, assoc):
    if family == PROJECTIVE:
        return np.cos(theta - x) ** 2, np.cos(theta + x) ** 2
    vac = np.exp(-x * x)
    pulse = np.exp(-(alpha - x) * (alpha - x))
    if assoc == 0:
        return vac, pulse
    return 1.0 - pulse, 1.0 - vac


class _Objective:
    def __init__(self, table, du, dv, nearest, family, objective, theta, alpha, u, v):
        self.table, self.du, self.dv, self.nearest = table, du, dv, nearest
        self.family, self.objective = family, objective
        self.theta, self.alpha = theta, alpha
        self.u, self.v = u, v

    def children(self, p00, p01):
        u, v = self.u, self.v
        p10, p11 = 1.0 - p00, 1.0 - p01
        look = lambda x, y: lookup_many(self.table, self.du, self.dv, self.nearest, x, y)
        return (look(p00 * u, p00 * v), look(p01 * v, p00 * v),
                look(p10 * u, p10 * v), look(p11 * v, p10 * v))

    def value(self, p00, p01):
        if self.objective == LEAF:
            return p00 * self.u + (1.0 - p01) * self.v
        k0, s0, k1, s1 = self.children(p00, p01)
        return np.where(k0 >= s0, k0, s0) + np.where(k1 >= s1, k1, s1)

    def at(self, x, assoc):
        return self.value(*_kernel(self.family, self.theta, self.alpha, x, assoc))


def _golden(obj, assoc, a, b, tol):
    widths = b - a
    uniq, inverse = np.unique(widths, return_inverse=True)
    iters = np.array([golden_iterations(float(w), tol) for w in uniq])[inverse.ravel()]
    xbest = np.empty_like(a)
    fbest = np.empty_like(a)
    for n in np.unique(iters):
        sel = iters == n
        aa, bb = a[sel], b[sel]
        sub = _Objective(obj.table, obj.du, obj.dv, obj.nearest, obj.family, obj.objective,
                         obj.theta, obj.alpha, obj.u[sel], obj.v[sel])
        if n == 0:
            x = 0.5 * (aa + bb)
            xbest[sel], fbest[sel] = x, sub.at(x, assoc)
            continue
        c = aa + INV_PHI2 * (bb - aa)
        d = aa + INV_PHI * (bb - aa)
        fc, fd = sub.at(c, assoc), sub.at(d, assoc)
        for _ in range(n - 1):
            left = fc >= fd
            right = ~left
            old_c, old_d = c, d
            bb = np.where(left, old_d, bb)
            aa = np.where(right, old_c, aa)
            fd_kept = np.where(left, fc, fd)
            fc_kept = np.where(right, fd, fc)
            c = np.where(left, aa + INV_PHI2 * (bb - aa), old_d)
            d = np.where(right, aa + INV_PHI * (bb - aa), old_c)
            f_new = sub.at(np.where(left, c, d), assoc)
            fc = np.where(left, f_new, fc_kept)
            fd = np.where(right, f_new, fd_kept)
        take_c = fc >= fd
        xbest[sel] = np.where(take_c, c, d)
        fbest[sel] = np.where(take_c, fc, fd)
    return xbest, fbest


def stage_update(next_values, du, dv, nu, nv, nearest, family, objective_code, theta, alpha,
                 lo, hi, n_scan, periodic, tol):
    """Maximize the stage objective at every grid cell.

    Returns ``(values, controls, branch, association, n_clamped)``.
    """
    table = np.zeros((nu, nv)) if next_values is None else np.ascontiguousarray(next_values, float)
    uu, vv = np.meshgrid(np.arange(nu) * du, np.arange(nv) * dv, indexing="ij")
    u, v = uu.ravel(), vv.ravel()
    obj = _Objective(table, du, dv, nearest, family, objective_code, theta, alpha, u, v)
    xs = scan_points(lo, hi, n_scan, periodic)
    step = (hi - lo) / n_scan if periodic else (hi - lo) / max(n_scan - 1, 1)

    f_cell = np.full(u.shape, -1.0)
    x_cell = np.zeros(u.shape)
    a_cell = np.zeros(u.shape, dtype=np.int8)
    for assoc in range(2 if family == GK else 1):
        fbest = np.full(u.shape, -1.0)
        kbest = np.zeros(u.shape, dtype=np.intp)
        for k, x in enumerate(xs):
            p00, p01 = _kernel(family, theta, alpha, x, assoc)
            f = obj.value(p00, p01)
            better = f > fbest
            fbest = np.where(better, f, fbest)
            kbest = np.where(better, k, kbest)
        lo_b = xs[kbest] - step
        hi_b = xs[kbest] + step
        if not periodic:
            lo_b = np.maximum(lo_b, lo)
            hi_b = np.minimum(hi_b, hi)
        xg, fg = _golden(obj, assoc, lo_b, hi_b, tol)
        improved = fg > fbest
        x_assoc = np.where(improved, xg, xs[kbest])
        f_assoc = np.where(improved, fg, fbest)
        better = f_assoc > f_cell
        f_cell = np.where(better, f_assoc, f_cell)
        x_cell = np.where(better, x_assoc, x_cell)
        a_cell = np.where(better, assoc, a_cell).astype(np.int8)
    if periodic:
        x_cell = np.mod(x_cell + 0.5 * np.pi, np.pi) - 0.5 * np.pi

    branch, clamped = _branch_and_clamp(obj, x_cell, a_cell, du * (nu - 1), dv * (nv - 1))
    shape = (nu, nv)
    return (f_cell.reshape(shape), x_cell.reshape(shape), branch.reshape(shape),
            a_cell.reshape(shape), int(clamped.sum()))


def _branch_and_clamp(obj, x, assoc, umax, vmax):
    p00 = np.empty_like(x)
    p01 = np.empty_like(x)
    for a in np.unique(assoc):
        sel = assoc == a
        p00[sel], p01[sel] = _kernel(obj.family, obj.theta, obj.alpha, x[sel], int(a))
    if obj.objective == LEAF:
        return np.ones(x.shape, dtype=np.int8), np.zeros(x.shape, dtype=bool)
    k0, s0, k1, s1 = obj.children(p00, p01)
    b0 = (k0 < s0).astype(np.int8)
    b1 = (k1 < s1).astype(np.int8)
    u, v = obj.u, obj.v
    p10, p11 = 1.0 - p00, 1.0 - p01
    ulim, vlim = umax * (1 + _BOUND_SLACK), vmax * (1 + _BOUND_SLACK)
    first0 = np.where(b0 == 0, p00 * u, p01 * v)
    first1 = np.where(b1 == 0, p10 * u, p11 * v)
    clamped = (first0 > ulim) | (first1 > ulim) | (p00 * v > vlim) | (p10 * v > vlim)
    return (2 * b0 + b1).astype(np.int8), clamped
