# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-cell stage maximization.

Mirrors ``_fallback.stage_update`` evaluation for evaluation: same scan
abscissae, same golden-section schedule, same tie rules.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport cos, exp, floor, ceil, log, sqrt, fmod, M_PI

cnp.import_array()

cdef double INV_PHI = (sqrt(5.0) - 1.0) / 2.0
cdef double INV_PHI2 = (3.0 - sqrt(5.0)) / 2.0
cdef double BOUND_SLACK = 1e-12

cdef enum:
    PROJECTIVE = 0
    GK = 1

cdef enum:
    BACKWARD = 0
    LEAF = 1


cdef struct Ctx:
    const double* table
    int nu
    int nv
    double du
    double dv
    double umax
    double vmax
    int nearest
    int family
    int objective
    double theta
    double alpha


cdef inline double lookup(const Ctx* c, double x, double y) noexcept nogil:
    cdef double fx = x / c.du
    cdef double fy = y / c.dv
    cdef int i, j
    cdef double t, s
    if fx < 0.0:
        fx = 0.0
    elif fx > c.nu - 1:
        fx = c.nu - 1
    if fy < 0.0:
        fy = 0.0
    elif fy > c.nv - 1:
        fy = c.nv - 1
    if c.nearest:
        i = <int>floor(fx + 0.5)
        j = <int>floor(fy + 0.5)
        return c.table[i * c.nv + j]
    i = <int>fx
    j = <int>fy
    if i > c.nu - 2:
        i = c.nu - 2
    if j > c.nv - 2:
        j = c.nv - 2
    t = fx - i
    s = fy - j
    cdef const double* row0 = c.table + i * c.nv + j
    cdef const double* row1 = row0 + c.nv
    return ((1.0 - t) * ((1.0 - s) * row0[0] + s * row0[1])
            + t * ((1.0 - s) * row1[0] + s * row1[1]))


cdef inline void kernel(const Ctx* c, double x, int assoc,
                        double* p00, double* p01) noexcept nogil:
    # p00 = P(0 | g0), p01 = P(0 | g1)
    cdef double a, b
    if c.family == PROJECTIVE:
        a = cos(c.theta - x)
        b = cos(c.theta + x)
        p00[0] = a * a
        p01[0] = b * b
    else:
        a = exp(-x * x)                                  # no click on vacuum
        b = exp(-(c.alpha - x) * (c.alpha - x))          # no click on pulse
        if assoc == 0:
            p00[0] = a
            p01[0] = b
        else:
            p00[0] = 1.0 - b
            p01[0] = 1.0 - a


cdef inline double objective(const Ctx* c, double u, double v,
                             double p00, double p01) noexcept nogil:
    cdef double p10 = 1.0 - p00
    cdef double p11 = 1.0 - p01
    cdef double k0, s0, k1, s1
    if c.objective == LEAF:
        return p00 * u + p11 * v
    k0 = lookup(c, p00 * u, p00 * v)
    s0 = lookup(c, p01 * v, p00 * v)
    k1 = lookup(c, p10 * u, p10 * v)
    s1 = lookup(c, p11 * v, p10 * v)
    return (k0 if k0 >= s0 else s0) + (k1 if k1 >= s1 else s1)


cdef inline double eval_at(const Ctx* c, double u, double v, double x, int assoc) noexcept nogil:
    cdef double p00, p01
    kernel(c, x, assoc, &p00, &p01)
    return objective(c, u, v, p00, p01)


cdef inline int golden_iterations(double width, double tol) noexcept nogil:
    if width <= tol:
        return 0
    return <int>ceil(log(tol / width) / log(INV_PHI))


cdef inline double golden(const Ctx* c, double u, double v, int assoc,
                          double a, double b, double tol, double* xbest) noexcept nogil:
    cdef int n = golden_iterations(b - a, tol)
    cdef int it
    cdef double cc, d, fc, fd
    if n == 0:
        xbest[0] = 0.5 * (a + b)
        return eval_at(c, u, v, xbest[0], assoc)
    cc = a + INV_PHI2 * (b - a)
    d = a + INV_PHI * (b - a)
    fc = eval_at(c, u, v, cc, assoc)
    fd = eval_at(c, u, v, d, assoc)
    for it in range(n - 1):
        if fc >= fd:
            b = d
            d = cc
            fd = fc
            cc = a + INV_PHI2 * (b - a)
            fc = eval_at(c, u, v, cc, assoc)
        else:
            a = cc
            cc = d
            fc = fd
            d = a + INV_PHI * (b - a)
            fd = eval_at(c, u, v, d, assoc)
    if fc >= fd:
        xbest[0] = cc
        return fc
    xbest[0] = d
    return fd


cdef inline int branch_and_clamp(const Ctx* c, double u, double v, double x, int assoc,
                                 int* clamped) noexcept nogil:
    cdef double p00, p01, p10, p11
    cdef double k0, s0, k1, s1
    cdef int b0, b1
    kernel(c, x, assoc, &p00, &p01)
    p10 = 1.0 - p00
    p11 = 1.0 - p01
    clamped[0] = 0
    if c.objective == LEAF:
        return 1
    k0 = lookup(c, p00 * u, p00 * v)
    s0 = lookup(c, p01 * v, p00 * v)
    k1 = lookup(c, p10 * u, p10 * v)
    s1 = lookup(c, p11 * v, p10 * v)
    b0 = 0 if k0 >= s0 else 1
    b1 = 0 if k1 >= s1 else 1
    if (b0 == 0 and p00 * u > c.umax * (1 + BOUND_SLACK)) or \
       (b0 == 1 and p01 * v > c.umax * (1 + BOUND_SLACK)) or \
       (b1 == 0 and p10 * u > c.umax * (1 + BOUND_SLACK)) or \
       (b1 == 1 and p11 * v > c.umax * (1 + BOUND_SLACK)) or \
       (p00 * v > c.vmax * (1 + BOUND_SLACK)) or (p10 * v > c.vmax * (1 + BOUND_SLACK)):
        clamped[0] = 1
    return 2 * b0 + b1


def stage_update(next_values, double du, double dv, int nu, int nv, bint nearest,
                 int family, int objective_code, double theta, double alpha,
                 double lo, double hi, int n_scan, bint periodic, double tol):
    """Maximize the stage objective at every grid cell.

    Returns ``(values, controls, branch, association, n_clamped)``.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] tab
    if next_values is None:
        tab = np.zeros((nu, nv))
    else:
        tab = np.ascontiguousarray(next_values, dtype=np.float64)
    cdef Ctx c
    c.table = <const double*> tab.data
    c.nu = nu
    c.nv = nv
    c.du = du
    c.dv = dv
    c.umax = du * (nu - 1)
    c.vmax = dv * (nv - 1)
    c.nearest = nearest
    c.family = family
    c.objective = objective_code
    c.theta = theta
    c.alpha = alpha

    cdef int n_assoc = 2 if family == GK else 1
    xs_np = np.array(
        lo + (hi - lo) * np.arange(n_scan) / n_scan if periodic else np.linspace(lo, hi, n_scan),
        dtype=np.float64)
    cdef double[::1] xs = xs_np
    cdef double step = (hi - lo) / n_scan if periodic else (hi - lo) / max(n_scan - 1, 1)
    cdef double[:, ::1] sp00 = np.empty((n_assoc, n_scan))
    cdef double[:, ::1] sp01 = np.empty((n_assoc, n_scan))
    cdef int a_, k
    for a_ in range(n_assoc):
        for k in range(n_scan):
            kernel(&c, xs[k], a_, &sp00[a_, k], &sp01[a_, k])

    values_np = np.empty((nu, nv))
    controls_np = np.empty((nu, nv))
    branch_np = np.empty((nu, nv), dtype=np.int8)
    assoc_np = np.zeros((nu, nv), dtype=np.int8)
    clamp_np = np.zeros(nu, dtype=np.int64)
    cdef double[:, ::1] values = values_np
    cdef double[:, ::1] controls = controls_np
    cdef signed char[:, ::1] branch = branch_np
    cdef signed char[:, ::1] assoc_out = assoc_np
    cdef long long[::1] clamps = clamp_np

    cdef int i, j, kbest, a_best, clamped
    cdef double u, v, f, fbest, xg, fg, lo_b, hi_b, x_cell, f_cell, xg_best
    for i in prange(nu, nogil=True, schedule="dynamic"):
        u = i * du
        for j in range(nv):
            v = j * dv
            f_cell = -1.0
            x_cell = 0.0
            a_best = 0
            for a_ in range(n_assoc):
                fbest = -1.0
                kbest = 0
                for k in range(n_scan):
                    f = objective(&c, u, v, sp00[a_, k], sp01[a_, k])
                    if f > fbest:
                        fbest = f
                        kbest = k
                lo_b = xs[kbest] - step
                hi_b = xs[kbest] + step
                if not periodic:
                    if lo_b < lo:
                        lo_b = lo
                    if hi_b > hi:
                        hi_b = hi
                fg = golden(&c, u, v, a_, lo_b, hi_b, tol, &xg)
                if fg > fbest:
                    fbest = fg
                    xg_best = xg
                else:
                    xg_best = xs[kbest]
                if fbest > f_cell:
                    f_cell = fbest
                    x_cell = xg_best
                    a_best = a_
            if periodic:
                x_cell = fmod(x_cell + 0.5 * M_PI, M_PI)
                if x_cell < 0:
                    x_cell = x_cell + M_PI
                x_cell = x_cell - 0.5 * M_PI
            values[i, j] = f_cell
            controls[i, j] = x_cell
            assoc_out[i, j] = a_best
            branch[i, j] = branch_and_clamp(&c, u, v, x_cell, a_best, &clamped)
            clamps[i] += clamped
    return values_np, controls_np, branch_np, assoc_np, int(clamp_np.sum())


def lookup_many(values, double du, double dv, bint nearest, x, y):
    """Interpolate ``values`` at the points ``(x, y)`` (same rule as the stage loop)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] tab = np.ascontiguousarray(values, dtype=np.float64)
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64).ravel()
    out_np = np.empty(xv.shape[0])
    cdef double[::1] out = out_np
    cdef Ctx c
    c.table = <const double*> tab.data
    c.nu = tab.shape[0]
    c.nv = tab.shape[1]
    c.du = du
    c.dv = dv
    c.nearest = nearest
    cdef Py_ssize_t n
    for n in range(xv.shape[0]):
        out[n] = lookup(&c, xv[n], yv[n])
    return out_np.reshape(np.shape(x))
