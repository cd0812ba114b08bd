# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled projected-subgradient kernel; see ``_kernels_py`` for the maths."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log1p, sqrt, fabs, INFINITY

cnp.import_array()


cdef double _value_grad(double[::1] x, double[:, ::1] a, double[:, ::1] b, double[::1] nstar,
                        double[::1] alpha, double[::1] gamma, double theta, double beta,
                        int m, int k, double[::1] g) noexcept nogil:
    cdef int i, j, nj = a.shape[1]
    cdef double val = 0.0, lin, den, acc, u, l1, gap, o, p
    for i in range(m):
        lin = 2.0 * nstar[i] * x[i] - nstar[i] * nstar[i]
        acc = 0.0
        for j in range(nj):
            den = a[i, j] + b[i, j] * lin
            val += 1.0 / den
            acc += 2.0 * b[i, j] * nstar[i] / (den * den)
        g[i] = -acc
    for i in range(k):
        o = x[m + i]
        p = x[m + k + i]
        u = alpha[i] * p / o
        l1 = log1p(u)
        gap = gamma[i] - theta * o * l1
        if gap > 0:
            val += beta * gap
            g[m + i] = -beta * theta * (l1 - u / (1.0 + u))
            g[m + k + i] = -beta * theta * alpha[i] / (1.0 + u)
        else:
            g[m + i] = 0.0
            g[m + k + i] = 0.0
    return val


cdef inline double _clip(double v, double lo, double hi) noexcept nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


cdef void _project_group(double[::1] v, double[::1] lo, double[::1] hi, double[::1] s,
                         double budget, int start, int stop, double[::1] out) noexcept nogil:
    cdef int i, it
    cdef double tot = 0.0, t_lo = 0.0, t_hi = 0.0, t, r
    for i in range(start, stop):
        out[i] = _clip(v[i], lo[i], hi[i])
        tot += out[i]
    if tot <= budget:
        return
    for i in range(start, stop):
        r = (v[i] - lo[i]) / (s[i] * s[i])
        if r > t_hi:
            t_hi = r
    for it in range(100):
        t = 0.5 * (t_lo + t_hi)
        tot = 0.0
        for i in range(start, stop):
            tot += _clip(v[i] - t * s[i] * s[i], lo[i], hi[i])
        if tot > budget:
            t_lo = t
        else:
            t_hi = t
        if t_hi - t_lo <= 1e-15 * (t_hi if t_hi > 1e-300 else 1e-300):
            break
    for i in range(start, stop):
        out[i] = _clip(v[i] - t_hi * s[i] * s[i], lo[i], hi[i])


cdef void _project(double[::1] v, double[::1] lb, double[::1] ub, double[::1] s, int m, int k,
                   double ru_budget, double power_budget, double[::1] out) noexcept nogil:
    _project_group(v, lb, ub, s, ru_budget, 0, m + k, out)
    if k > 0:
        _project_group(v, lb, ub, s, power_budget, m + k, m + 2 * k, out)


def penalized_value(x, a, b, nstar, alpha, gamma, double theta, double beta, int m):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=float)
    cdef double[::1] g = np.empty(xv.shape[0])
    return _value_grad(xv, np.ascontiguousarray(a, dtype=float),
                       np.ascontiguousarray(b, dtype=float),
                       np.ascontiguousarray(nstar, dtype=float),
                       np.ascontiguousarray(alpha, dtype=float),
                       np.ascontiguousarray(gamma, dtype=float), theta, beta, m,
                       np.asarray(alpha).shape[0], g)


def project(x, lb, ub, scale, int m, int k, double ru_budget, double power_budget):
    out = np.empty(np.asarray(x).shape[0])
    _project(np.ascontiguousarray(x, dtype=float), np.ascontiguousarray(lb, dtype=float),
             np.ascontiguousarray(ub, dtype=float), np.ascontiguousarray(scale, dtype=float),
             m, k, ru_budget, power_budget, out)
    return out


def psg_solve(x0, lb_, ub_, a_, b_, nstar_, alpha_, gamma_, double theta, double beta,
              double ru_budget, double power_budget, int max_iter=5000, int epoch=40,
              double step0=0.25, double tol=1e-7):
    cdef double[::1] lb = np.ascontiguousarray(lb_, dtype=float)
    cdef double[::1] ub = np.ascontiguousarray(ub_, dtype=float)
    cdef double[:, ::1] a = np.ascontiguousarray(a_, dtype=float)
    cdef double[:, ::1] b = np.ascontiguousarray(b_, dtype=float)
    cdef double[::1] nstar = np.ascontiguousarray(nstar_, dtype=float)
    cdef double[::1] alpha = np.ascontiguousarray(alpha_, dtype=float)
    cdef double[::1] gamma = np.ascontiguousarray(gamma_, dtype=float)
    cdef int m = nstar.shape[0], k = alpha.shape[0], nx = m + 2 * k
    cdef int i, t, it = 0
    cdef double c = step0, f, f_best, norm = 1.0, step, residual = INFINITY, d

    scale_np = np.maximum(np.asarray(ub_, dtype=float) - np.asarray(lb_, dtype=float), 1e-12)
    cdef double[::1] scale = scale_np
    x_np = np.empty(nx)
    cdef double[::1] x = x_np
    cdef double[::1] trial = np.empty(nx)
    cdef double[::1] g = np.empty(nx)
    best_np = np.empty(nx)
    cdef double[::1] best = best_np
    cdef double[::1] start = np.empty(nx)

    _project(np.ascontiguousarray(x0, dtype=float), lb, ub, scale, m, k, ru_budget,
             power_budget, x)
    with nogil:
        f_best = _value_grad(x, a, b, nstar, alpha, gamma, theta, beta, m, k, g)
        for i in range(nx):
            best[i] = x[i]
        while it < max_iter:
            for i in range(nx):
                x[i] = best[i]
                start[i] = best[i]
            for t in range(1, epoch + 1):
                f = _value_grad(x, a, b, nstar, alpha, gamma, theta, beta, m, k, g)
                if f < f_best:
                    f_best = f
                    for i in range(nx):
                        best[i] = x[i]
                norm = 0.0
                for i in range(nx):
                    if (x[i] <= lb[i] and g[i] > 0) or (x[i] >= ub[i] and g[i] < 0):
                        g[i] = 0.0
                    norm += (g[i] * scale[i]) * (g[i] * scale[i])
                norm = sqrt(norm)
                it += 1
                if norm == 0.0 or it >= max_iter:
                    break
                step = c / sqrt(<double>t) / norm
                for i in range(nx):
                    trial[i] = x[i] - step * scale[i] * scale[i] * g[i]
                _project(trial, lb, ub, scale, m, k, ru_budget, power_budget, x)
            f = _value_grad(x, a, b, nstar, alpha, gamma, theta, beta, m, k, g)
            if f < f_best:
                f_best = f
                for i in range(nx):
                    best[i] = x[i]
            residual = 0.0
            for i in range(nx):
                d = fabs(best[i] - start[i]) / scale[i]
                if d > residual:
                    residual = d
            if norm == 0.0 or 2.0 * c * sqrt(<double>epoch) < tol:
                break
            c *= 0.5
    return best_np, f_best, it, residual
