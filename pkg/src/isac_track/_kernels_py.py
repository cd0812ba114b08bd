"""Pure numpy implementation of the projected-subgradient kernel.

Mirrors ``_kernels.pyx`` exactly; used when the compiled extension is not
available or when ``ISAC_TRACK_PURE_PYTHON=1``.

The decision vector is ``x = [n (M), O (K), p (K)]`` where ``O_k`` is the
total RB count of user ``k`` spread evenly over its mini-slots.  The
minimized function is::

    sum_m sum_j 1 / (a_mj + b_mj (2 n*_m n_m - n*_m^2))
      + beta * sum_k max(gamma_k - theta O_k log(1 + alpha_k p_k / O_k), 0)

over the box ``lb <= x <= ub`` intersected with ``sum n + sum O <= ru_budget``
and ``sum p <= power_budget``.
"""

from __future__ import annotations

import numpy as np


def penalized_value(x, a, b, nstar, alpha, gamma, theta, beta, m):
    n = x[:m]
    k = alpha.size
    o = x[m:m + k]
    p = x[m + k:]
    lin = 2.0 * nstar * n - nstar * nstar
    val = np.sum(1.0 / (a + b * lin[:, None]))
    if k:
        thr = theta * o * np.log1p(alpha * p / o)
        val += beta * np.sum(np.maximum(gamma - thr, 0.0))
    return float(val)


def _value_grad(x, a, b, nstar, alpha, gamma, theta, beta, m):
    k = alpha.size
    n = x[:m]
    o = x[m:m + k]
    p = x[m + k:]
    lin = 2.0 * nstar * n - nstar * nstar
    den = a + b * lin[:, None]
    val = np.sum(1.0 / den)
    g = np.zeros_like(x)
    g[:m] = -np.sum(2.0 * b * nstar[:, None] / (den * den), axis=1)
    if k:
        u = alpha * p / o
        l1 = np.log1p(u)
        gap = gamma - theta * o * l1
        act = gap > 0
        val += beta * np.sum(np.where(act, gap, 0.0))
        g[m:m + k] = np.where(act, -beta * theta * (l1 - u / (1.0 + u)), 0.0)
        g[m + k:] = np.where(act, -beta * theta * alpha / (1.0 + u), 0.0)
    return float(val), g


def _project_group(v, lo, hi, s, budget):
    """Euclidean projection (in ``x / s`` coordinates) onto box and ``sum x <= budget``."""
    y = np.clip(v, lo, hi)
    if y.sum() <= budget:
        return y
    t_lo, t_hi = 0.0, float(np.max((v - lo) / (s * s)))
    for _ in range(100):
        t = 0.5 * (t_lo + t_hi)
        if np.clip(v - t * s * s, lo, hi).sum() > budget:
            t_lo = t
        else:
            t_hi = t
        if t_hi - t_lo <= 1e-15 * max(t_hi, 1e-300):
            break
    return np.clip(v - t_hi * s * s, lo, hi)


def project(x, lb, ub, scale, m, k, ru_budget, power_budget):
    out = np.empty_like(x)
    r = m + k
    out[:r] = _project_group(x[:r], lb[:r], ub[:r], scale[:r], ru_budget)
    if k:
        out[r:] = _project_group(x[r:], lb[r:], ub[r:], scale[r:], power_budget)
    return out


def psg_solve(x0, lb, ub, a, b, nstar, alpha, gamma, theta, beta, ru_budget, power_budget,
              max_iter=5000, epoch=40, step0=0.25, tol=1e-7):
    """Projected normalized-subgradient descent with step ``c/sqrt(t)`` and restarts.

    Each epoch restarts from the best iterate so far and halves ``c``; the
    run stops once an epoch can no longer move farther than ``tol`` in
    box-scaled coordinates, or when the bound-projected subgradient vanishes.
    Returns ``(x_best, f_best, iterations, residual)`` where ``residual`` is the
    scaled displacement of the best iterate during the last epoch.
    """
    x0 = np.asarray(x0, dtype=float)
    m = nstar.size
    k = alpha.size
    scale = np.maximum(ub - lb, 1e-12)
    x = project(x0, lb, ub, scale, m, k, ru_budget, power_budget)
    f_best, _ = _value_grad(x, a, b, nstar, alpha, gamma, theta, beta, m)
    x_best = x.copy()
    c = step0
    it = 0
    residual = np.inf
    while it < max_iter:
        x = x_best.copy()
        start = x_best.copy()
        for t in range(1, epoch + 1):
            f, g = _value_grad(x, a, b, nstar, alpha, gamma, theta, beta, m)
            if f < f_best:
                f_best, x_best = f, x.copy()
            g[(x <= lb) & (g > 0)] = 0.0
            g[(x >= ub) & (g < 0)] = 0.0
            gs = g * scale
            norm = np.sqrt(np.dot(gs, gs))
            it += 1
            if norm == 0.0 or it >= max_iter:
                break
            x = project(x - (c / np.sqrt(t)) * scale * gs / norm, lb, ub, scale, m, k,
                        ru_budget, power_budget)
        f, _ = _value_grad(x, a, b, nstar, alpha, gamma, theta, beta, m)
        if f < f_best:
            f_best, x_best = f, x.copy()
        residual = float(np.max(np.abs(x_best - start) / scale))
        if norm == 0.0 or 2.0 * c * np.sqrt(epoch) < tol:
            break
        c *= 0.5
    return x_best, f_best, it, residual
