"""Beam search and the water-filling solve for target powers."""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from ..channel import Codebook
from ..estimation import ScalarizedPcrb


class InfeasibleError(RuntimeError):
    pass


def select_beam(h: np.ndarray, p_k: float, o_k, codebook: Codebook, config=None) -> int:
    """Codebook index maximizing ``|h f|^2``; lowest index wins ties.

    The per-slot SNR ``p |h f|^2 / (o B0 N0)`` is a positive multiple of
    ``|h f|^2``, so ``p_k`` and ``o_k`` cannot change the argmax and are
    accepted only for call-site symmetry.
    """
    if len(codebook) == 0:
        raise ValueError("codebook is empty")
    gains = np.abs(codebook.beams @ h) ** 2
    return int(np.argmax(gains))


def select_beams(channels: np.ndarray, codebook: Codebook) -> np.ndarray:
    if len(channels) == 0:
        return np.zeros(0, dtype=int)
    gains = np.abs(np.asarray(channels) @ codebook.beams.T) ** 2
    return np.argmax(gains, axis=1)


def _marginal(a, b, p):
    """``sum_j b / (a + b p)^2`` per target and its derivative in ``p``."""
    w = a + b * p[:, None]
    return np.sum(b / w**2, axis=1), -2.0 * np.sum(b * b / w**3, axis=1)


def _invert_marginal(a, b, mu, h0):
    """Per-target ``p >= 0`` with marginal equal to ``mu`` (0 where ``h(0) <= mu``).

    Newton on ``h(p)^(-1/2)``, which is exactly linear for a single term, with
    a bracketing fallback.
    """
    m = a.shape[0]
    p = np.zeros(m)
    active = h0 > mu
    if not np.any(active):
        return p
    aa, bb = a[active], b[active]
    lo = np.zeros(aa.shape[0])
    # single dominant term gives an upper bracket: h(p) <= sum_j b_j / (a_j + b_j p)^2
    hi = np.max((np.sqrt(bb.shape[1] * bb / mu) - aa) / np.where(bb > 0, bb, np.inf), axis=1)
    hi = np.maximum(hi, 0.0) + 1e-300
    x = lo.copy()
    target = mu ** -0.5
    for _ in range(100):
        h, dh = _marginal(aa, bb, x)
        g = h ** -0.5 - target
        lo = np.where(g < 0, np.maximum(lo, x), lo)
        hi = np.where(g >= 0, np.minimum(hi, x), hi)
        dg = -0.5 * h ** -1.5 * dh
        step = np.where(dg > 0, -g / np.where(dg > 0, dg, 1.0), 0.0)
        nxt = x + step
        bad = ~((nxt > lo) & (nxt < hi))
        nxt = np.where(bad, 0.5 * (lo + hi), nxt)
        if np.all(np.abs(nxt - x) <= 1e-15 * np.maximum(np.abs(nxt), 1e-300)):
            x = nxt
            break
        x = nxt
    p[active] = x
    return p


def solve_power_block(scal: list[ScalarizedPcrb], budget: float) -> tuple[np.ndarray, float]:
    """Minimize ``sum_m sum_j 1/(a_mj + b_mj p_m)`` over ``sum p <= budget``, ``p >= 0``.

    Returns ``(p, kkt_residual)``; the residual is ``|sum p - budget|`` in watts
    (the objective is nonincreasing in every ``p_m``, so the budget binds).
    """
    if not budget > 0:
        raise InfeasibleError(f"target power budget must be positive, got {budget}")
    a = np.array([s.a for s in scal])
    b = np.array([s.b for s in scal])
    m = a.shape[0]
    h0 = np.sum(b / a**2, axis=1)
    if np.all(h0 == 0):
        return np.full(m, budget / m), 0.0
    if m == 1:
        return np.array([budget]), 0.0

    def excess(log_mu):
        return _invert_marginal(a, b, np.exp(log_mu), h0).sum() - budget

    hi = np.log(h0.max())
    lo = hi - 1.0
    while excess(lo) < 0:
        lo -= 2.0 * (hi - lo)
    log_mu = brentq(excess, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    p = _invert_marginal(a, b, np.exp(log_mu), h0)
    total = p.sum()
    if total > 0:
        p *= budget / total
    return p, float(abs(p.sum() - budget))


def marginals(scal: list[ScalarizedPcrb], p: np.ndarray) -> np.ndarray:
    return np.array([-s.slope(pi) for s, pi in zip(scal, p)])
