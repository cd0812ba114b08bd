"""Bandwidth/RB/user-power block: penalty loop around successive convex approximation.

Sensing information grows with ``n_m^2`` while throughput is jointly concave
in ``(o, p)``, so each user's relaxed RBs can be pooled into a single total
``O_k`` spread evenly over its ``I`` mini-slots without loss: the throughput
gap is convex and symmetric in the per-slot counts, so the even split is
optimal for any fixed total.  The block therefore works on
``x = [n (M), O (K), p_k (K)]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..channel import LN2, required_power
from ..config import ScenarioConfig
from ..estimation import ScalarizedPcrb
from ..kernels import psg_solve
from .power import InfeasibleError


@dataclass
class RelaxedAllocation:
    n: np.ndarray  # (M,) continuous target RBs
    o: np.ndarray  # (K, I) continuous user RBs per mini-slot
    p_k: np.ndarray  # (K,) user powers
    z: np.ndarray  # (M, 4) auxiliaries, 1/z <= a + b n^2
    p_m: np.ndarray  # (M,) target powers the block was solved under
    beam_idx: np.ndarray  # (K,) codebook indices
    user_gains: np.ndarray  # (K,) |h f|^2 under those beams
    gammas: np.ndarray  # (K,)

    @property
    def user_totals(self) -> np.ndarray:
        return self.o.sum(axis=1)


@dataclass
class SolveDiagnostics:
    outer_iterations: int = 0
    sca_iterations: list = field(default_factory=list)
    penalty_final: float = float("nan")
    objective_trace: list = field(default_factory=list)
    kkt_residual: float = float("nan")
    feasibility_repair_applied: bool = False
    sca_traces: list = field(default_factory=list)
    qos_regressions: int = 0
    inner_iterations: int = 0


@dataclass(frozen=True)
class _BlockData:
    a: np.ndarray
    b: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    theta: float

    def sensing(self, n):
        return float(np.sum(1.0 / (self.a + self.b * (n * n)[:, None])))

    def gaps(self, o_tot, p):
        return self.gamma - self.theta * o_tot * np.log1p(self.alpha * p / o_tot)


def _split(x, m, k):
    return x[:m], x[m:m + k], x[m + k:]


def _spread(room: np.ndarray, amount: float) -> np.ndarray:
    """Add up to ``amount`` in proportion to ``room`` without exceeding it."""
    tot = room.sum()
    if tot <= 0 or amount <= 0:
        return np.zeros_like(room)
    return room * min(1.0, amount / tot)


def solve_bandwidth_power_block(scal: list[ScalarizedPcrb], gammas, gains, config: ScenarioConfig,
                                warm_start, power_budget: float,
                                ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, SolveDiagnostics]:
    """Minimize sensing PCRB over ``(n, O, p_k)`` for fixed target powers and beams.

    ``scal`` holds the per-target bandwidth scalarization (information in
    ``n^2``); ``gains`` are the users' ``|h f|^2`` under the fixed beams;
    ``warm_start`` is ``(n, O, p_k)``.  Returns ``(n, O, p_k, z, diagnostics)``.
    """
    m = len(scal)
    gammas = np.asarray(gammas, dtype=float)
    gains = np.asarray(gains, dtype=float)
    k = gammas.size
    slots, n_rb = config.num_minislots_per_frame, config.num_rbs
    n_req, ru = config.n_req, float(config.ru_budget)
    if power_budget < 0:
        raise InfeasibleError(f"user power budget is negative: {power_budget}")
    if m * n_req + k * slots > ru:
        raise InfeasibleError(
            f"RU budget {ru:.0f} below M*n_req + K*I = {m * n_req + k * slots}")

    b0, n0 = config.rb_bandwidth, config.noise_psd
    data = _BlockData(np.array([s.a for s in scal]), np.array([s.b for s in scal]),
                      slots * gains / (b0 * n0), gammas,
                      config.throughput_scale * b0 / LN2)
    lb = np.concatenate([np.full(m, float(n_req)), np.full(k, float(slots)), np.zeros(k)])
    ub = np.concatenate([np.full(m, float(n_rb)), np.full(k, float(slots * n_rb)),
                         np.full(k, max(power_budget, 0.0))])
    n0_, o0, p0 = (np.asarray(v, dtype=float) for v in warm_start)
    x = np.clip(np.concatenate([n0_, o0, p0]), lb, ub)

    def penalized(x, beta):
        n, o, p = _split(x, m, k)
        val = data.sensing(n)
        if k:
            val += beta * float(np.sum(np.maximum(data.gaps(o, p), 0.0)))
        return val

    diag = SolveDiagnostics()
    beta = config.penalty_init
    tol = config.convergence_tol
    gamma_scale = np.maximum(gammas, 1.0)
    for _ in range(config.max_penalty_rounds):
        trace = [penalized(x, beta)]
        sca_its = 0
        for _ in range(config.max_sca_iterations):
            nstar = x[:m].copy()
            # trust bound keeps the linearized information 2 n* n - n*^2 positive
            lo = lb.copy()
            lo[:m] = np.maximum(lb[:m], 0.5 * nstar)
            x_new, _, its, resid = psg_solve(
                x, lo, ub, data.a, data.b, nstar, data.alpha, data.gamma, data.theta, beta,
                ru, power_budget, max_iter=config.inner_max_iterations)
            diag.inner_iterations += its
            diag.kkt_residual = float(resid)
            lin = 2.0 * nstar * x_new[:m] - nstar**2
            if np.any(lin > x_new[:m] ** 2 * (1 + 1e-12)):
                raise AssertionError("linearized information exceeds n^2")
            val = penalized(x_new, beta)
            sca_its += 1
            if val > trace[-1]:
                break
            reduction = (trace[-1] - val) / max(abs(trace[-1]), np.finfo(float).tiny)
            x = x_new
            trace.append(val)
            if reduction < tol:
                break
        diag.sca_iterations.append(sca_its)
        diag.sca_traces.append(trace)
        diag.penalty_final = beta
        if k == 0 or np.all(data.gaps(x[m:m + k], x[m + k:]) <= 1e-6 * gamma_scale):
            break
        beta *= config.penalty_growth

    n, o_tot, p = (v.copy() for v in _split(x, m, k))
    # hand unused RUs to the targets, then to the users; neither can hurt
    left = ru - n.sum() - o_tot.sum()
    add = _spread(n_rb - n, left)
    n += add
    left -= add.sum()
    o_tot += _spread(slots * n_rb - o_tot, left)
    n, o_tot = np.minimum(n, n_rb), np.minimum(o_tot, slots * n_rb)
    # release user power beyond what each met threshold needs
    for j in range(k):
        if data.gaps(o_tot[j:j + 1], p[j:j + 1])[0] <= 0:
            need = required_power(np.full(slots, o_tot[j] / slots), gains[j], gammas[j], config)
            p[j] = min(p[j], need * (1 + 1e-12))
    z = 1.0 / (data.a + data.b * (n * n)[:, None])
    return n, o_tot, p, z, diag
