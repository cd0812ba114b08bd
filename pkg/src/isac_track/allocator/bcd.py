"""Block coordinate descent over the two allocation blocks of one frame."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channel import Codebook, build_codebook, throughput_from_gain
from ..config import ScenarioConfig
from ..dynamics import measurement_cov
from ..estimation import (ScalarizedPcrb, posterior_pcrb, scalarize, scalarize_bandwidth,
                          scalarize_power)
from ..scenario import Allocation
from .power import select_beams, solve_power_block
from .rounding import round_and_repair
from .sca import RelaxedAllocation, SolveDiagnostics, solve_bandwidth_power_block


@dataclass(frozen=True)
class FrameProblem:
    """Everything the allocator may see in one frame (predicted, never true, target state).

    ``unit_gains`` are the predicted ``||H f||^2`` at 1 W with the sensing beam
    steered to the predicted bearing.
    """

    prior_cov: np.ndarray  # (M, 4, 4) predicted PCRB
    jacobians: np.ndarray  # (M, 2, 4) at the predicted state
    unit_gains: np.ndarray  # (M,)
    user_channels: np.ndarray  # (K, Nt)
    gammas: np.ndarray  # (K,)
    codebook: Codebook

    @property
    def num_targets(self) -> int:
        return self.prior_cov.shape[0]

    @property
    def num_users(self) -> int:
        return self.gammas.size

    def prior_fims(self) -> np.ndarray:
        return np.array([np.linalg.inv(c) for c in self.prior_cov])


def make_problem(prior_cov, jacobians, unit_gains, user_channels, gammas, config,
                 codebook: Codebook | None = None) -> FrameProblem:
    if codebook is None:
        codebook = build_codebook(config.num_tx_antennas, config.n_codebook)
    user_channels = np.asarray(user_channels, dtype=complex).reshape(-1, config.num_tx_antennas)
    return FrameProblem(np.asarray(prior_cov, dtype=float), np.asarray(jacobians, dtype=float),
                        np.asarray(unit_gains, dtype=float), user_channels,
                        np.asarray(gammas, dtype=float), codebook)


def target_pcrb(c_prior, jac, unit_gain, n, p, config) -> np.ndarray:
    """Posterior PCRB of one target under ``n`` RBs and ``p`` watts."""
    if p <= 0 or n <= 0:
        return c_prior
    return posterior_pcrb(c_prior, jac, measurement_cov(unit_gain * p, n, config))


def sensing_objective(problem: FrameProblem, n, p_m, config: ScenarioConfig) -> float:
    """Sum over targets of the posterior PCRB trace."""
    return float(sum(np.trace(target_pcrb(c, q, g, ni, pi, config)) for c, q, g, ni, pi in
                     zip(problem.prior_cov, problem.jacobians, problem.unit_gains, n, p_m)))


def bandwidth_scalarizations(problem, j_prior, p_m, config) -> list[ScalarizedPcrb]:
    out = []
    for j, c, q, g, p in zip(j_prior, problem.prior_cov, problem.jacobians, problem.unit_gains,
                             p_m):
        if g * p > 0:
            out.append(scalarize_bandwidth(j, q, g * p, config, c_prior=c))
        else:
            out.append(scalarize(None, factor=np.zeros((4, 0)), e_inv=c))
    return out


def power_scalarizations(problem, j_prior, n, config) -> list[ScalarizedPcrb]:
    return [scalarize_power(j, q, measurement_cov(g, ni, config), c_prior=c)
            for j, c, q, g, ni in zip(j_prior, problem.prior_cov, problem.jacobians,
                                      problem.unit_gains, n)]


def _qos_violation(o_tot, p_k, gains, gammas, config) -> float:
    slots = config.num_minislots_per_frame
    short = [max(g_ - throughput_from_gain(np.full(slots, o / slots), p, gain, config), 0.0)
             for o, p, gain, g_ in zip(o_tot, p_k, gains, gammas)]
    return float(sum(short))


def bcd_solve(problem: FrameProblem, config: ScenarioConfig) -> tuple[Allocation, SolveDiagnostics]:
    """Solve the frame's relaxation by :func:`bcd_relaxed` and round it."""
    relaxed, diag = bcd_relaxed(problem, config)
    alloc = round_and_repair(relaxed, config)
    diag.feasibility_repair_applied = alloc.repair_applied
    return alloc.check(config), diag


def bcd_relaxed(problem: FrameProblem, config: ScenarioConfig,
                ) -> tuple[RelaxedAllocation, SolveDiagnostics]:
    """Alternate the (n, o, p_k) and (p_m, beams) blocks on the continuous relaxation.

    Starts from an equal power split, the best codebook beams and the
    smallest admissible RB counts.  A block result replaces the incumbent
    only when it lowers the QoS shortfall or keeps it and does not raise the
    sensing objective, so the recorded objective is monotone once the first
    pass has restored QoS.
    """
    m, k = problem.num_targets, problem.num_users
    slots, p_max = config.num_minislots_per_frame, config.total_power
    j_prior = problem.prior_fims()
    p_m = np.full(m, p_max / (m + k))
    p_k = np.full(k, p_max / (m + k))
    n = np.full(m, float(config.n_req))
    o_tot = np.full(k, float(slots))
    beams = select_beams(problem.user_channels, problem.codebook)

    def user_gains(idx):
        if k == 0:
            return np.zeros(0)
        f = problem.codebook.beams[idx]
        return np.abs(np.sum(problem.user_channels * f, axis=1)) ** 2

    gains = user_gains(beams)
    diag = SolveDiagnostics()
    obj = sensing_objective(problem, n, p_m, config)
    viol = _qos_violation(o_tot, p_k, gains, problem.gammas, config)
    viol_tol = 1e-9 * max(float(problem.gammas.sum()), 1.0)
    z = None
    for it in range(config.max_bcd_iterations):
        prev_obj = obj
        # block 1: RBs and user powers
        scal = bandwidth_scalarizations(problem, j_prior, p_m, config)
        n1, o1, pk1, z1, d1 = solve_bandwidth_power_block(
            scal, problem.gammas, gains, config, (n, o_tot, p_k), max(p_max - p_m.sum(), 0.0))
        diag.sca_iterations.append(sum(d1.sca_iterations))
        diag.sca_traces.extend(d1.sca_traces)
        diag.penalty_final = d1.penalty_final
        diag.inner_iterations += d1.inner_iterations
        obj1 = sensing_objective(problem, n1, p_m, config)
        viol1 = _qos_violation(o1, pk1, gains, problem.gammas, config)
        if viol1 < viol - viol_tol or (viol1 <= viol + viol_tol and obj1 <= obj):
            n, o_tot, p_k, z, obj, viol = n1, o1, pk1, z1, obj1, viol1
        # block 2: beams then target powers
        new_beams = select_beams(problem.user_channels, problem.codebook)
        new_gains = user_gains(new_beams)
        if np.any(new_gains < gains * (1 - 1e-12)):
            diag.qos_regressions += 1
        else:
            beams, gains = new_beams, new_gains
        budget = p_max - p_k.sum()
        pscal = power_scalarizations(problem, j_prior, n, config)
        pm2, kkt = solve_power_block(pscal, budget)
        obj2 = sensing_objective(problem, n, pm2, config)
        if obj2 <= obj:
            p_m, obj = pm2, obj2
            diag.kkt_residual = kkt
        diag.outer_iterations = it + 1
        diag.objective_trace.append(obj)
        if it > 0 and (prev_obj - obj) <= config.convergence_tol * abs(prev_obj):
            break

    if z is None:
        scal = bandwidth_scalarizations(problem, j_prior, p_m, config)
        z = 1.0 / np.array([s.a + s.b * ni**2 for s, ni in zip(scal, n)])
    o = np.repeat((o_tot / slots)[:, None], slots, axis=1) if k else np.zeros((0, slots))
    return RelaxedAllocation(n, o, p_k, z, p_m, beams, gains, problem.gammas), diag
