"""Independent brute-force references for the allocator's building blocks.

Each oracle avoids the code path it checks: dense inverses instead of the
eigen-scalarization, a grid instead of water-filling, and enumeration
instead of SCA/BCD.
"""

from __future__ import annotations

import numpy as np

from .allocator import FrameProblem, bcd_solve, sensing_objective
from .channel import required_power
from .config import ScenarioConfig
from .estimation import ScalarizedPcrb


def dense_trace(e: np.ndarray, v: np.ndarray, s: float) -> float:
    return float(np.trace(np.linalg.inv(e + s * v)))


def grid_power_objective(scal: list[ScalarizedPcrb], budget: float, points: int = 10_000,
                         ) -> tuple[float, np.ndarray]:
    """Best two-target split on a ``points``-step simplex grid, refined by golden section."""
    if len(scal) != 2:
        raise ValueError("grid oracle handles exactly two targets")
    p1 = np.linspace(0.0, budget, points + 1)
    vals = scal[0].value(p1) + scal[1].value(budget - p1)
    i = int(np.argmin(vals))
    lo, hi = p1[max(i - 1, 0)], p1[min(i + 1, points)]
    g = (np.sqrt(5.0) - 1.0) / 2.0
    f = lambda x: scal[0].value(x) + scal[1].value(budget - x)  # noqa: E731
    for _ in range(200):
        a, b = hi - g * (hi - lo), lo + g * (hi - lo)
        if f(a) <= f(b):
            hi = b
        else:
            lo = a
    best = 0.5 * (lo + hi)
    if f(best) > vals[i]:
        best = p1[i]
    return float(f(best)), np.array([best, budget - best])


def enumerate_single_pair(problem: FrameProblem, config: ScenarioConfig) -> dict:
    """Exhaustive integer search for one target and one single-slot user.

    For each ``(n, o)`` with ``n + o <= N_RB`` the user takes exactly the power
    its threshold needs and the target takes the rest.
    """
    if problem.num_targets != 1 or problem.num_users != 1 or config.num_minislots_per_frame != 1:
        raise ValueError("enumeration oracle expects M = K = I = 1")
    gains = np.abs(problem.codebook.beams @ problem.user_channels[0]) ** 2
    gain = float(gains.max())
    gamma = float(problem.gammas[0])
    best = {"objective": np.inf}
    for o in range(1, config.num_rbs):
        p_k = required_power(np.array([o]), gain, gamma, config)
        if not p_k <= config.total_power:
            continue
        p_m = config.total_power - p_k
        for n in range(config.n_req, config.num_rbs - o + 1):
            obj = sensing_objective(problem, [n], [p_m], config)
            if obj < best["objective"]:
                best = {"objective": obj, "n": n, "o": o, "p_k": p_k, "p_m": p_m}
    return best


def tiny_config(**overrides) -> ScenarioConfig:
    """One target, one user, one mini-slot, eight RBs, single-RB resolution requirement."""
    base = dict(num_targets=1, num_users=1, num_minislots_per_frame=1, num_rbs=8,
                distance_resolution=110.0, num_frames=1)
    base.update(overrides)
    return ScenarioConfig(**base)


def tiny_instance(seed: int) -> tuple[FrameProblem, ScenarioConfig]:
    """Seeded tiny frame whose threshold binds: it equals the rate at 2 RBs and half power."""
    from .channel import throughput_from_gain
    from .harness import initial_state, plan_frame

    cfg = tiny_config()
    state = initial_state(cfg, seed)
    plan = plan_frame(state, cfg)
    gain = float((np.abs(plan.problem.codebook.beams @ plan.problem.user_channels[0]) ** 2).max())
    gamma = throughput_from_gain(np.array([2.0]), cfg.total_power / 2, gain, cfg)
    cfg = cfg.replace(throughput_thresholds=gamma)
    state = initial_state(cfg, seed)
    return plan_frame(state, cfg).problem, cfg


def tiny_gap(seed: int) -> tuple[float, float]:
    """``(proposed objective, enumerated optimum)`` on :func:`tiny_instance`."""
    problem, cfg = tiny_instance(seed)
    alloc, _ = bcd_solve(problem, cfg)
    got = sensing_objective(problem, alloc.target_rbs, alloc.target_powers, cfg)
    return got, enumerate_single_pair(problem, cfg)["objective"]


def run_oracles(seed: int = 0, trials: int = 20) -> list[tuple[str, float, float]]:
    """Rows of ``(check, worst value, tolerance)`` for the CLI."""
    from .estimation import scalarize

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        a = rng.standard_normal((4, 4))
        e = a @ a.T + 0.1 * np.eye(4)
        v = rng.standard_normal(4)
        v = 10 ** rng.uniform(-4, 0) * np.outer(v, v)
        sc = scalarize(e, v)
        for n in (1, 10, 70, 264):
            ref = dense_trace(e, v, n * n)
            worst = max(worst, abs(sc.value(n * n) - ref) / ref)
    rows = [("scalarization relative error", worst, 1e-8)]

    from .allocator import solve_power_block
    gap = 0.0
    for _ in range(trials):
        scal = []
        for _ in range(2):
            a = rng.standard_normal((4, 4))
            e = a @ a.T + 0.1 * np.eye(4)
            f = rng.standard_normal((4, 2))
            scal.append(scalarize(e, factor=f))
        budget = float(rng.uniform(1, 100))
        p, _ = solve_power_block(scal, budget)
        ref, _ = grid_power_objective(scal, budget)
        gap = max(gap, sum(s.value(x) for s, x in zip(scal, p)) - ref)
    rows.append(("water-filling excess over grid", gap, 1e-6))

    ratio = 0.0
    for s in range(min(trials, 10)):
        got, ref = tiny_gap(seed + s)
        ratio = max(ratio, got / ref - 1.0)
    rows.append(("tiny-instance gap to enumeration", ratio, 0.05))
    return rows
