"""Frame-by-frame simulation: predict, allocate, measure, track; plus Monte Carlo drivers."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .allocator import (FrameProblem, SolveDiagnostics, bcd_solve, make_problem, select_beams,
                        target_pcrb)
from .channel import (build_codebook, evolve_comm_channel, sensing_gain, steering_vector,
                      throughput_from_gain)
from .config import ScenarioConfig, validate_config
from .dynamics import (MotionModel, measurement_cov, measurement_jacobian, propagate_state,
                       synthesize_measurement, to_polar)
from .estimation import ekf_predict, ekf_update, prior_pcrb
from .scenario import (Allocation, FrameMetrics, TargetState, UserState, generate_scenario)

METHODS = ("proposed", "rftep", "upper_bound")
FEASIBLE_METHODS = ("proposed", "rftep")

# independent random streams per episode, so paired runs share scenario and noise
_SCENARIO, _MOTION, _CHANNEL, _MEASURE, _RFTEP = range(5)


@dataclass
class EpisodeState:
    targets: list[TargetState]
    users: list[UserState]
    dead_reckoning: np.ndarray  # (M, 4) prediction-only estimates
    frame: int = 0


@dataclass
class FrameRngs:
    motion: np.random.Generator
    channel: np.random.Generator
    measure: np.random.Generator
    rftep: np.random.Generator

    @classmethod
    def for_seed(cls, seed: int) -> "FrameRngs":
        mk = [np.random.default_rng(np.random.SeedSequence([seed, s]))
              for s in (_MOTION, _CHANNEL, _MEASURE, _RFTEP)]
        return cls(*mk)


@dataclass
class EpisodeResult:
    method: str
    seed: int
    metrics: list[FrameMetrics]
    true_states: np.ndarray  # (U, M, 4)
    estimates: np.ndarray  # (U, M, 4)
    allocations: list[Allocation]
    diagnostics: list[SolveDiagnostics | None] = field(default_factory=list)

    def __post_init__(self):
        u = len(self.metrics)
        if not (len(self.true_states) == len(self.estimates) == len(self.allocations) == u):
            raise ValueError("episode trajectories, allocations and metrics must share length")


@dataclass(frozen=True)
class FramePlan:
    """Predicted quantities the allocator sees, kept for measurement and update."""

    problem: FrameProblem
    predictions: np.ndarray  # (M, 4)
    pred_covs: np.ndarray  # (M, 4, 4) EKF
    bearings: np.ndarray  # (M,) predicted AoD


def _models(config: ScenarioConfig) -> list[MotionModel]:
    return [MotionModel.build(config.frame_interval, s) for s in config.process_noise()]


def plan_frame(state: EpisodeState, config: ScenarioConfig, codebook=None) -> FramePlan:
    """EKF prediction and the allocator's view of the frame; touches no true target state."""
    preds, pcovs, c_prior, jacs, gains, bearings = [], [], [], [], [], []
    for t, model in zip(state.targets, _models(config)):
        pred, pcov = ekf_predict(t.ekf_estimate, t.ekf_cov, model)
        d_hat, th_hat = to_polar(pred)
        preds.append(pred)
        pcovs.append(pcov)
        bearings.append(th_hat)
        c_prior.append(prior_pcrb(t.pcrb, model.transition, model.process_cov))
        jacs.append(measurement_jacobian(pred))
        beam = steering_vector(th_hat, config.num_tx_antennas)
        gains.append(sensing_gain(d_hat, th_hat, beam, config).beam_gain_sq)
    channels = np.array([u.channel for u in state.users]).reshape(-1, config.num_tx_antennas)
    gam = np.array([u.throughput_threshold for u in state.users])
    problem = make_problem(np.array(c_prior), np.array(jacs), np.array(gains), channels, gam,
                           config, codebook)
    return FramePlan(problem, np.array(preds), np.array(pcovs), np.array(bearings))


def _user_gains(problem: FrameProblem, beams) -> np.ndarray:
    if problem.num_users == 0:
        return np.zeros(0)
    f = problem.codebook.beams[beams]
    return np.abs(np.sum(problem.user_channels * f, axis=1)) ** 2


def rftep_allocation(problem: FrameProblem, config: ScenarioConfig,
                     rng: np.random.Generator) -> Allocation:
    """Random RBs, equal power split, best codebook beams.

    Draws are shrunk toward their lower bounds by a common factor whenever
    their total exceeds the RU budget.
    """
    m, k, slots, n_rb = problem.num_targets, problem.num_users, config.num_minislots_per_frame, config.num_rbs
    n = rng.integers(config.n_req, n_rb, size=m, endpoint=True)
    o = rng.integers(1, n_rb, size=(k, slots), endpoint=True)
    lo_sum = m * config.n_req + k * slots
    total = int(n.sum() + o.sum())
    if total > config.ru_budget:
        f = (config.ru_budget - lo_sum) / (total - lo_sum)
        n = config.n_req + np.floor((n - config.n_req) * f).astype(np.int64)
        o = 1 + np.floor((o - 1) * f).astype(np.int64)
    p = config.total_power / (m + k)
    beams = select_beams(problem.user_channels, problem.codebook)
    return Allocation(n.astype(np.int64), np.full(m, p), o.astype(np.int64), np.full(k, p),
                      np.asarray(beams, dtype=np.int64)).check(config)


def upper_bound_allocation(problem: FrameProblem, config: ScenarioConfig) -> Allocation:
    """Every target and user gets the whole band and the whole power; not budget-feasible."""
    m, k, slots = problem.num_targets, problem.num_users, config.num_minislots_per_frame
    beams = select_beams(problem.user_channels, problem.codebook)
    return Allocation(np.full(m, config.num_rbs, dtype=np.int64), np.full(m, config.total_power),
                      np.full((k, slots), config.num_rbs, dtype=np.int64),
                      np.full(k, config.total_power), np.asarray(beams, dtype=np.int64),
                      budget_exempt=True)


def allocate(plan: FramePlan, method: str, config: ScenarioConfig, rng: np.random.Generator,
             ) -> tuple[Allocation, SolveDiagnostics | None]:
    if method == "proposed":
        return bcd_solve(plan.problem, config)
    if method == "rftep":
        return rftep_allocation(plan.problem, config, rng), None
    if method == "upper_bound":
        return upper_bound_allocation(plan.problem, config), None
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def run_frame(state: EpisodeState, method: str, config: ScenarioConfig, rngs: FrameRngs,
              codebook=None):
    """Advance one frame.  Returns ``(new_state, metrics, allocation, truth, diagnostics)``.

    ``truth`` holds the true target states the frame's measurements were taken at.
    """
    plan = plan_frame(state, config, codebook)
    alloc, diag = allocate(plan, method, config, rngs.rftep)
    problem = plan.problem
    models = _models(config)

    new_targets, pcrbs, truth, est_out = [], [], [], []
    for i, (t, model) in enumerate(zip(state.targets, models)):
        n_i, p_i = int(alloc.target_rbs[i]), float(alloc.target_powers[i])
        d, th = to_polar(t.state)
        beam = steering_vector(plan.bearings[i], config.num_tx_antennas)
        true_gain = sensing_gain(d, th, beam, config, power=p_i).channel_gain_sq
        c_post = target_pcrb(problem.prior_cov[i], problem.jacobians[i], problem.unit_gains[i],
                             n_i, p_i, config)
        if p_i > 0 and n_i > 0 and true_gain > 0:
            true_cov = measurement_cov(true_gain, n_i, config)
            z = synthesize_measurement(t.state, true_cov, rngs.measure)
            if config.ekf_noise_model == "observed":
                # the receiver sees its echo SNR, so the filter weights by it
                sigma_hat = true_cov
            else:
                sigma_hat = measurement_cov(problem.unit_gains[i] * p_i, n_i, config)
            est, cov = ekf_update(plan.predictions[i], plan.pred_covs[i], z.z, sigma_hat,
                                   config.ekf_iterations)
        else:
            est, cov = plan.predictions[i], plan.pred_covs[i]
        pcrbs.append(np.trace(c_post))
        truth.append(t.state)
        est_out.append(est)
        new_targets.append((t.state, c_post, est, cov))

    dr = np.array([model.transition @ x for model, x in zip(models, state.dead_reckoning)])
    truth = np.array(truth)
    est_out = np.array(est_out)
    pos_err = np.linalg.norm(est_out[:, :2] - truth[:, :2], axis=1)
    vel_err = np.linalg.norm(est_out[:, 2:] - truth[:, 2:], axis=1)
    # dead reckoning rolls the same starting estimate forward without measurements
    dr_err = np.linalg.norm(dr[:, :2] - truth[:, :2], axis=1)

    gains = _user_gains(problem, alloc.user_beam_idx)
    thr = np.array([throughput_from_gain(alloc.user_rbs[k], alloc.user_powers[k], gains[k], config)
                    for k in range(problem.num_users)])
    metrics = FrameMetrics(
        np.array(pcrbs), pos_err, vel_err, dr_err, thr,
        thr >= problem.gammas * (1 - 1e-9),
        solver_iterations=diag.outer_iterations if diag else 0,
        objective_value=float(np.sum(pcrbs)),
        repair_applied=bool(alloc.repair_applied))

    # truth moves and channels evolve after the frame
    targets = []
    for (xi, c_post, est, cov), model in zip(new_targets, models):
        nxt = propagate_state(xi, model, rngs.motion)
        fim = np.linalg.inv(c_post)
        targets.append(TargetState(nxt, 0.5 * (fim + fim.T), est, cov, c_post))
    users = [replace(u, channel=evolve_comm_channel(u.channel, config.time_correlation,
                                                      u.innovation_var, rngs.channel))
             for u in state.users]
    new_state = EpisodeState(targets, users, dr, state.frame + 1)
    return new_state, metrics, alloc, truth, diag


def initial_state(config: ScenarioConfig, seed: int) -> EpisodeState:
    targets, users = generate_scenario(config, seed)
    dr = np.array([t.ekf_estimate for t in targets])
    return EpisodeState(targets, users, dr)


def run_episode(config: ScenarioConfig, method: str, seed: int) -> EpisodeResult:
    """``U`` frames from the scenario drawn for ``seed``; a pure function of its inputs."""
    validate_config(config)
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    state = initial_state(config, seed)
    rngs = FrameRngs.for_seed(seed)
    codebook = build_codebook(config.num_tx_antennas, config.n_codebook)
    metrics, truths, ests, allocs, diags = [], [], [], [], []
    for _ in range(config.num_frames):
        state, fm, alloc, truth, diag = run_frame(state, method, config, rngs, codebook)
        metrics.append(fm)
        truths.append(truth)
        ests.append(np.array([t.ekf_estimate for t in state.targets]))
        allocs.append(alloc)
        diags.append(diag)
    return EpisodeResult(method, seed, metrics, np.array(truths), np.array(ests), allocs, diags)


@dataclass
class MonteCarloSummary:
    method: str
    seeds: list[int]
    mean_pcrb: np.ndarray  # (U,) trace averaged over targets then trials
    qos_ratio: np.ndarray  # (U,) fraction of (user, trial) meeting the threshold
    position_rmse: np.ndarray  # (U,)
    dead_reckoning_rmse: np.ndarray  # (U,)
    episodes: list[EpisodeResult]

    @property
    def overall_qos_ratio(self) -> float:
        return float(np.mean(self.qos_ratio))

    @property
    def overall_pcrb(self) -> float:
        return float(np.mean(self.mean_pcrb))


def summarize(method: str, episodes: list[EpisodeResult]) -> MonteCarloSummary:
    episodes = sorted(episodes, key=lambda e: e.seed)
    pcrb = np.array([[fm.pcrb_trace.mean() for fm in e.metrics] for e in episodes])
    qos = np.array([[fm.qos_feasible.mean() if fm.qos_feasible.size else 1.0
                     for fm in e.metrics] for e in episodes])
    pos = np.array([[np.mean(fm.position_error**2) for fm in e.metrics] for e in episodes])
    dr = np.array([[np.mean(fm.dead_reckoning_error**2) for fm in e.metrics] for e in episodes])
    return MonteCarloSummary(method, [e.seed for e in episodes], pcrb.mean(axis=0),
                             qos.mean(axis=0), np.sqrt(pos.mean(axis=0)),
                             np.sqrt(dr.mean(axis=0)), episodes)


def _episode_job(args):
    config, method, seed = args
    return run_episode(config, method, seed)


def default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


def monte_carlo(config: ScenarioConfig, methods=("proposed", "rftep"), n_trials: int = 100,
                seed: int | None = None, workers: int | None = 1) -> dict[str, MonteCarloSummary]:
    """Run ``n_trials`` paired episodes per method with seeds ``seed + t``.

    ``workers > 1`` spreads episodes over processes; results are reduced in
    trial order, so the summary does not depend on scheduling.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    seed = config.rng_seed if seed is None else seed
    jobs = [(config, m, seed + t) for m in methods for t in range(n_trials)]
    if workers is None:
        workers = default_workers()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_episode_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_episode_job(j) for j in jobs]
    out = {}
    for m in methods:
        out[m] = summarize(m, [r for r in results if r.method == m])
    return out


def tradeoff_sweep(config: ScenarioConfig, gammas, n_trials: int = 50, seed: int | None = None,
                   workers: int | None = 1, method: str = "proposed") -> list[tuple[float, float]]:
    """Mean PCRB (over frames, targets and trials) per throughput threshold."""
    gammas = [float(g) for g in gammas]
    if not gammas:
        raise ValueError("need at least one threshold")
    if any(b < a for a, b in zip(gammas, gammas[1:])):
        raise ValueError("thresholds must be ascending")
    curve = []
    for g in gammas:
        res = monte_carlo(config.replace(throughput_thresholds=g), (method,), n_trials, seed, workers)
        curve.append((g, res[method].overall_pcrb))
    return curve
