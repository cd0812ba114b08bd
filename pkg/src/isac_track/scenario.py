"""Domain records shared by the allocator and the harness, plus scenario generation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import initial_comm_channel
from .config import ScenarioConfig, validate_config
from .dynamics import MIN_RANGE

KMH = 1000.0 / 3600.0


def _is_psd(m: np.ndarray, tol: float = 1e-9) -> bool:
    if not np.allclose(m, m.T, rtol=1e-9, atol=1e-12 * max(1.0, np.abs(m).max())):
        return False
    w = np.linalg.eigvalsh(0.5 * (m + m.T))
    return bool(w[0] >= -tol * max(1.0, abs(w[-1])))


@dataclass(frozen=True)
class TargetState:
    """True kinematics of one target plus the tracker's view of it.

    ``pcrb`` is the inverse of ``fim``, carried separately because the FIM
    becomes too stiff to invert reliably once range is measured precisely.
    """

    state: np.ndarray
    fim: np.ndarray
    ekf_estimate: np.ndarray
    ekf_cov: np.ndarray
    pcrb: np.ndarray

    def __post_init__(self):
        for name in ("fim", "ekf_cov", "pcrb"):
            if not _is_psd(getattr(self, name)):
                raise ValueError(f"TargetState.{name} must be symmetric positive semidefinite")


@dataclass(frozen=True)
class UserState:
    position: np.ndarray
    channel: np.ndarray
    throughput_threshold: float
    innovation_var: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.channel)):
            raise ValueError("user channel must be finite")

    @property
    def distance(self) -> float:
        return float(np.hypot(*self.position))


class AllocationError(ValueError):
    pass


@dataclass(frozen=True)
class Allocation:
    target_rbs: np.ndarray  # (M,) int
    target_powers: np.ndarray  # (M,) W
    user_rbs: np.ndarray  # (K, I) int
    user_powers: np.ndarray  # (K,) W
    user_beam_idx: np.ndarray  # (K,) int
    budget_exempt: bool = False
    repair_applied: bool = False

    def __post_init__(self):
        if np.any(self.target_powers < 0) or np.any(self.user_powers < 0):
            raise AllocationError("powers must be nonnegative")

    @property
    def rus_used(self) -> int:
        return int(self.target_rbs.sum() + self.user_rbs.sum())

    @property
    def power_used(self) -> float:
        return float(self.target_powers.sum() + self.user_powers.sum())

    def violations(self, config: ScenarioConfig) -> list[str]:
        out = []
        n_req, n_rb = config.n_req, config.num_rbs
        if np.any(self.target_rbs < n_req) or np.any(self.target_rbs > n_rb):
            out.append(f"target RBs outside [{n_req}, {n_rb}]")
        if self.user_rbs.size and (np.any(self.user_rbs < 1) or np.any(self.user_rbs > n_rb)):
            out.append(f"user RBs outside [1, {n_rb}]")
        if self.rus_used > config.ru_budget:
            out.append(f"RU budget exceeded: {self.rus_used} > {config.ru_budget}")
        if self.power_used > config.total_power * (1 + 1e-9):
            out.append(f"power budget exceeded: {self.power_used} > {config.total_power}")
        return out

    def check(self, config: ScenarioConfig) -> "Allocation":
        if not self.budget_exempt:
            bad = self.violations(config)
            if bad:
                raise AllocationError("; ".join(bad))
        return self


@dataclass(frozen=True)
class FrameMetrics:
    pcrb_trace: np.ndarray  # (M,)
    position_error: np.ndarray  # (M,) m, EKF estimate vs truth
    velocity_error: np.ndarray  # (M,) m/s
    dead_reckoning_error: np.ndarray  # (M,) m, prediction-only baseline
    throughput: np.ndarray  # (K,)
    qos_feasible: np.ndarray  # (K,) bool
    solver_iterations: int = 0
    objective_value: float = float("nan")
    repair_applied: bool = False

    def __post_init__(self):
        if np.any(self.pcrb_trace <= 0):
            raise ValueError("PCRB traces must be positive")
        if np.any(self.throughput < 0):
            raise ValueError("throughput must be nonnegative")


def initial_prior(config: ScenarioConfig) -> np.ndarray:
    sp, sv = config.init_pos_std, config.init_vel_std
    return np.diag([sp**2, sp**2, sv**2, sv**2])


def generate_scenario(config: ScenarioConfig, seed: int) -> tuple[list[TargetState], list[UserState]]:
    """Draw initial targets and users; a pure function of ``(config, seed)``."""
    validate_config(config)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    p0 = initial_prior(config)
    j0 = np.linalg.inv(p0)
    targets = []
    for _ in range(config.num_targets):
        while True:
            x = rng.uniform(*config.target_x_range)
            y = rng.uniform(*config.target_y_range)
            if np.hypot(x, y) >= 1.0:
                break
        speed = rng.uniform(0.0, config.max_target_speed_kmh) * KMH
        heading = rng.uniform(0.0, 2.0 * np.pi)
        xi = np.array([x, y, speed * np.cos(heading), speed * np.sin(heading)])
        while True:
            est = xi + rng.standard_normal(4) * np.sqrt(np.diag(p0))
            if np.hypot(est[0], est[1]) >= MIN_RANGE:
                break
        targets.append(TargetState(xi, j0.copy(), est, p0.copy(), p0.copy()))

    users = []
    gammas = config.gammas()
    for k in range(config.num_users):
        d = rng.uniform(*config.user_distance_range)
        ang = rng.uniform(-np.pi / 2, np.pi / 2)
        h = initial_comm_channel(config, rng, d)
        var = config.channel_innovation_var
        if var is None:
            var = config.pathloss_const / d**2
        users.append(UserState(np.array([d * np.cos(ang), d * np.sin(ang)]), h,
                               float(gammas[k]), float(var)))
    return targets, users
