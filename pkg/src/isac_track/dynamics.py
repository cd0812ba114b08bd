"""Constant-velocity target motion and the range/bearing measurement model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import DomainError
from .config import ScenarioConfig

MIN_RANGE = 0.1


@dataclass(frozen=True)
class MotionModel:
    transition: np.ndarray
    process_cov: np.ndarray

    @classmethod
    def build(cls, ts: float, noise_level: float) -> "MotionModel":
        return cls(transition_matrix(ts), process_noise_cov(ts, noise_level))


@dataclass(frozen=True)
class Measurement:
    z: np.ndarray  # (distance, angle)
    cov: np.ndarray  # 2x2 diagonal


def transition_matrix(ts: float) -> np.ndarray:
    return np.kron(np.array([[1.0, ts], [0.0, 1.0]]), np.eye(2))


def process_noise_cov(ts: float, noise_level: float) -> np.ndarray:
    block = np.array([[ts**3 / 3.0, ts**2 / 2.0], [ts**2 / 2.0, ts]])
    return np.kron(block, noise_level * np.eye(2))


def propagate_state(xi: np.ndarray, model: MotionModel, rng: np.random.Generator | None) -> np.ndarray:
    """One frame of motion; ``rng=None`` or a zero process covariance is noiseless."""
    nxt = model.transition @ xi
    if rng is None or not np.any(model.process_cov):
        return nxt
    return nxt + rng.multivariate_normal(np.zeros(4), model.process_cov, method="cholesky")


def _check_range(x: float, y: float) -> float:
    d = float(np.hypot(x, y))
    if d < MIN_RANGE:
        raise DomainError(f"target at ({x}, {y}) is within {MIN_RANGE} m of the array")
    return d


def to_polar(xi: np.ndarray) -> tuple[float, float]:
    d = _check_range(xi[0], xi[1])
    return d, float(np.arctan2(xi[1], xi[0]))


def measurement_jacobian(xi: np.ndarray) -> np.ndarray:
    x, y = float(xi[0]), float(xi[1])
    d = _check_range(x, y)
    d2 = d * d
    return np.array([[x / d, y / d, 0.0, 0.0],
                     [-y / d2, x / d2, 0.0, 0.0]])


def measurement_cov(gain: float, n_rbs: float, config: ScenarioConfig) -> np.ndarray:
    """Diagonal range/bearing error covariance for link power ``gain = p ||H f||^2``."""
    if not gain > 0:
        raise DomainError(f"degenerate sensing link: gain={gain}")
    s2 = config.sigma_s2
    var_d = config.kappa_d * s2 / (gain * (n_rbs * config.rb_bandwidth) ** 2)
    var_phi = config.kappa_phi * s2 * config.beamwidth / gain
    return np.diag([var_d, var_phi])


def wrap_angle(a):
    """Wrap to ``(-pi, pi]``."""
    w = np.mod(np.asarray(a) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if np.ndim(w) == 0 else w


def synthesize_measurement(xi: np.ndarray, cov: np.ndarray, rng: np.random.Generator) -> Measurement:
    d, phi = to_polar(xi)
    noise = rng.standard_normal(2) * np.sqrt(np.diag(cov))
    return Measurement(np.array([d + noise[0], wrap_angle(phi + noise[1])]), cov)
