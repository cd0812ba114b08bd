"""Steering vectors, sensing and user channels, the beam codebook and throughput."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .config import ScenarioConfig

LN2 = np.log(2.0)


class DomainError(ValueError):
    pass


def steering_vector(angle: float, n_antennas: int, wavelength: float | None = None) -> np.ndarray:
    """Unit-norm ULA response with half-wavelength spacing.

    With ``d = wavelength / 2`` the per-element phase is ``pi * q * sin(angle)``,
    so the wavelength cancels; it is accepted for interface symmetry only.
    """
    q = np.arange(n_antennas)
    return np.exp(1j * np.pi * q * np.sin(angle)) / np.sqrt(n_antennas)


def reflection_coeff_sq(distance: float, config: ScenarioConfig) -> float:
    if distance <= 0:
        raise DomainError(f"target distance must be > 0, got {distance}")
    lam = config.wavelength
    return (config.num_tx_antennas * config.num_rx_antennas * lam**2 * config.rcs
            / (4.0 * np.pi**3 * distance**4))


@dataclass(frozen=True)
class SensingLink:
    channel_gain_sq: float  # ||H f||^2 times the allocated power
    reflection_coeff_sq: float
    aod: float
    aoa: float
    beam_gain_sq: float  # ||H f||^2


def sensing_gain(distance: float, angle: float, beam: np.ndarray, config: ScenarioConfig,
                 power: float = 1.0) -> SensingLink:
    """Evaluate ``||H f||^2`` for a monostatic target at polar ``(distance, angle)``.

    Transmit and receive angles coincide for a co-located array.
    """
    alpha2 = reflection_coeff_sq(distance, config)
    a_t = steering_vector(angle, config.num_tx_antennas)
    # H = alpha a_r a_t^H and ||a_r|| = 1, so ||H f||^2 = alpha^2 |a_t^H f|^2
    beam_gain = alpha2 * abs(np.vdot(a_t, beam)) ** 2
    return SensingLink(power * beam_gain, alpha2, angle, angle, beam_gain)


def sensing_channel(distance: float, angle: float, config: ScenarioConfig) -> np.ndarray:
    """Full ``Nr x Nt`` sensing channel matrix, used by tests for cross-checks."""
    alpha = np.sqrt(reflection_coeff_sq(distance, config))
    a_r = steering_vector(angle, config.num_rx_antennas)
    a_t = steering_vector(angle, config.num_tx_antennas)
    return alpha * np.outer(a_r, a_t.conj())


def geometric_channel(gains: np.ndarray, aods: np.ndarray, n_tx: int) -> np.ndarray:
    """Row channel ``sqrt(Nt/Np) * sum_p gain_p * a_t(aod_p)^H``."""
    gains = np.atleast_1d(gains)
    aods = np.atleast_1d(aods)
    h = np.zeros(n_tx, dtype=complex)
    for g, th in zip(gains, aods):
        h += g * steering_vector(th, n_tx).conj()
    return np.sqrt(n_tx / gains.size) * h


def initial_comm_channel(config: ScenarioConfig, rng: np.random.Generator,
                         distance: float) -> np.ndarray:
    """Draw a multipath geometric channel with path-loss variance ``K0 / d^2`` per path."""
    n_p = config.num_paths
    var = config.pathloss_const / distance**2
    gains = np.sqrt(var / 2.0) * (rng.standard_normal(n_p) + 1j * rng.standard_normal(n_p))
    aods = rng.uniform(-np.pi / 2, np.pi / 2, n_p)
    return geometric_channel(gains, aods, config.num_tx_antennas)


def evolve_comm_channel(h_prev: np.ndarray, rho: float, sigma_h2: float,
                        rng: np.random.Generator) -> np.ndarray:
    """First-order Gauss-Markov aging of a user channel."""
    if rho == 1.0:
        return np.array(h_prev, dtype=complex)
    n = h_prev.shape[-1]
    w = np.sqrt(sigma_h2 / 2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return rho * h_prev + np.sqrt(1.0 - rho**2) * w


@dataclass(frozen=True)
class Codebook:
    beams: np.ndarray  # (N_CB, Nt)

    def __len__(self) -> int:
        return self.beams.shape[0]

    def __getitem__(self, idx: int) -> np.ndarray:
        return self.beams[idx]


def build_codebook(n_tx: int, n_cb: int) -> Codebook:
    """DFT grid: beam ``n`` steers to ``sin(theta_n) = -1 + 2n / N_CB``."""
    if n_cb < 1:
        raise ValueError("codebook needs at least one beam")
    sines = -1.0 + 2.0 * np.arange(n_cb) / n_cb
    q = np.arange(n_tx)
    beams = np.exp(1j * np.pi * np.outer(sines, q)) / np.sqrt(n_tx)
    return Codebook(beams)


def comm_gain(h: np.ndarray, f: np.ndarray) -> float:
    """``|h f|^2`` for a row channel and column beam."""
    return float(abs(np.dot(h, f)) ** 2)


def throughput_from_gain(o: np.ndarray, p: float, gain: float, config: ScenarioConfig) -> float:
    o = np.asarray(o, dtype=float)
    b0, n0 = config.rb_bandwidth, config.noise_psd
    snr = p * gain / (o * b0 * n0)
    return float(config.throughput_scale * np.sum(o * b0 * np.log1p(snr)) / LN2)


def throughput(o_k: np.ndarray, p_k: float, h: np.ndarray, f: np.ndarray,
               config: ScenarioConfig) -> float:
    """Bits delivered to one user across the frame's mini-slots."""
    return throughput_from_gain(o_k, p_k, comm_gain(h, f), config)


def qos_gap(o_k: np.ndarray, p_k: float, h: np.ndarray, f: np.ndarray, gamma: float,
            config: ScenarioConfig) -> tuple[float, np.ndarray]:
    """Value and gradient of ``gamma - throughput`` in ``(o_k1..o_kI, p_k)``.

    The gradient is analytic on the continuous relaxation ``o > 0``.
    """
    o = np.asarray(o_k, dtype=float)
    gain = comm_gain(h, f)
    b0, n0, s = config.rb_bandwidth, config.noise_psd, config.throughput_scale
    u = p_k * gain / (o * b0 * n0)
    value = gamma - s * np.sum(o * b0 * np.log1p(u)) / LN2
    d_o = -s * b0 * (np.log1p(u) - u / (1.0 + u)) / LN2
    d_p = -s * np.sum(gain / (n0 * (1.0 + u))) / LN2
    return float(value), np.append(d_o, d_p)


def required_power(o: np.ndarray, gain: float, gamma: float, config: ScenarioConfig) -> float:
    """Smallest ``p`` with ``throughput(o, p) >= gamma`` (``inf`` if the link is dead)."""
    if gamma <= 0:
        return 0.0
    if gain <= 0:
        return np.inf
    o = np.asarray(o, dtype=float)
    b0, n0, s = config.rb_bandwidth, config.noise_psd, config.throughput_scale
    if np.all(o == o[0]):
        total = o.sum()
        # total * b0 * log2(1 + p g / (o_i b0 n0)) = gamma / s
        return float(np.expm1(gamma * LN2 / (s * total * b0)) * o[0] * b0 * n0 / gain)

    def short(p):
        return throughput_from_gain(o, p, gain, config) - gamma

    hi = np.expm1(gamma * LN2 / (s * o.sum() * b0)) * o.max() * b0 * n0 / gain
    return float(brentq(short, 0.0, hi, xtol=1e-14 * hi, rtol=1e-13))
