"""Scenario configuration: defaults, validation and file loading."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


class ConfigError(ValueError):
    """Raised when a configuration field violates its bound."""

    def __init__(self, field_name: str, value: Any, reason: str):
        self.field_name = field_name
        self.value = value
        super().__init__(f"{field_name}={value!r}: {reason}")


@dataclass(frozen=True)
class ScenarioConfig:
    """All scenario, physics and solver parameters.

    Defaults reproduce the 39 GHz / 120 kHz numerology setup with ten
    targets and ten users.  Powers are in watts and the noise PSD in W/Hz.
    ``rb_bandwidth``, ``sensing_noise_power`` and ``codebook_size`` are
    derived when left as ``None``; ``channel_innovation_var=None`` makes each
    user's channel variance-stationary.
    """

    num_tx_antennas: int = 64
    num_rx_antennas: int = 64
    carrier_freq: float = 39e9
    subcarrier_spacing: float = 120e3
    rb_bandwidth: float | None = None
    minislot_duration: float = 62.5e-6
    num_minislots_per_frame: int = 160
    num_rbs: int = 264
    num_frames: int = 20
    frame_interval: float = 10e-3
    num_targets: int = 10
    num_users: int = 10
    total_power: float = dbm_to_watt(53.0)
    noise_psd: float = dbm_to_watt(-174.0)
    sensing_noise_power: float | None = None
    beamwidth: float = math.radians(4.14)
    rcs: float = 1.0
    num_paths: int = 10
    time_correlation: float = 0.75
    channel_innovation_var: float | None = None
    pathloss_const: float = db_to_linear(-30.0)
    distance_resolution: float = 1.5
    throughput_thresholds: float | tuple[float, ...] = 1e6
    process_noise_levels: float | tuple[float, ...] = 1.0
    crb_constants: tuple[float, float] = (SPEED_OF_LIGHT**2 / (32.0 * math.pi**2), 1.0)
    penalty_init: float = 0.1
    penalty_growth: float = 5.0
    convergence_tol: float = 1e-3
    rng_seed: int = 0
    # scenario geometry
    target_x_range: tuple[float, float] = (0.0, 200.0)
    target_y_range: tuple[float, float] = (-100.0, 100.0)
    max_target_speed_kmh: float = 30.0
    user_distance_range: tuple[float, float] = (20.0, 40.0)
    # tracking prior
    init_pos_std: float = 10.0
    init_vel_std: float = 5.0
    # solver knobs
    codebook_size: int | None = None
    throughput_uses_minislot_duration: bool = False
    ekf_noise_model: str = "observed"
    ekf_iterations: int = 1
    max_bcd_iterations: int = 50
    max_penalty_rounds: int = 10
    max_sca_iterations: int = 30
    inner_max_iterations: int = 5000

    def __post_init__(self):
        for name in ("throughput_thresholds", "process_noise_levels", "crb_constants",
                     "target_x_range", "target_y_range", "user_distance_range"):
            value = getattr(self, name)
            if isinstance(value, list):
                object.__setattr__(self, name, tuple(value))
        if self.rb_bandwidth is None:
            object.__setattr__(self, "rb_bandwidth", 12.0 * self.subcarrier_spacing)

    # derived quantities
    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def sigma_s2(self) -> float:
        if self.sensing_noise_power is not None:
            return self.sensing_noise_power
        return self.noise_psd * self.rb_bandwidth

    @property
    def kappa_d(self) -> float:
        return self.crb_constants[0]

    @property
    def kappa_phi(self) -> float:
        return self.crb_constants[1]

    @property
    def n_codebook(self) -> int:
        return self.codebook_size if self.codebook_size is not None else self.num_tx_antennas

    @property
    def ru_budget(self) -> int:
        return self.num_minislots_per_frame * self.num_rbs

    @property
    def n_req(self) -> int:
        from .allocator.rounding import min_rb_requirement

        return min_rb_requirement(self.rb_bandwidth, self.distance_resolution)

    @property
    def throughput_scale(self) -> float:
        return self.minislot_duration if self.throughput_uses_minislot_duration else 1.0

    def gammas(self) -> np.ndarray:
        return _broadcast(self.throughput_thresholds, self.num_users)

    def process_noise(self) -> np.ndarray:
        return _broadcast(self.process_noise_levels, self.num_targets)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out


def _broadcast(value: float | Sequence[float], n: int) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    return arr.copy()


_COUNT_FIELDS = ("num_tx_antennas", "num_rx_antennas", "num_minislots_per_frame", "num_rbs",
                 "num_frames", "num_targets", "num_paths", "max_bcd_iterations",
                 "max_penalty_rounds", "max_sca_iterations", "inner_max_iterations",
                 "ekf_iterations")
_POSITIVE_FIELDS = ("carrier_freq", "subcarrier_spacing", "rb_bandwidth", "minislot_duration",
                    "frame_interval", "total_power", "noise_psd", "beamwidth", "rcs",
                    "pathloss_const", "distance_resolution", "penalty_init",
                    "convergence_tol", "init_pos_std", "init_vel_std")


def validate_config(config: ScenarioConfig) -> ScenarioConfig:
    """Return ``config`` unchanged if every invariant holds, else raise ConfigError."""
    for name in _COUNT_FIELDS:
        value = getattr(config, name)
        if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
            raise ConfigError(name, value, "must be an integer >= 1")
    if not isinstance(config.num_users, (int, np.integer)) or config.num_users < 0:
        raise ConfigError("num_users", config.num_users, "must be an integer >= 0")
    for name in _POSITIVE_FIELDS:
        value = getattr(config, name)
        if not np.isfinite(value) or value <= 0:
            raise ConfigError(name, value, "must be finite and > 0")
    if not math.isclose(config.rb_bandwidth, 12.0 * config.subcarrier_spacing, rel_tol=1e-12):
        raise ConfigError("rb_bandwidth", config.rb_bandwidth,
                          "must equal 12 x subcarrier_spacing")
    if not 0.0 <= config.time_correlation <= 1.0:
        raise ConfigError("time_correlation", config.time_correlation, "must lie in [0, 1]")
    if config.penalty_growth < 1.0:
        raise ConfigError("penalty_growth", config.penalty_growth, "must be >= 1")
    for name in ("sensing_noise_power", "channel_innovation_var"):
        value = getattr(config, name)
        if value is not None and not value > 0:
            raise ConfigError(name, value, "must be > 0 when given")
    if config.ekf_noise_model not in ("observed", "predicted"):
        raise ConfigError("ekf_noise_model", config.ekf_noise_model,
                          "must be 'observed' or 'predicted'")
    if config.codebook_size is not None and config.codebook_size < 1:
        raise ConfigError("codebook_size", config.codebook_size, "must be >= 1")
    if len(config.crb_constants) != 2 or min(config.crb_constants) <= 0:
        raise ConfigError("crb_constants", config.crb_constants, "need two positive constants")

    gam = np.asarray(config.throughput_thresholds, dtype=float)
    if gam.ndim == 1 and gam.size != config.num_users:
        raise ConfigError("throughput_thresholds", config.throughput_thresholds,
                          f"expected scalar or {config.num_users} values")
    if np.any(gam < 0) or not np.all(np.isfinite(gam)):
        raise ConfigError("throughput_thresholds", config.throughput_thresholds, "must be >= 0")
    sig = np.asarray(config.process_noise_levels, dtype=float)
    if sig.ndim == 1 and sig.size != config.num_targets:
        raise ConfigError("process_noise_levels", config.process_noise_levels,
                          f"expected scalar or {config.num_targets} values")
    if np.any(sig < 0):
        raise ConfigError("process_noise_levels", config.process_noise_levels, "must be >= 0")

    lo, hi = config.user_distance_range
    if not 0 < lo <= hi:
        raise ConfigError("user_distance_range", config.user_distance_range,
                          "need 0 < low <= high")
    if config.max_target_speed_kmh < 0:
        raise ConfigError("max_target_speed_kmh", config.max_target_speed_kmh, "must be >= 0")

    n_req = config.n_req
    if n_req > config.num_rbs:
        raise ConfigError("distance_resolution", config.distance_resolution,
                          f"needs n_req={n_req} RBs per target but num_rbs={config.num_rbs}")
    need = config.num_targets * n_req + config.num_users * config.num_minislots_per_frame
    if config.ru_budget < need:
        raise ConfigError("num_rbs", config.num_rbs,
                          f"I x N_RB = {config.ru_budget} < M x n_req + K x I = {need}")
    return config


def load_config(path: str | Path, **overrides) -> ScenarioConfig:
    """Read a JSON or TOML file whose keys mirror ScenarioConfig fields."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # python < 3.11
            import tomli as tomllib
        data = tomllib.loads(text)
    else:
        data = json.loads(text)
    data.update(overrides)
    return config_from_dict(data)


def config_from_dict(data: dict[str, Any]) -> ScenarioConfig:
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(unknown[0], data[unknown[0]], "unknown configuration key")
    return validate_config(ScenarioConfig(**data))
