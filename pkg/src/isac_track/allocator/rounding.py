"""Integer rounding of a relaxed allocation with budget-respecting repair."""

from __future__ import annotations

import math

import numpy as np

from ..channel import required_power, throughput_from_gain
from ..config import SPEED_OF_LIGHT, ScenarioConfig
from ..scenario import Allocation

_INT_TOL = 1e-9


def min_rb_requirement(rb_bandwidth: float, distance_resolution: float) -> int:
    """Fewest RBs whose aggregate bandwidth resolves ``distance_resolution``."""
    if not (rb_bandwidth > 0 and distance_resolution > 0):
        raise ValueError("bandwidth and distance resolution must be positive")
    raw = SPEED_OF_LIGHT / (2.0 * rb_bandwidth * distance_resolution)
    # absorb round-off so that exact multiples do not tick up by one
    return max(1, math.ceil(raw - 1e-9 * raw))


def _floor(x: np.ndarray) -> np.ndarray:
    return np.floor(np.asarray(x, dtype=float) + _INT_TOL).astype(np.int64)


def _qos_ok(o_row, p, gain, gamma, config) -> bool:
    return gamma <= 0 or throughput_from_gain(o_row, p, gain, config) >= gamma * (1 - 1e-12)


def round_and_repair(relaxed, config: ScenarioConfig) -> Allocation:
    """Floor, redistribute leftover RUs, then top up violating users' power.

    RUs freed by flooring go first to users still short of their threshold
    (one extra RB per fractional mini-slot entry, largest fraction first),
    then to every remaining fractional entry by largest fraction.  Users
    still short after that get the power they need, taken from unallocated
    power and then proportionally from the targets.
    """
    n_req, n_rb, budget = config.n_req, config.num_rbs, config.ru_budget
    n_rel = np.asarray(relaxed.n, dtype=float)
    o_rel = np.asarray(relaxed.o, dtype=float).reshape(len(relaxed.p_k),
                                                    config.num_minislots_per_frame)
    n = np.clip(_floor(n_rel), n_req, n_rb)
    o = np.clip(_floor(o_rel), 1, n_rb)
    p_k = np.asarray(relaxed.p_k, dtype=float).copy()
    p_m = np.asarray(relaxed.p_m, dtype=float).copy()
    gains, gammas = np.asarray(relaxed.user_gains), np.asarray(relaxed.gammas)

    left = budget - int(n.sum() + o.sum())
    # trim if clamping overshot the budget (only possible for inconsistent input)
    while left < 0:
        idx = int(np.argmax(o)) if o.size and o.max() > 1 else None
        if idx is not None:
            o.flat[idx] -= 1
        else:
            i = int(np.argmax(n - n_req))
            if n[i] <= n_req:
                break
            n[i] -= 1
        left += 1

    frac_o = o_rel - _floor(o_rel)
    frac_o[(o_rel <= o) | (o >= n_rb)] = 0.0
    for k in range(len(p_k)):
        if left <= 0:
            break
        if _qos_ok(o[k], p_k[k], gains[k], gammas[k], config):
            continue
        for i in np.argsort(-frac_o[k], kind="stable"):
            if left <= 0 or frac_o[k, i] <= 0:
                break
            o[k, i] += 1
            frac_o[k, i] = 0.0
            left -= 1
            if _qos_ok(o[k], p_k[k], gains[k], gammas[k], config):
                break

    if left > 0:
        frac_n = n_rel - _floor(n_rel)
        frac_n[(n_rel <= n) | (n >= n_rb)] = 0.0
        fracs = np.concatenate([frac_n, frac_o.ravel()])
        for j in np.argsort(-fracs, kind="stable")[:left]:
            if fracs[j] <= 0:
                break
            if j < n.size:
                n[j] += 1
            else:
                o.flat[j - n.size] += 1

    repaired = False
    need = np.array([0.0 if _qos_ok(o[k], p_k[k], gains[k], gammas[k], config)
                     else required_power(o[k], gains[k], gammas[k], config) - p_k[k]
                     for k in range(len(p_k))])
    need = np.where(np.isfinite(need), np.maximum(need, 0.0), np.inf)
    if np.any(need > 0):
        repaired = True
        p_max = config.total_power
        want = p_k + need
        grant = want.copy()
        if not np.all(np.isfinite(grant)) or grant.sum() > p_max:
            # users cannot all be served; scale the increments into the whole budget
            inc = np.where(np.isfinite(need), need, p_max)
            room = max(p_max - p_k.sum(), 0.0)
            grant = p_k + inc * min(1.0, room / inc.sum())
            p_m[:] = 0.0
        else:
            excess = p_m.sum() + grant.sum() - p_max
            if excess > 0:
                p_m *= max(0.0, 1.0 - excess / p_m.sum())
        p_k = grant
    return Allocation(n.astype(np.int64), p_m, o.astype(np.int64), p_k,
                      np.asarray(relaxed.beam_idx, dtype=np.int64), repair_applied=repaired)
