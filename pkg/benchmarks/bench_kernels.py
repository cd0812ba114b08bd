"""Time the compiled and pure-numpy subgradient kernels on the same reference-scenario block.

Run with ``python3 benchmarks/bench_kernels.py [repeats]``.
"""

from __future__ import annotations

import sys
import time

import numpy as np

from isac_track import _kernels_py
from isac_track.allocator.bcd import bandwidth_scalarizations
from isac_track.channel import LN2
from isac_track.config import ScenarioConfig
from isac_track.harness import initial_state, plan_frame

try:
    from isac_track import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def block_inputs(cfg: ScenarioConfig, seed: int = 0, gamma: float = 1e9):
    """Kernel arguments for one block-1 solve with a binding threshold."""
    plan = plan_frame(initial_state(cfg, seed), cfg)
    prob = plan.problem
    m, k, slots = prob.num_targets, prob.num_users, cfg.num_minislots_per_frame
    p_m = np.full(m, cfg.total_power / (m + k))
    scal = bandwidth_scalarizations(prob, prob.prior_fims(), p_m, cfg)
    gains = (np.abs(prob.user_channels @ prob.codebook.beams.T) ** 2).max(axis=1)
    a = np.array([s.a for s in scal])
    b = np.array([s.b for s in scal])
    lb = np.concatenate([np.full(m, float(cfg.n_req)), np.full(k, float(slots)), np.zeros(k)])
    ub = np.concatenate([np.full(m, float(cfg.num_rbs)), np.full(k, float(slots * cfg.num_rbs)),
                         np.full(k, cfg.total_power - p_m.sum())])
    x0 = lb.copy()
    x0[m + k:] = cfg.total_power / (m + k)
    return (x0, lb, ub, a, b, lb[:m].copy(), slots * gains / (cfg.rb_bandwidth * cfg.noise_psd),
            np.full(k, gamma), cfg.rb_bandwidth / LN2, cfg.penalty_init, float(cfg.ru_budget),
            cfg.total_power - p_m.sum())


def bench(fn, args, repeats):
    fn(*args)  # warm
    t = time.perf_counter()
    for _ in range(repeats):
        out = fn(*args)
    return (time.perf_counter() - t) / repeats, out


def main(repeats: int = 20) -> None:
    args = block_inputs(ScenarioConfig())
    t_py, out_py = bench(_kernels_py.psg_solve, args, repeats)
    print(f"python  psg_solve: {t_py * 1e3:9.3f} ms   iterations {out_py[2]}  f {out_py[1]:.9g}")
    if _compiled is None:
        print("cython  extension not built; run `pip install -e . --no-build-isolation`")
        return
    t_cy, out_cy = bench(_compiled.psg_solve, args, repeats)
    print(f"cython  psg_solve: {t_cy * 1e3:9.3f} ms   iterations {out_cy[2]}  f {out_cy[1]:.9g}")
    print(f"speed-up {t_py / t_cy:.1f}x   max |x_cy - x_py| = {np.max(np.abs(out_cy[0] - out_py[0])):.3e}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 20)
