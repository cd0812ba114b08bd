"""Per-frame resource allocation: SCA/penalty RB block, water-filling power block, BCD."""

from .bcd import (FrameProblem, bcd_relaxed, bcd_solve, make_problem, sensing_objective,
                  target_pcrb)
from .power import InfeasibleError, select_beam, select_beams, solve_power_block
from .rounding import min_rb_requirement, round_and_repair
from .sca import RelaxedAllocation, SolveDiagnostics, solve_bandwidth_power_block

__all__ = [
    "FrameProblem", "InfeasibleError", "RelaxedAllocation", "SolveDiagnostics", "bcd_relaxed",
    "bcd_solve", "make_problem", "min_rb_requirement", "round_and_repair", "select_beam",
    "select_beams", "sensing_objective", "solve_bandwidth_power_block", "solve_power_block",
    "target_pcrb",
]
