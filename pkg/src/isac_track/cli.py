"""Command-line entry point: ``isac-track {simulate,sweep,track,oracle}``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__
from .allocator import InfeasibleError
from .config import ConfigError, ScenarioConfig, load_config
from .estimation import NumericalError
from .harness import (METHODS, MonteCarloSummary, monte_carlo, run_episode, summarize,
                      tradeoff_sweep)

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
MBIT = 1e6


def fmt(value) -> str:
    """Decimal text with 9 significant digits; booleans as 0/1."""
    if isinstance(value, bool) or type(value).__name__ == "bool_":
        return "1" if value else "0"
    if isinstance(value, (int,)) or type(value).__name__.startswith("int"):
        return str(int(value))
    return f"{float(value):.9g}"


def parse_gamma_range(text: str) -> list[float]:
    """``LO:HI:STEP`` in Mbit, inclusive of both ends, returned in bits."""
    try:
        lo, hi, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI:STEP, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError("need STEP > 0 and HI >= LO")
    count = int(round((hi - lo) / step)) + 1
    return [round(lo + i * step, 12) * MBIT for i in range(count)]


def parse_methods(text: str) -> list[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise argparse.ArgumentTypeError(f"unknown method(s) {bad}; choose from {list(METHODS)}")
    return methods


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isac-track", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON or TOML scenario file")
    common.add_argument("--seed", type=int, default=None, help="base seed (trial t uses seed+t)")
    common.add_argument("--frames", type=int, default=None, help="frames per episode")
    common.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    common.add_argument("--workers", type=int, default=1, help="worker processes")

    sim = sub.add_parser("simulate", parents=[common], help="Monte Carlo comparison of methods")
    sim.add_argument("--trials", type=int, default=100)
    sim.add_argument("--methods", type=parse_methods, default=["proposed", "rftep"])

    sw = sub.add_parser("sweep", parents=[common], help="throughput-threshold trade-off curve")
    sw.add_argument("--trials", type=int, default=50)
    sw.add_argument("--gamma-range", type=parse_gamma_range,
                    default=parse_gamma_range("0.8:1.05:0.05"), help="LO:HI:STEP in Mbit")
    sw.add_argument("--methods", type=parse_methods, default=["proposed"])

    tr = sub.add_parser("track", parents=[common], help="single-episode trajectory export")
    tr.add_argument("--methods", type=parse_methods, default=["proposed"])
    tr.add_argument("--trials", type=int, default=1)

    orc = sub.add_parser("oracle", help="run the brute-force reference checks")
    orc.add_argument("--seed", type=int, default=0)
    orc.add_argument("--trials", type=int, default=20)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    return build_parser().parse_args(argv)


@dataclass
class RunManifest:
    command: str
    config: dict
    seeds: list[int]
    methods: list[str]
    artifacts: list[str]
    tool_version: str
    wall_clock_seconds: float


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _metric_rows(summaries: dict[str, MonteCarloSummary]):
    for method, summ in summaries.items():
        for trial, ep in enumerate(summ.episodes):
            for u, fm in enumerate(ep.metrics, start=1):
                for name in ("pcrb_trace", "position_error", "velocity_error",
                             "dead_reckoning_error"):
                    for i, v in enumerate(getattr(fm, name)):
                        yield [trial, u, method, f"target:{i}", name, fmt(v)]
                for name in ("throughput", "qos_feasible"):
                    for k, v in enumerate(getattr(fm, name)):
                        yield [trial, u, method, f"user:{k}", name, fmt(v)]
                for name in ("solver_iterations", "objective_value", "repair_applied"):
                    yield [trial, u, method, "frame", name, fmt(getattr(fm, name))]


def _trajectory_rows(summaries):
    for method, summ in summaries.items():
        for trial, ep in enumerate(summ.episodes):
            for u in range(len(ep.metrics)):
                for i, (t, e) in enumerate(zip(ep.true_states[u], ep.estimates[u])):
                    yield [trial, u + 1, method, i, fmt(t[0]), fmt(t[1]), fmt(e[0]), fmt(e[1]),
                           fmt(t[2]), fmt(t[3]), fmt(e[2]), fmt(e[3])]


def _allocation_rows(summaries):
    for method, summ in summaries.items():
        for trial, ep in enumerate(summ.episodes):
            for u, a in enumerate(ep.allocations, start=1):
                for i, (n, p) in enumerate(zip(a.target_rbs, a.target_powers)):
                    yield [trial, u, method, "target", i, fmt(n), fmt(p), "", fmt(a.budget_exempt)]
                for k, (o, p, b) in enumerate(zip(a.user_rbs, a.user_powers, a.user_beam_idx)):
                    yield [trial, u, method, "user", k, fmt(o.sum()), fmt(p), fmt(b),
                           fmt(a.budget_exempt)]


def export_results(summaries: dict[str, MonteCarloSummary], out_dir: Path, *,
                   config: ScenarioConfig, command: str = "simulate", started: float | None = None,
                   extra: dict[str, list[list]] | None = None,
                   seeds: list[int] | None = None,
                   methods: list[str] | None = None) -> RunManifest:
    """Write metrics, trajectories, allocations (and any ``extra`` tables) plus a manifest."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        _write_csv(out_dir / "metrics.csv",
                   ["trial", "frame", "method", "entity", "metric_name", "value"],
                   _metric_rows(summaries))
        written.append("metrics.csv")
        _write_csv(out_dir / "trajectories.csv",
                   ["trial", "frame", "method", "target_id", "true_x", "true_y", "est_x", "est_y",
                    "true_vx", "true_vy", "est_vx", "est_vy"], _trajectory_rows(summaries))
        written.append("trajectories.csv")
        _write_csv(out_dir / "allocations.csv",
                   ["trial", "frame", "method", "kind", "id", "rbs", "power_w", "beam",
                    "budget_exempt"], _allocation_rows(summaries))
        written.append("allocations.csv")
        for name, rows in (extra or {}).items():
            _write_csv(out_dir / name, rows[0], rows[1:])
            written.append(name)
        if seeds is None:
            seeds = sorted({s for summ in summaries.values() for s in summ.seeds})
        manifest = RunManifest(command, config.to_dict(), seeds,
                               list(summaries) if methods is None else list(methods), written,
                               __version__, round(time.time() - started, 3) if started else 0.0)
        (out_dir / "manifest.json").write_text(json.dumps(asdict(manifest), indent=2, sort_keys=True)
                                               + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write results under {out_dir}: {exc}") from exc
    return manifest


def _load(args) -> ScenarioConfig:
    overrides = {}
    if args.frames is not None:
        overrides["num_frames"] = args.frames
    if args.config is not None:
        cfg = load_config(args.config, **overrides)
    else:
        cfg = ScenarioConfig(**overrides)
    if args.seed is not None:
        cfg = cfg.replace(rng_seed=args.seed)
    from .config import validate_config
    return validate_config(cfg)


def _print_summary(summaries: dict[str, MonteCarloSummary]) -> None:
    for m, s in summaries.items():
        print(f"{m:12s} mean PCRB trace {s.overall_pcrb:.6g}  QoS ratio {s.overall_qos_ratio:.4f}  "
              f"final position RMSE {s.position_rmse[-1]:.4g} m")


def _run(args) -> int:
    started = time.time()
    if args.command == "oracle":
        from .oracles import run_oracles
        ok = True
        for name, value, tol in run_oracles(args.seed, args.trials):
            passed = value <= tol
            ok &= passed
            print(f"{'PASS' if passed else 'FAIL'}  {name}: {value:.3e} (tolerance {tol:.0e})")
        return EXIT_OK if ok else EXIT_RUNTIME

    cfg = _load(args)
    if args.trials < 1:
        raise argparse.ArgumentTypeError("--trials must be >= 1")
    if args.command == "simulate":
        res = monte_carlo(cfg, args.methods, args.trials, cfg.rng_seed, args.workers)
        export_results(res, args.out, config=cfg, command="simulate", started=started)
        _print_summary(res)
    elif args.command == "track":
        res = {m: summarize(m, [run_episode(cfg, m, cfg.rng_seed + t) for t in range(args.trials)])
               for m in args.methods}
        export_results(res, args.out, config=cfg, command="track", started=started)
        _print_summary(res)
    elif args.command == "sweep":
        rows = [["method", "gamma_bits", "mean_pcrb_trace"]]
        for m in args.methods:
            for g, v in tradeoff_sweep(cfg, args.gamma_range, args.trials, cfg.rng_seed,
                                       args.workers, method=m):
                rows.append([m, fmt(g), fmt(v)])
                print(f"{m:12s} gamma {g / MBIT:.4g} Mbit  mean PCRB trace {v:.6g}")
        export_results({}, args.out, config=cfg, command="sweep", started=started,
                       extra={"sweep.csv": rows},
                       seeds=[cfg.rng_seed + t for t in range(args.trials)], methods=args.methods)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return _run(args)
    except argparse.ArgumentTypeError as exc:
        parser.print_usage(sys.stderr)
        print(f"isac-track: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"isac-track: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleError, NumericalError, OSError, ValueError, ArithmeticError) as exc:
        print(f"isac-track: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
