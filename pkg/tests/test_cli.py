import csv
import json

import numpy as np
import pytest

from isac_track.cli import EXIT_USAGE, export_results, fmt, main, parse_args, parse_gamma_range
from isac_track.config import ScenarioConfig
from isac_track.harness import monte_carlo

DESK = {"num_targets": 2, "num_users": 2, "num_rbs": 64, "num_minislots_per_frame": 10,
        "distance_resolution": 3.0}


@pytest.fixture
def desk_file(tmp_path):
    p = tmp_path / "desk.json"
    p.write_text(json.dumps(DESK))
    return p


def test_parse_simulate():
    args = parse_args(["simulate", "--config", "c", "--trials", "100"])
    assert args.command == "simulate" and args.trials == 100 and str(args.config) == "c"
    assert args.methods == ["proposed", "rftep"]


def test_gamma_range_six_points():
    pts = parse_gamma_range("0.8:1.05:0.05")
    assert len(pts) == 6
    assert pts[0] == 0.8e6 and pts[-1] == pytest.approx(1.05e6)


def test_usage_errors(capsys):
    assert main([]) == EXIT_USAGE
    assert main(["simulate", "--bogus"]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["simulate", "--methods", "greedy"]) == EXIT_USAGE
    assert "usage" in capsys.readouterr().err


def test_invalid_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"time_correlation": 3.0}))
    assert main(["simulate", "--config", str(bad), "--trials", "1"]) == EXIT_USAGE
    assert "time_correlation" in capsys.readouterr().err


def test_fmt():
    assert fmt(1.0 / 3.0) == "0.333333333"
    assert fmt(True) == "1" and fmt(np.int64(7)) == "7"
    assert fmt(np.bool_(False)) == "0"


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_export_roundtrip_and_cardinality(tmp_path):
    cfg = ScenarioConfig(**DESK, num_frames=3)
    res = monte_carlo(cfg, ("proposed",), 2, seed=5)
    man = export_results(res, tmp_path, config=cfg)
    for name in man.artifacts:
        assert (tmp_path / name).exists()
    assert man.seeds == [5, 6]
    rows = _read(tmp_path / "metrics.csv")
    ep = res["proposed"].episodes[1]
    # 9 significant digits bound the round-trip error by half a unit in the 9th digit
    rel = 5e-9
    got = {(r["entity"], r["metric_name"]): float(r["value"]) for r in rows
           if r["trial"] == "1" and r["frame"] == "2"}
    assert got[("target:1", "pcrb_trace")] == pytest.approx(ep.metrics[1].pcrb_trace[1], rel=rel)
    assert got[("user:0", "throughput")] == pytest.approx(ep.metrics[1].throughput[0], rel=rel)
    traj = _read(tmp_path / "trajectories.csv")
    assert len(traj) == 2 * 3 * 2
    assert float(traj[0]["true_x"]) == pytest.approx(res["proposed"].episodes[0].true_states[0, 0, 0],
                                                     rel=rel)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seeds"] == [5, 6] and manifest["methods"] == ["proposed"]


def test_simulate_byte_identical(tmp_path, desk_file):
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        code = main(["simulate", "--config", str(desk_file), "--trials", "2", "--frames", "2",
                     "--seed", "3", "--out", str(out)])
        assert code == 0
        outs.append(out)
    for name in ("metrics.csv", "trajectories.csv", "allocations.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_track_and_sweep(tmp_path, desk_file, capsys):
    assert main(["track", "--config", str(desk_file), "--frames", "2", "--out",
                 str(tmp_path / "t")]) == 0
    assert len(_read(tmp_path / "t" / "trajectories.csv")) == 2 * 2
    assert main(["sweep", "--config", str(desk_file), "--frames", "1", "--trials", "1",
                 "--gamma-range", "0.8:0.9:0.05", "--out", str(tmp_path / "s")]) == 0
    sweep = _read(tmp_path / "s" / "sweep.csv")
    assert [float(r["gamma_bits"]) for r in sweep] == pytest.approx([0.8e6, 0.85e6, 0.9e6])
    man = json.loads((tmp_path / "s" / "manifest.json").read_text())
    assert man["seeds"] == [0]
    assert "mean PCRB" in capsys.readouterr().out


def test_oracle_command(capsys):
    assert main(["oracle", "--trials", "3"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 3
