import json
import math

import numpy as np
import pytest

from isac_track.config import ConfigError, ScenarioConfig, config_from_dict, load_config, validate_config
from isac_track.scenario import KMH, Allocation, AllocationError, generate_scenario


def test_table1_defaults_valid(table1):
    assert validate_config(table1) is table1
    assert table1.rb_bandwidth == pytest.approx(1.44e6)
    assert table1.total_power == pytest.approx(10 ** (53 / 10) / 1e3)
    assert table1.beamwidth == pytest.approx(0.072257, abs=1e-6)
    assert table1.n_req == 70
    assert table1.ru_budget == 160 * 264


@pytest.mark.parametrize("field,value", [("time_correlation", 1.2), ("num_rbs", 0),
                                         ("total_power", -1.0), ("num_targets", 0),
                                         ("rb_bandwidth", 1e6)])
def test_invalid_config_names_field(field, value):
    with pytest.raises(ConfigError) as exc:
        validate_config(ScenarioConfig(**{field: value}))
    assert exc.value.field_name == field
    assert field in str(exc.value)


def test_ru_budget_feasibility_checked():
    with pytest.raises(ConfigError, match="M x n_req"):
        validate_config(ScenarioConfig(num_rbs=70, num_minislots_per_frame=1, num_users=1))


def test_load_json_and_toml_roundtrip(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"num_targets": 3, "throughput_thresholds": 2e6}))
    cfg = load_config(p)
    assert cfg.num_targets == 3 and cfg.throughput_thresholds == 2e6
    t = tmp_path / "c.toml"
    t.write_text("num_users = 4\nprocess_noise_levels = 0.5\n")
    assert load_config(t).num_users == 4
    assert config_from_dict(cfg.to_dict()) == cfg


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict({"not_a_field": 1})


def test_per_user_thresholds_broadcast():
    cfg = ScenarioConfig(num_users=2, throughput_thresholds=(1.0, 2.0))
    assert np.array_equal(cfg.gammas(), [1.0, 2.0])
    with pytest.raises(ConfigError):
        validate_config(ScenarioConfig(num_users=3, throughput_thresholds=(1.0, 2.0)))


def test_scenario_deterministic_and_in_area(table1):
    a_t, a_u = generate_scenario(table1, 7)
    b_t, b_u = generate_scenario(table1, 7)
    assert len(a_t) == 10 and len(a_u) == 10
    for x, y in zip(a_t, b_t):
        assert np.array_equal(x.state, y.state) and np.array_equal(x.ekf_estimate, y.ekf_estimate)
    for x, y in zip(a_u, b_u):
        assert np.array_equal(x.channel, y.channel)
    for t in a_t:
        assert 0 <= t.state[0] <= 200 and -100 <= t.state[1] <= 100
    for u in a_u:
        assert 20 <= u.distance <= 40 and u.channel.shape == (64,)


def test_speed_range():
    cfg = ScenarioConfig(num_targets=100, num_users=0)
    speeds = []
    for s in range(100):
        speeds += [np.hypot(*t.state[2:]) for t in generate_scenario(cfg, s)[0]]
    speeds = np.array(speeds) / KMH
    assert len(speeds) == 10_000
    assert speeds.min() >= 0 and speeds.max() <= 30 + 1e-9
    assert speeds.max() > 29.5


def test_allocation_rejects_negative_power(table1):
    with pytest.raises(AllocationError):
        Allocation(np.array([70]), np.array([-1.0]), np.zeros((0, 160), int), np.zeros(0),
                   np.zeros(0, int))


def test_allocation_check_flags_budget(table1):
    a = Allocation(np.full(10, 264), np.full(10, 10.0), np.full((10, 160), 264), np.full(10, 10.0),
                   np.zeros(10, int))
    with pytest.raises(AllocationError, match="RU budget"):
        a.check(table1)
    assert a.violations(table1)


def test_throughput_scale_toggle():
    assert ScenarioConfig().throughput_scale == 1.0
    assert ScenarioConfig(throughput_uses_minislot_duration=True).throughput_scale == 62.5e-6
    assert math.isclose(ScenarioConfig().sigma_s2, ScenarioConfig().noise_psd * 1.44e6)
