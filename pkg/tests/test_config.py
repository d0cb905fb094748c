import copy

import pytest

from coopnmpc.config import (load_scenario, save_scenario,
                             scenario_from_dict, scenario_to_dict)
from coopnmpc.errors import ConfigError

from pathlib import Path

SCENARIO = Path(__file__).resolve().parent.parent / "scenarios" / \
    "paper_3agent.yaml"


@pytest.fixture(scope="module")
def cfg():
    return load_scenario(SCENARIO)


@pytest.fixture
def raw(cfg):
    return scenario_to_dict(cfg)


def test_reference_scenario_values(cfg):
    # [PAPER] headline configuration values of the three-vehicle scenario
    assert cfg.n_stages == 15
    assert cfg.sample_time == 0.1
    assert cfg.rho == 100.0
    assert cfg.d_hw == 15.0
    assert cfg.road.lane_width == 4.0
    assert cfg.max_admm_iters == 30
    assert cfg.latency == 0.003
    assert cfg.subject_agent == "sa"
    assert cfg.target_lane == "left"
    assert [a.agent_id for a in cfg.agents] == ["pat", "sa", "fat"]
    assert [a.initial.s for a in cfg.agents] == [12.0, 6.0, 0.0]
    assert {a.initial.dy for a in cfg.agents} == {2.0, -2.0}
    for a in cfg.agents:
        assert a.v_ref == 14.0
        assert a.v_max == 17.0
        assert a.ax_max == 4.0
        assert a.ay_max == 3.5
        assert a.atot_max == 4.0
        assert a.delta_max == pytest.approx(0.08726646259971647)
        assert (a.weights.q_s, a.weights.q_dy, a.weights.q_dpsi,
                a.weights.q_v) == (0.0, 1.0, 100.0, 1.0)
        assert (a.weights.r_ax, a.weights.r_delta) == (1.0, 600.0)
    assert cfg.lane_bands["left"] == (1.25, 2.75)
    assert cfg.lane_bands["right"] == (-2.75, -1.25)
    assert cfg.lane_change_band == (-2.75, 2.75)
    assert cfg.edges == {"sa": ("pat",), "fat": ("sa", "pat")}


def test_bounds_for_builds_stage_bounds(cfg):
    a = cfg.agent("sa")
    b = cfg.bounds_for(a, cfg.band_for(a))
    assert (b.dy_lo, b.dy_hi) == (-2.75, -1.25)
    assert (b.ax_lo, b.ax_hi) == (-4.0, 4.0)
    assert b.v_hi == 17.0


def test_round_trip_equality(cfg, tmp_path):
    p = tmp_path / "scenario.yaml"
    save_scenario(cfg, p)
    again = load_scenario(p)
    assert again == cfg


def test_missing_field_names_the_path(raw):
    bad = copy.deepcopy(raw)
    del bad["road"]["lane_width_m"]
    with pytest.raises(ConfigError, match="lane_width_m"):
        scenario_from_dict(bad)
    bad = copy.deepcopy(raw)
    del bad["headway"]["d_hw_m"]
    with pytest.raises(ConfigError, match="d_hw_m"):
        scenario_from_dict(bad)
    bad = copy.deepcopy(raw)
    del bad["agents"][0]["initial"]["v_mps"]
    with pytest.raises(ConfigError, match="v_mps"):
        scenario_from_dict(bad)


def test_invalid_band_named_error(raw):
    bad = copy.deepcopy(raw)
    bad["lanes"]["left_band_m"] = [2.75, 1.25]
    with pytest.raises(ConfigError, match="left_band_m"):
        scenario_from_dict(bad)


def test_non_numeric_field_rejected(raw):
    bad = copy.deepcopy(raw)
    bad["horizon"]["sample_time_s"] = "fast"
    with pytest.raises(ConfigError, match="sample_time_s"):
        scenario_from_dict(bad)


def test_unknown_edge_agent_rejected(raw):
    bad = copy.deepcopy(raw)
    bad["headway"]["edges"]["ghost"] = ["pat"]
    with pytest.raises(ConfigError, match="ghost"):
        scenario_from_dict(bad)


def test_schema_line_checked(tmp_path, raw):
    import yaml
    bad = copy.deepcopy(raw)
    bad["schema"] = "something-else"
    p = tmp_path / "bad.yaml"
    p.write_text(yaml.safe_dump(bad))
    with pytest.raises(ConfigError, match="schema"):
        load_scenario(p)


def test_road_coverage_check(raw):
    bad = copy.deepcopy(raw)
    bad["road"]["segments"] = [
        {"s_start_m": -20.0, "s_end_m": 100.0, "curvature_1pm": 0.005}]
    with pytest.raises(ConfigError, match="cover"):
        scenario_from_dict(bad)
