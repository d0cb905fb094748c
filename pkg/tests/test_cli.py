from pathlib import Path

import pytest

from coopnmpc.cli import build_parser, main, validate_run
from coopnmpc.config import load_scenario
from coopnmpc.dynamics import AgentState, ControlInput
from coopnmpc.reporting import read_trace
from coopnmpc.runtime import ManeuverPhase, TimestepTrace

SCENARIO = Path(__file__).resolve().parent.parent / "scenarios" / \
    "paper_3agent.yaml"


def _trace(cfg, **overrides):
    states = {a.agent_id: a.initial for a in cfg.agents}
    inputs = {a.agent_id: ControlInput(0.0, 0.0) for a in cfg.agents}
    base = dict(t=0.0, phase=ManeuverPhase.ESTABLISH_HEADWAY, states=states,
                inputs=inputs,
                lat_acc={a.agent_id: 0.0 for a in cfg.agents},
                admm_iters=2, primal_res=0.0, dual_res=0.0,
                residual_history=[], solve_time={a.agent_id: 0.01
                                                 for a in cfg.agents},
                comm_overhead=0.012, slack_max=0.0, eps={}, converged=True)
    base.update(overrides)
    return TimestepTrace(**base)


@pytest.fixture(scope="module")
def cfg():
    return load_scenario(SCENARIO)


def test_validate_clean_run(cfg):
    assert validate_run(cfg, [_trace(cfg)]) == []


def test_validate_flags_cap_hit(cfg):
    out = validate_run(cfg, [_trace(cfg, converged=False)])
    assert any("iteration cap" in p for p in out)


def test_validate_flags_input_bound(cfg):
    tr = _trace(cfg)
    tr.inputs["sa"] = ControlInput(4.5, 0.0)
    out = validate_run(cfg, [tr])
    assert any("ax" in p and "sa" in p for p in out)


def test_validate_flags_band_violation(cfg):
    tr = _trace(cfg)
    tr.states["sa"] = AgentState(6.0, 0.0, 0.0, 14.0)  # between lanes
    out = validate_run(cfg, [tr])
    assert any("band" in p for p in out)
    # ... but the same offset is fine mid lane change
    tr2 = _trace(cfg, phase=ManeuverPhase.LANE_CHANGE)
    tr2.states["sa"] = AgentState(6.0, 0.0, 0.0, 14.0)
    assert validate_run(cfg, [tr2]) == []


def test_parser_modes():
    args = build_parser().parse_args(
        ["simulate", "s.yaml", "--mode", "centralized", "--max-time", "1"])
    assert args.mode == "centralized"
    assert args.max_time == 1.0


def test_main_short_run_writes_outputs(tmp_path):
    out = tmp_path / "trace.csv"
    summ = tmp_path / "summary.json"
    rc = main(["simulate", str(SCENARIO), "--out", str(out),
               "--summary", str(summ), "--max-time", "0.3"])
    assert rc == 0
    rows = read_trace(out)
    assert len(rows) == 3 * 3  # three timesteps, three agents
    assert summ.exists()


def test_main_rejects_bad_scenario(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("schema: wrong\n")
    assert main(["simulate", str(bad)]) == 2
