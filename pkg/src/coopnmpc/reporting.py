"""Trace emission and run summaries.

The trace is delimiter-separated text with a schema version line and a
fixed column order, one row per (timestep, agent); floats are written
with shortest round-trip formatting so identical runs produce identical
bytes.
"""
import csv
import json

from .errors import ConfigError
from .runtime import ManeuverPhase

TRACE_SCHEMA = "coopnmpc-trace-v1"
TRACE_COLUMNS = ["t", "agent_id", "s", "dy", "dpsi", "v", "ax", "delta",
                 "a_y", "phase", "admm_iters", "primal_res", "dual_res",
                 "solve_time", "comm_overhead", "slack_max"]


def _fmt(v) -> str:
    return repr(float(v))


def write_trace(traces, path):
    if not traces:
        raise ConfigError("cannot write an empty trace")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {TRACE_SCHEMA}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for tr in traces:
            for aid in sorted(tr.states):
                x = tr.states[aid]
                u = tr.inputs[aid]
                writer.writerow([
                    _fmt(tr.t), aid, _fmt(x.s), _fmt(x.dy), _fmt(x.dpsi),
                    _fmt(x.v), _fmt(u.ax), _fmt(u.delta),
                    _fmt(tr.lat_acc[aid]), tr.phase.value,
                    str(tr.admm_iters), _fmt(tr.primal_res),
                    _fmt(tr.dual_res), _fmt(tr.solve_time[aid]),
                    _fmt(tr.comm_overhead), _fmt(tr.slack_max),
                ])


def read_trace(path):
    """Rows as dicts; the inverse of write_trace's formatting."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != f"# {TRACE_SCHEMA}":
            raise ConfigError(f"unexpected trace schema line: {first!r}")
        return list(csv.DictReader(fh))


def report_summary(traces) -> dict:
    if not traces:
        raise ConfigError("cannot summarize an empty run")
    t_step1_end = None
    t_step2_end = None
    max_ax = {p.value: 0.0 for p in ManeuverPhase}
    max_wall = 0.0
    for tr in traces:
        if t_step1_end is None and tr.phase is ManeuverPhase.LANE_CHANGE:
            t_step1_end = tr.t
        if t_step2_end is None and tr.phase is ManeuverPhase.DONE:
            t_step2_end = tr.t
        ax = max(abs(u.ax) for u in tr.inputs.values())
        max_ax[tr.phase.value] = max(max_ax[tr.phase.value], ax)
        wall = max(tr.solve_time.values()) + tr.comm_overhead
        max_wall = max(max_wall, wall)
    return {
        "t_mstep1_end_s": t_step1_end,
        "t_mstep2_end_s": t_step2_end,
        "max_abs_ax_per_phase_mps2": max_ax,
        "max_admm_iters": max(tr.admm_iters for tr in traces),
        "max_timestep_wall_s": max_wall,
        "all_converged": all(tr.converged for tr in traces),
    }


def write_summary(summary: dict, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
