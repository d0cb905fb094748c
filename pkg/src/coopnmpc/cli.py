"""Command-line entry point.

``coopnmpc simulate scenario.yaml --out trace.csv`` runs the closed
loop and writes the trace; the exit code is nonzero if any timestep
failed to converge or any applied step violated the configured bounds.
"""
import argparse
import sys

from .config import ScenarioConfig, load_scenario
from .errors import CoopNmpcError
from .reporting import report_summary, write_summary, write_trace
from .runtime import ManeuverPhase, Simulation

_TOL = 1e-3


def validate_run(cfg: ScenarioConfig, traces) -> list:
    """Closed-loop bound violations as human-readable strings."""
    problems = []
    for tr in traces:
        if not tr.converged:
            problems.append(f"t={tr.t:.2f}: consensus loop hit the "
                            "iteration cap")
        for a in cfg.agents:
            aid = a.agent_id
            x = tr.states[aid]
            u = tr.inputs[aid]
            band = _active_band(cfg, aid, tr.phase)
            checks = [
                (abs(u.ax) <= a.ax_max + _TOL, f"|ax|={abs(u.ax):.3f}"),
                (abs(u.delta) <= a.delta_max + _TOL,
                 f"|delta|={abs(u.delta):.4f}"),
                (abs(tr.lat_acc[aid]) <= a.ay_max + _TOL,
                 f"|a_y|={abs(tr.lat_acc[aid]):.3f}"),
                ((u.ax ** 2 + tr.lat_acc[aid] ** 2) ** 0.5
                 <= a.atot_max + _TOL,
                 "a_tot out of bounds"),
                (-_TOL <= x.v <= a.v_max + _TOL, f"v={x.v:.3f}"),
                (band[0] - _TOL <= x.dy <= band[1] + _TOL,
                 f"dy={x.dy:.3f} outside band {band}"),
            ]
            for ok, msg in checks:
                if not ok:
                    problems.append(f"t={tr.t:.2f} agent {aid}: {msg}")
    return problems


def _active_band(cfg: ScenarioConfig, aid: str, phase: ManeuverPhase):
    a = cfg.agent(aid)
    if aid != cfg.subject_agent:
        return cfg.lane_bands[a.lane]
    if phase is ManeuverPhase.ESTABLISH_HEADWAY:
        return cfg.lane_bands[a.lane]
    if phase is ManeuverPhase.LANE_CHANGE:
        return cfg.lane_change_band
    return cfg.lane_bands[cfg.target_lane]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coopnmpc",
        description="Distributed cooperative lane-change NMPC simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", help="run a scenario closed loop")
    sim.add_argument("scenario", help="scenario YAML file")
    sim.add_argument("--out", help="trace output path (CSV)")
    sim.add_argument("--mode", choices=["distributed", "centralized"],
                     default="distributed")
    sim.add_argument("--max-time", type=float, default=None,
                     help="truncate the simulation at this time [s]")
    sim.add_argument("--summary", help="summary output path (JSON)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_scenario(args.scenario)
        traces = Simulation(cfg, mode=args.mode).run(max_time=args.max_time)
    except CoopNmpcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        write_trace(traces, args.out)
    summary = report_summary(traces)
    if args.summary:
        write_summary(summary, args.summary)
    problems = validate_run(cfg, traces)
    for p in problems:
        print(f"violation: {p}", file=sys.stderr)
    print(f"simulated {len(traces)} steps; "
          f"phase-1 end {summary['t_mstep1_end_s']} s; "
          f"phase-2 end {summary['t_mstep2_end_s']} s; "
          f"max consensus iterations {summary['max_admm_iters']}")
    return 1 if problems else 0


if __name__ == "__main__":
    sys.exit(main())
