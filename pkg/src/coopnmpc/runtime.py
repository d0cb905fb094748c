"""Receding-horizon closed loop.

Per timestep: run the consensus loop (parallelizable agent solves, a
coordination QP that acts as the synchronization barrier, dual step,
stopping test), apply each agent's first optimized input to its plant,
then shift every warm-start quantity by one stage. A small state
machine drives the maneuver: establish headway, change lanes, done.
Agents are visited in sorted-id order so traces are deterministic no
matter how the solves would be scheduled.
"""
import time as _time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import backend
from .config import ScenarioConfig
from .coordinator import (ConsensusState, HeadwayGraph, Residuals,
                          check_stop, compute_residuals, dual_step,
                          solve_coordination_qp)
from .dynamics import AgentState, ControlInput, lateral_accel, rk4_step
from .errors import ConfigError
from .ocp import (STAGE_DIM, AdmmLocalData, AgentOcp, ReferenceTrajectory)
from .solver import alm_solve


class ManeuverPhase(Enum):
    ESTABLISH_HEADWAY = "establish_headway"
    LANE_CHANGE = "lane_change"
    DONE = "done"


_PHASE_ORDER = [ManeuverPhase.ESTABLISH_HEADWAY, ManeuverPhase.LANE_CHANGE,
                ManeuverPhase.DONE]


@dataclass(frozen=True)
class NetworkModel:
    per_message_latency: float = 0.003

    def __post_init__(self):
        if self.per_message_latency < 0:
            raise ConfigError("latency must be nonnegative")


def account_comm_overhead(admm_iters: int, network: NetworkModel) -> float:
    """Two messages per iteration: agents up, coordinator broadcast down."""
    return admm_iters * 2 * network.per_message_latency


@dataclass
class TimestepTrace:
    t: float
    phase: ManeuverPhase
    states: dict
    inputs: dict
    lat_acc: dict
    admm_iters: int
    primal_res: float
    dual_res: float
    residual_history: list
    solve_time: dict
    comm_overhead: float
    slack_max: float
    eps: dict
    converged: bool


def check_headway_established(s_trajs: dict, states: dict,
                              graph: HeadwayGraph, subject: str) -> bool:
    """True iff every headway edge touching the subject holds at the
    current time and at every predicted stage (inclusive)."""
    for follower, leader in graph.edge_list():
        if subject not in (follower, leader):
            continue
        if states[leader].s - states[follower].s < graph.d_hw:
            return False
        gap = np.asarray(s_trajs[leader], float) - np.asarray(
            s_trajs[follower], float)
        if np.min(gap) < graph.d_hw:
            return False
    return True


def apply_phase_switch(phase: ManeuverPhase, cfg: ScenarioConfig,
                       dy_bands: dict, dy_refs: dict,
                       graph: HeadwayGraph):
    """New per-agent lateral bands/references and graph for a phase."""
    dy_bands = dict(dy_bands)
    dy_refs = dict(dy_refs)
    sa = cfg.subject_agent
    if phase is ManeuverPhase.LANE_CHANGE:
        dy_bands[sa] = tuple(cfg.lane_change_band)
        dy_refs[sa] = cfg.road.lane_center(cfg.target_lane)
    elif phase is ManeuverPhase.DONE:
        dy_bands[sa] = tuple(cfg.lane_bands[cfg.target_lane])
        vacated = cfg.agent(sa).lane
        lanes = {a.agent_id: a.lane for a in cfg.agents}
        edges = {}
        for follower, leaders in graph.edges.items():
            kept = tuple(l for l in leaders
                         if sa not in (follower, l)
                         or lanes[l if follower == sa else follower]
                         != vacated)
            if kept:
                edges[follower] = kept
        graph = HeadwayGraph(edges=edges, d_hw=graph.d_hw)
    return dy_bands, dy_refs, graph


class Simulation:
    """Closed-loop runner for one scenario.

    mode 'distributed' runs the consensus loop; 'centralized' solves the
    stacked problem monolithically each timestep (oracle path).
    """

    def __init__(self, cfg: ScenarioConfig, mode: str = "distributed"):
        if mode not in ("distributed", "centralized"):
            raise ConfigError("mode must be 'distributed' or 'centralized'")
        self.cfg = cfg
        self.mode = mode
        self.network = NetworkModel(cfg.latency)
        self.graph = HeadwayGraph(edges=cfg.edges, d_hw=cfg.d_hw)
        self.phase = ManeuverPhase.ESTABLISH_HEADWAY
        self.order = sorted(a.agent_id for a in cfg.agents)
        self._done_counter = 0
        self.n = cfg.n_stages

        self.dy_bands = {a.agent_id: cfg.band_for(a) for a in cfg.agents}
        self.dy_refs = {a.agent_id: cfg.road.lane_center(a.lane)
                        for a in cfg.agents}

        self.plant = {}
        self.ocps = {}
        self.xi = {}
        self.mu = {}
        self.z = {}
        self.lam = {}
        self._eps_warm = {}
        for a in cfg.agents:
            aid = a.agent_id
            self.plant[aid] = a.initial
            refs = ReferenceTrajectory.constant(self.n, self.dy_refs[aid],
                                                a.v_ref)
            ocp = AgentOcp(road=cfg.road, geom=a.geometry,
                           weights=a.weights,
                           bounds=cfg.bounds_for(a, self.dy_bands[aid]),
                           refs=refs, x0=a.initial, ts=cfg.sample_time,
                           n_horizon=self.n)
            self.ocps[aid] = ocp
            self.xi[aid] = ocp.rollout()
            self.mu[aid] = np.zeros(4 * self.n)
            self.penalty = getattr(self, "penalty", {})
            self.penalty[aid] = None
            self.z[aid] = ocp.s_trajectory(self.xi[aid])
            self.lam[aid] = np.zeros(self.n)

    # phase machine ------------------------------------------------------

    def _advance_phase(self):
        cfg = self.cfg
        if self.phase is ManeuverPhase.ESTABLISH_HEADWAY:
            s_trajs = {a: self.ocps[a].s_trajectory(self.xi[a])
                       for a in self.order}
            if check_headway_established(s_trajs, self.plant, self.graph,
                                         cfg.subject_agent):
                self._switch_to(ManeuverPhase.LANE_CHANGE)
        elif self.phase is ManeuverPhase.LANE_CHANGE:
            sa = self.plant[cfg.subject_agent]
            target = cfg.road.lane_center(cfg.target_lane)
            settled = (abs(sa.dy - target) <= cfg.done_dy_tol
                       and abs(sa.dpsi) <= cfg.done_dpsi_tol)
            self._done_counter = self._done_counter + 1 if settled else 0
            if self._done_counter >= cfg.done_hold_samples:
                self._switch_to(ManeuverPhase.DONE)

    def _switch_to(self, phase: ManeuverPhase):
        if _PHASE_ORDER.index(phase) <= _PHASE_ORDER.index(self.phase):
            raise ConfigError("maneuver phases only move forward")
        self.phase = phase
        self.dy_bands, self.dy_refs, self.graph = apply_phase_switch(
            phase, self.cfg, self.dy_bands, self.dy_refs, self.graph)
        for a in self.cfg.agents:
            aid = a.agent_id
            ocp = self.ocps[aid]
            ocp.set_bounds(self.cfg.bounds_for(a, self.dy_bands[aid]))
            ocp.set_references(ReferenceTrajectory.constant(
                self.n, self.dy_refs[aid], a.v_ref))

    # one timestep -------------------------------------------------------

    def run_timestep(self, t: float) -> TimestepTrace:
        self._advance_phase()
        for aid in self.order:
            self.ocps[aid].set_initial_state(self.plant[aid])
        if self.mode == "centralized":
            trace = self._centralized_timestep(t)
        else:
            trace = self._distributed_timestep(t)
        for aid in self.order:
            self.plant[aid] = rk4_step(self.plant[aid], trace.inputs[aid],
                                       self.cfg.sample_time, self.cfg.road,
                                       self.cfg.agent(aid).geometry)
        self._shift_warm_start()
        return trace

    def _distributed_timestep(self, t: float) -> TimestepTrace:
        cfg = self.cfg
        solve_time = {a: 0.0 for a in self.order}
        history = []
        z_prev = {a: self.z[a].copy() for a in self.order}
        eps = {}
        res = Residuals(np.inf, np.inf)
        iters = 0
        converged = False

        while iters < cfg.max_admm_iters:
            iters += 1
            s_trajs = {}
            for aid in self.order:
                admm = AdmmLocalData(z=self.z[aid], lam=self.lam[aid],
                                     rho=cfg.rho)
                tic = _time.perf_counter()
                sol = alm_solve(self.ocps[aid].solver_problem(admm),
                                self.xi[aid], cfg.solver, mu0=self.mu[aid],
                                penalty0=self.penalty[aid])
                solve_time[aid] += _time.perf_counter() - tic
                self.xi[aid] = sol.xi
                self.mu[aid] = sol.mu
                self.penalty[aid] = sol.penalty
                s_trajs[aid] = self.ocps[aid].s_trajectory(sol.xi)

            state = ConsensusState(z=self.z, lam=self.lam, rho=cfg.rho,
                                   q_eps=cfg.q_eps)
            tic = _time.perf_counter()
            result = solve_coordination_qp(s_trajs, state, self.graph)
            solve_time[cfg.subject_agent] += _time.perf_counter() - tic
            self.lam = dual_step(state, s_trajs, result.z)
            res = compute_residuals(s_trajs, result.z, z_prev, cfg.rho)
            history.append(res)
            self.z = result.z
            z_prev = {a: result.z[a].copy() for a in self.order}
            eps = result.eps
            if check_stop(res, cfg.eps_primal, cfg.eps_dual):
                converged = True
                break

        return self._make_trace(t, iters, res, history, solve_time,
                                eps, converged,
                                account_comm_overhead(iters, self.network))

    def _centralized_timestep(self, t: float) -> TimestepTrace:
        from .centralized import solve_centralized
        tic = _time.perf_counter()
        stacked, _, eps, sol = solve_centralized(
            self.ocps, self.graph, self.cfg, warm_xi=self.xi,
            warm_eps=self._eps_warm)
        elapsed = _time.perf_counter() - tic
        for aid in self.order:
            self.xi[aid] = stacked[aid]
            self.z[aid] = self.ocps[aid].s_trajectory(stacked[aid])
        self._eps_warm = eps
        solve_time = {a: 0.0 for a in self.order}
        solve_time[self.cfg.subject_agent] = elapsed
        res = Residuals(0.0, 0.0)
        return self._make_trace(t, 1, res, [res], solve_time, eps,
                                sol.converged, 0.0)

    def _make_trace(self, t, iters, res, history, solve_time, eps,
                    converged, comm):
        inputs = {}
        lat = {}
        for aid in self.order:
            u = self.xi[aid][4:STAGE_DIM]
            inputs[aid] = ControlInput(ax=float(u[0]), delta=float(u[1]))
            lat[aid] = lateral_accel(self.plant[aid], inputs[aid],
                                     self.cfg.agent(aid).geometry)
        return TimestepTrace(
            t=t, phase=self.phase, states=dict(self.plant), inputs=inputs,
            lat_acc=lat, admm_iters=iters, primal_res=res.primal_norm,
            dual_res=res.dual_norm, residual_history=history,
            solve_time=solve_time, comm_overhead=comm,
            slack_max=max((float(np.max(v)) for v in eps.values()),
                          default=0.0), eps=dict(eps),
            converged=converged)

    # warm start ---------------------------------------------------------

    def _shift_warm_start(self):
        """Drop the executed stage and append a dynamically extrapolated
        one; consensus targets and all duals shift alongside."""
        lo, hi, k = self.cfg.road._arrays
        for a in self.cfg.agents:
            aid = a.agent_id
            xi = self.xi[aid]
            x_last = xi[-STAGE_DIM:-2]
            u_last = xi[-2:]
            x_next = backend.rk4_step_arr(x_last, float(u_last[0]),
                                          float(u_last[1]),
                                          self.cfg.sample_time, lo, hi, k,
                                          a.geometry.lf, a.geometry.lr)
            self.xi[aid] = np.concatenate([xi[STAGE_DIM:], x_next, u_last])
            z = self.z[aid]
            tail = (2 * z[-1] - z[-2] if z.size >= 2
                    else z[-1] + a.initial.v * self.cfg.sample_time)
            self.z[aid] = np.concatenate([z[1:], [tail]])
            lam = self.lam[aid]
            self.lam[aid] = np.concatenate([lam[1:], lam[-1:]])
            mu = self.mu[aid]
            self.mu[aid] = np.concatenate([mu[4:], mu[-4:]])
            # Cap the carried penalty weight between timesteps: it may
            # escalate again inside a solve, but ratcheting it
            # monotonically across the horizon would eventually freeze
            # the inner solver on an ill-conditioned subproblem.
            if self.penalty[aid] is not None:
                self.penalty[aid] = min(self.penalty[aid], 1e4)

    # full run -----------------------------------------------------------

    def run(self, max_time: float = None) -> list:
        end = self.cfg.end_time if max_time is None else min(
            self.cfg.end_time, max_time)
        n_steps = int(round(end / self.cfg.sample_time))
        traces = []
        for k in range(n_steps):
            traces.append(self.run_timestep(k * self.cfg.sample_time))
        return traces


def simulate(cfg: ScenarioConfig, mode: str = "distributed",
             max_time: float = None) -> list:
    return Simulation(cfg, mode=mode).run(max_time=max_time)
