"""Scenario configuration: YAML loading, validation and round-trip save.

Field names carry explicit units (``d_hw_m``, ``sample_time_s``) so a
scenario file is unambiguous without reading code.
"""
from dataclasses import dataclass, field

import numpy as np
import yaml

from .dynamics import AgentState, VehicleGeometry
from .errors import ConfigError
from .ocp import CostWeights, StageBounds
from .road import RoadProfile
from .solver import SolverSettings

SCHEMA = "coopnmpc-scenario-v1"


@dataclass(frozen=True)
class AgentConfig:
    agent_id: str
    lane: str
    initial: AgentState
    geometry: VehicleGeometry
    weights: CostWeights
    v_ref: float
    v_max: float
    ax_max: float
    delta_max: float
    ay_max: float
    atot_max: float

    def __post_init__(self):
        if self.lane not in ("left", "right"):
            raise ConfigError(f"agents[{self.agent_id}].lane must be "
                              "'left' or 'right'")
        for name, v in (("v_ref_mps", self.v_ref), ("v_max_mps", self.v_max),
                        ("ax_max_mps2", self.ax_max),
                        ("delta_max_rad", self.delta_max),
                        ("ay_max_mps2", self.ay_max),
                        ("atot_max_mps2", self.atot_max)):
            if v <= 0:
                raise ConfigError(
                    f"agents[{self.agent_id}].{name} must be positive")
        if self.delta_max >= np.pi / 2:
            raise ConfigError(f"agents[{self.agent_id}].delta_max_rad must "
                              "be < pi/2")
        if self.v_ref > self.v_max:
            raise ConfigError(f"agents[{self.agent_id}].v_ref_mps exceeds "
                              "v_max_mps")


@dataclass(frozen=True)
class ScenarioConfig:
    road: RoadProfile
    agents: tuple
    subject_agent: str
    target_lane: str
    edges: dict
    d_hw: float
    lane_bands: dict
    lane_change_band: tuple
    n_stages: int
    sample_time: float
    rho: float
    q_eps: float
    eps_primal: float
    eps_dual: float
    max_admm_iters: int
    solver: SolverSettings
    latency: float
    end_time: float
    seed: int
    done_dy_tol: float = 0.25
    done_dpsi_tol: float = 0.02
    done_hold_samples: int = 5

    def __post_init__(self):
        ids = [a.agent_id for a in self.agents]
        if len(set(ids)) != len(ids):
            raise ConfigError("agents: duplicate agent_id")
        if self.subject_agent not in ids:
            raise ConfigError("maneuver.subject_agent_id not among agents")
        if self.target_lane not in ("left", "right"):
            raise ConfigError("maneuver.target_lane must be 'left' or "
                              "'right'")
        for f, leaders in self.edges.items():
            for l in (f, *leaders):
                if l not in ids:
                    raise ConfigError(f"headway.edges references unknown "
                                      f"agent {l!r}")
        if self.n_stages < 1:
            raise ConfigError("horizon.n_stages must be >= 1")
        if self.sample_time <= 0:
            raise ConfigError("horizon.sample_time_s must be positive")
        if self.rho <= 0:
            raise ConfigError("consensus.rho must be positive")
        if self.q_eps <= 0:
            raise ConfigError("consensus.q_eps must be positive")
        if self.eps_primal < 0 or self.eps_dual < 0:
            raise ConfigError("consensus stopping thresholds must be "
                              "nonnegative")
        if self.max_admm_iters < 1:
            raise ConfigError("consensus.max_admm_iters must be >= 1")
        if self.d_hw <= 0:
            raise ConfigError("headway.d_hw_m must be positive")
        if self.latency < 0:
            raise ConfigError("network.per_message_latency_s must be "
                              "nonnegative")
        if self.end_time <= 0:
            raise ConfigError("simulation.end_time_s must be positive")
        for lane in ("left", "right"):
            if lane not in self.lane_bands:
                raise ConfigError(f"lanes.{lane}_band_m missing")
            lo, hi = self.lane_bands[lane]
            if lo >= hi:
                raise ConfigError(f"lanes.{lane}_band_m must be increasing")
        lo, hi = self.lane_change_band
        if lo >= hi:
            raise ConfigError("maneuver.lane_change_band_m must be "
                              "increasing")
        self._check_road_coverage()

    def _check_road_coverage(self):
        reach = max(a.initial.s for a in self.agents) + max(
            a.v_max for a in self.agents) * (
            self.end_time + self.n_stages * self.sample_time)
        lo = min(a.initial.s for a in self.agents)
        if self.road.s_min > lo or self.road.s_max < reach:
            raise ConfigError(
                "road.segments must cover the reachable path range "
                f"[{lo:.1f}, {reach:.1f}] m")

    def agent(self, agent_id: str) -> AgentConfig:
        for a in self.agents:
            if a.agent_id == agent_id:
                return a
        raise KeyError(agent_id)

    def band_for(self, agent: AgentConfig) -> tuple:
        return tuple(self.lane_bands[agent.lane])

    def bounds_for(self, agent: AgentConfig, dy_band) -> StageBounds:
        return StageBounds(dy_lo=float(dy_band[0]), dy_hi=float(dy_band[1]),
                           v_hi=agent.v_max, ax_lo=-agent.ax_max,
                           ax_hi=agent.ax_max, delta_lo=-agent.delta_max,
                           delta_hi=agent.delta_max, ay_hi=agent.ay_max,
                           atot_hi=agent.atot_max)


def _need(mapping, key, where):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ConfigError(f"missing field {where}.{key}" if where
                          else f"missing field {key}")
    return mapping[key]


def _num(mapping, key, where):
    v = _need(mapping, key, where)
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{where}.{key} must be a number")
    return float(v)


def load_scenario(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ConfigError("scenario file must contain a mapping")
    if raw.get("schema") != SCHEMA:
        raise ConfigError(f"schema must be {SCHEMA!r}")
    return scenario_from_dict(raw)


def scenario_from_dict(raw: dict) -> ScenarioConfig:
    road_raw = _need(raw, "road", "")
    segs = _need(road_raw, "segments", "road")
    if not isinstance(segs, list) or not segs:
        raise ConfigError("road.segments must be a non-empty list")
    segments = tuple(
        (_num(s, "s_start_m", f"road.segments[{i}]"),
         _num(s, "s_end_m", f"road.segments[{i}]"),
         _num(s, "curvature_1pm", f"road.segments[{i}]"))
        for i, s in enumerate(segs))
    road = RoadProfile(segments=segments,
                       lane_width=_num(road_raw, "lane_width_m", "road"))

    defaults = raw.get("defaults", {})

    def agent_cfg(i, a):
        where = f"agents[{i}]"
        aid = _need(a, "id", where)
        init = _need(a, "initial", where)
        def block(name):
            return (a[name] if name in a
                    else _need(defaults, name, "defaults"))

        geo = block("geometry")
        w = block("weights")
        b = block("bounds")
        return AgentConfig(
            agent_id=str(aid),
            lane=str(_need(a, "lane", where)),
            initial=AgentState(s=_num(init, "s_m", f"{where}.initial"),
                               dy=_num(init, "dy_m", f"{where}.initial"),
                               dpsi=_num(init, "dpsi_rad",
                                         f"{where}.initial"),
                               v=_num(init, "v_mps", f"{where}.initial")),
            geometry=VehicleGeometry(
                lf=_num(geo, "lf_m", "geometry"),
                lr=_num(geo, "lr_m", "geometry"),
                length=_num(geo, "length_m", "geometry"),
                width=_num(geo, "width_m", "geometry")),
            weights=CostWeights(
                q_s=_num(w, "q_s", "weights"),
                q_dy=_num(w, "q_dy", "weights"),
                q_dpsi=_num(w, "q_dpsi", "weights"),
                q_v=_num(w, "q_v", "weights"),
                qN_s=_num(w, "qN_s", "weights"),
                qN_dy=_num(w, "qN_dy", "weights"),
                qN_dpsi=_num(w, "qN_dpsi", "weights"),
                qN_v=_num(w, "qN_v", "weights"),
                r_ax=_num(w, "r_ax", "weights"),
                r_delta=_num(w, "r_delta", "weights")),
            v_ref=_num(a, "v_ref_mps", where),
            v_max=_num(b, "v_max_mps", "bounds"),
            ax_max=_num(b, "ax_max_mps2", "bounds"),
            delta_max=_num(b, "delta_max_rad", "bounds"),
            ay_max=_num(b, "ay_max_mps2", "bounds"),
            atot_max=_num(b, "atot_max_mps2", "bounds"))

    agents_raw = _need(raw, "agents", "")
    if not isinstance(agents_raw, list) or not agents_raw:
        raise ConfigError("agents must be a non-empty list")
    agents = tuple(agent_cfg(i, a) for i, a in enumerate(agents_raw))

    horizon = _need(raw, "horizon", "")
    consensus = _need(raw, "consensus", "")
    headway = _need(raw, "headway", "")
    lanes = _need(raw, "lanes", "")
    maneuver = _need(raw, "maneuver", "")
    network = raw.get("network", {})
    sim = raw.get("simulation", {})
    solver_raw = raw.get("solver", {})

    edges_raw = _need(headway, "edges", "headway")
    if not isinstance(edges_raw, dict):
        raise ConfigError("headway.edges must be a mapping")
    edges = {str(f): tuple(str(l) for l in ls)
             for f, ls in edges_raw.items()}

    solver = SolverSettings(
        inner_tol=float(solver_raw.get("inner_tol", 1e-4)),
        constraint_tol=float(solver_raw.get("constraint_tol", 5e-4)),
        penalty_init=float(solver_raw.get("penalty_init", 100.0)),
        penalty_max=float(solver_raw.get("penalty_max", 1e6)),
        max_outer=int(solver_raw.get("max_outer", 10)),
        max_inner=int(solver_raw.get("max_inner", 500)),
        lbfgs_memory=int(solver_raw.get("lbfgs_memory", 10)))

    return ScenarioConfig(
        road=road,
        agents=agents,
        subject_agent=str(_need(maneuver, "subject_agent_id", "maneuver")),
        target_lane=str(_need(maneuver, "target_lane", "maneuver")),
        edges=edges,
        d_hw=_num(headway, "d_hw_m", "headway"),
        lane_bands={"left": tuple(_need(lanes, "left_band_m", "lanes")),
                    "right": tuple(_need(lanes, "right_band_m", "lanes"))},
        lane_change_band=tuple(_need(maneuver, "lane_change_band_m",
                                     "maneuver")),
        n_stages=int(_num(horizon, "n_stages", "horizon")),
        sample_time=_num(horizon, "sample_time_s", "horizon"),
        rho=_num(consensus, "rho", "consensus"),
        q_eps=float(consensus.get("q_eps", 100.0)),
        eps_primal=float(consensus.get("eps_primal", 0.1)),
        eps_dual=float(consensus.get("eps_dual", 10.0)),
        max_admm_iters=int(consensus.get("max_admm_iters", 30)),
        solver=solver,
        latency=float(network.get("per_message_latency_s", 0.003)),
        end_time=float(sim.get("end_time_s", 12.0)),
        seed=int(sim.get("seed", 0)),
        done_dy_tol=float(maneuver.get("done_dy_tol_m", 0.25)),
        done_dpsi_tol=float(maneuver.get("done_dpsi_tol_rad", 0.02)),
        done_hold_samples=int(maneuver.get("done_hold_samples", 5)))


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "schema": SCHEMA,
        "road": {
            "lane_width_m": cfg.road.lane_width,
            "segments": [{"s_start_m": a, "s_end_m": b, "curvature_1pm": k}
                         for a, b, k in cfg.road.segments],
        },
        "horizon": {"n_stages": cfg.n_stages,
                    "sample_time_s": cfg.sample_time},
        "consensus": {"rho": cfg.rho, "q_eps": cfg.q_eps,
                      "eps_primal": cfg.eps_primal,
                      "eps_dual": cfg.eps_dual,
                      "max_admm_iters": cfg.max_admm_iters},
        "headway": {"d_hw_m": cfg.d_hw,
                    "edges": {f: list(ls) for f, ls in cfg.edges.items()}},
        "lanes": {"left_band_m": list(cfg.lane_bands["left"]),
                  "right_band_m": list(cfg.lane_bands["right"])},
        "maneuver": {"subject_agent_id": cfg.subject_agent,
                     "target_lane": cfg.target_lane,
                     "lane_change_band_m": list(cfg.lane_change_band),
                     "done_dy_tol_m": cfg.done_dy_tol,
                     "done_dpsi_tol_rad": cfg.done_dpsi_tol,
                     "done_hold_samples": cfg.done_hold_samples},
        "network": {"per_message_latency_s": cfg.latency},
        "simulation": {"end_time_s": cfg.end_time, "seed": cfg.seed},
        "solver": {"inner_tol": cfg.solver.inner_tol,
                   "constraint_tol": cfg.solver.constraint_tol,
                   "penalty_init": cfg.solver.penalty_init,
                   "penalty_max": cfg.solver.penalty_max,
                   "max_outer": cfg.solver.max_outer,
                   "max_inner": cfg.solver.max_inner,
                   "lbfgs_memory": cfg.solver.lbfgs_memory},
        "agents": [{
            "id": a.agent_id,
            "lane": a.lane,
            "initial": {"s_m": a.initial.s, "dy_m": a.initial.dy,
                        "dpsi_rad": a.initial.dpsi, "v_mps": a.initial.v},
            "geometry": {"lf_m": a.geometry.lf, "lr_m": a.geometry.lr,
                         "length_m": a.geometry.length,
                         "width_m": a.geometry.width},
            "weights": {"q_s": a.weights.q_s, "q_dy": a.weights.q_dy,
                        "q_dpsi": a.weights.q_dpsi, "q_v": a.weights.q_v,
                        "qN_s": a.weights.qN_s, "qN_dy": a.weights.qN_dy,
                        "qN_dpsi": a.weights.qN_dpsi,
                        "qN_v": a.weights.qN_v,
                        "r_ax": a.weights.r_ax,
                        "r_delta": a.weights.r_delta},
            "bounds": {"v_max_mps": a.v_max, "ax_max_mps2": a.ax_max,
                       "delta_max_rad": a.delta_max,
                       "ay_max_mps2": a.ay_max,
                       "atot_max_mps2": a.atot_max},
            "v_ref_mps": a.v_ref,
        } for a in cfg.agents],
    }


def save_scenario(cfg: ScenarioConfig, path):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(scenario_to_dict(cfg), fh, sort_keys=False)
