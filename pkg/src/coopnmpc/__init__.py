"""Distributed nonlinear MPC for cooperative lane changing.

Connected vehicles each solve a local box-constrained trajectory
problem; a coordinator enforces minimum headway through a small QP; a
consensus loop with dual updates drives the agents to agreement every
sample time of a receding-horizon simulation.
"""
from .backend import BACKEND
from .config import (AgentConfig, ScenarioConfig, load_scenario,
                     save_scenario)
from .coordinator import (ConsensusState, CoordinationResult, HeadwayGraph,
                          Residuals, check_stop, compute_residuals,
                          dual_step, solve_coordination_qp)
from .dynamics import (AgentState, ControlInput, VehicleGeometry,
                       dynamics_rhs, lateral_accel, rk4_step, sideslip,
                       total_accel_sq)
from .errors import (ConfigError, CoopNmpcError, DynamicsDomainError,
                     RoadRangeError)
from .ocp import (AdmmLocalData, AgentOcp, CostWeights,
                  ReferenceTrajectory, StageBounds, stage_cost,
                  terminal_cost)
from .road import RoadProfile
from .runtime import (ManeuverPhase, NetworkModel, Simulation,
                      TimestepTrace, account_comm_overhead,
                      apply_phase_switch, check_headway_established,
                      simulate)
from .solver import LocalSolution, SolverSettings, alm_solve, panoc_solve

__version__ = "1.0.0"

__all__ = [
    "AgentConfig", "AgentOcp", "AgentState", "AdmmLocalData", "BACKEND",
    "ConfigError", "ConsensusState", "ControlInput", "CoopNmpcError",
    "CoordinationResult", "CostWeights", "DynamicsDomainError",
    "HeadwayGraph", "LocalSolution", "ManeuverPhase", "NetworkModel",
    "ReferenceTrajectory", "Residuals", "RoadProfile", "RoadRangeError",
    "ScenarioConfig", "Simulation", "SolverSettings", "StageBounds",
    "TimestepTrace", "VehicleGeometry", "account_comm_overhead",
    "alm_solve", "apply_phase_switch", "check_headway_established",
    "check_stop", "compute_residuals", "dual_step", "dynamics_rhs",
    "lateral_accel", "load_scenario", "panoc_solve", "rk4_step",
    "save_scenario", "sideslip", "simulate", "solve_coordination_qp",
    "stage_cost", "terminal_cost", "total_accel_sq",
]
