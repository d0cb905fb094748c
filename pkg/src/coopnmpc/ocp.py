"""Per-agent local optimal control problem.

Holds the stacked decision trajectory layout (N stages of
(state, previous input) pairs, 6 values each), tracking costs, shooting
equality residuals, acceleration inequality residuals, the smooth
augmented objective used by the local solver, and the box projection.
"""
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .dynamics import AgentState, ControlInput, VehicleGeometry
from .errors import ConfigError
from .road import RoadProfile

N_STATE = 4
N_INPUT = 2
STAGE_DIM = N_STATE + N_INPUT


@dataclass(frozen=True)
class CostWeights:
    """Diagonal stage, terminal and input weights."""

    q_s: float
    q_dy: float
    q_dpsi: float
    q_v: float
    qN_s: float
    qN_dy: float
    qN_dpsi: float
    qN_v: float
    r_ax: float
    r_delta: float

    def __post_init__(self):
        state_w = (self.q_s, self.q_dy, self.q_dpsi, self.q_v,
                   self.qN_s, self.qN_dy, self.qN_dpsi, self.qN_v)
        if any(w < 0 for w in state_w):
            raise ConfigError("state weights must be nonnegative")
        if self.r_ax <= 0 or self.r_delta <= 0:
            raise ConfigError("input weights must be positive")

    def q(self) -> np.ndarray:
        return np.array([self.q_s, self.q_dy, self.q_dpsi, self.q_v])

    def qN(self) -> np.ndarray:
        return np.array([self.qN_s, self.qN_dy, self.qN_dpsi, self.qN_v])

    def r(self) -> np.ndarray:
        return np.array([self.r_ax, self.r_delta])


@dataclass(frozen=True)
class StageBounds:
    """Box bounds on (dy, v, ax, delta) plus acceleration limits.

    s and dpsi carry no bounds. The dy band is the only bound that
    changes with the maneuver phase.
    """

    dy_lo: float
    dy_hi: float
    v_hi: float
    ax_lo: float
    ax_hi: float
    delta_lo: float
    delta_hi: float
    ay_hi: float
    atot_hi: float

    def __post_init__(self):
        if self.dy_lo >= self.dy_hi:
            raise ConfigError("dy_lo must be < dy_hi")
        if self.v_hi <= 0:
            raise ConfigError("v_hi must be positive")
        if not (self.ax_lo < 0 < self.ax_hi):
            raise ConfigError("ax bounds must straddle zero")
        if not (self.delta_lo < 0 < self.delta_hi):
            raise ConfigError("delta bounds must straddle zero")
        if max(abs(self.delta_lo), self.delta_hi) >= np.pi / 2:
            raise ConfigError("steering bounds must lie strictly inside "
                              "(-pi/2, pi/2)")
        if self.ay_hi <= 0 or self.atot_hi <= 0:
            raise ConfigError("acceleration bounds must be positive")


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Reference states for stages 0..N (terminal included), (N+1, 4)."""

    values: np.ndarray

    @staticmethod
    def constant(n_horizon: int, dy_ref: float, v_ref: float,
                 s_ref: float = 0.0, dpsi_ref: float = 0.0
                 ) -> "ReferenceTrajectory":
        row = np.array([s_ref, dy_ref, dpsi_ref, v_ref])
        return ReferenceTrajectory(np.tile(row, (n_horizon + 1, 1)))


@dataclass
class AdmmLocalData:
    """Consensus targets z, duals lam and the fixed penalty rho."""

    z: np.ndarray
    lam: np.ndarray
    rho: float

    def __post_init__(self):
        if self.rho <= 0:
            raise ConfigError("rho must be positive")


def stage_cost(x: AgentState, u: ControlInput, ref, w: CostWeights) -> float:
    """u'Ru + (x - x_ref)'Q(x - x_ref) with diagonal weights."""
    dx = x.as_array() - np.asarray(ref, float)
    uu = u.as_array()
    return float(np.sum(w.q() * dx * dx) + np.sum(w.r() * uu * uu))


def terminal_cost(x: AgentState, ref, w: CostWeights) -> float:
    dx = x.as_array() - np.asarray(ref, float)
    return float(np.sum(w.qN() * dx * dx))


class AgentOcp:
    """One agent's local problem data for the current timestep.

    Bounds, references and the measured initial state are mutable (the
    maneuver state machine swaps them); everything else is fixed per
    scenario. Evaluation is reentrant, so distinct agents can be solved
    concurrently.
    """

    def __init__(self, road: RoadProfile, geom: VehicleGeometry,
                 weights: CostWeights, bounds: StageBounds,
                 refs: ReferenceTrajectory, x0: AgentState,
                 ts: float, n_horizon: int):
        if n_horizon < 1:
            raise ConfigError("horizon must be >= 1")
        self.road = road
        self.geom = geom
        self.weights = weights
        self.ts = float(ts)
        self.n = int(n_horizon)
        self.dim = STAGE_DIM * self.n
        self.set_bounds(bounds)
        self.set_references(refs)
        self.set_initial_state(x0)

    # mutable per-timestep data ------------------------------------------

    def set_initial_state(self, x0: AgentState):
        self.x0 = x0
        self._x0_arr = x0.as_array()

    def set_bounds(self, bounds: StageBounds):
        self.bounds = bounds
        self._dy_lo = np.full(self.n, bounds.dy_lo)
        self._dy_hi = np.full(self.n, bounds.dy_hi)

    def set_references(self, refs: ReferenceTrajectory):
        vals = np.asarray(refs.values, float)
        if vals.shape != (self.n + 1, N_STATE):
            raise ConfigError(
                f"reference trajectory must have shape ({self.n + 1}, 4)")
        self.refs = ReferenceTrajectory(vals)
        self._refs_arr = vals

    # evaluation ----------------------------------------------------------

    def _road_arrays(self):
        return self.road._arrays

    def dynamics_residual(self, xi: np.ndarray) -> np.ndarray:
        """Multiple-shooting equality residuals, length 4N."""
        h, _ = self._residuals(xi)
        return h

    def inequality_residual(self, xi: np.ndarray) -> np.ndarray:
        """Acceleration constraint rows, length 2N; feasible iff <= 0."""
        _, g = self._residuals(xi)
        return g

    def _residuals(self, xi):
        lo, hi, k = self._road_arrays()
        return backend.constraint_residuals(
            np.asarray(xi, float), self._x0_arr, self.ts, lo, hi, k,
            self.geom.lf, self.geom.lr, self.bounds.ay_hi,
            self.bounds.atot_hi)

    def smooth_objective(self, xi, admm: AdmmLocalData, mu, alpha) -> float:
        val, _ = self._objective(xi, admm, mu, alpha, want_grad=False)
        return val

    def smooth_objective_gradient(self, xi, admm: AdmmLocalData, mu, alpha):
        """Returns (value, exact gradient)."""
        return self._objective(xi, admm, mu, alpha, want_grad=True)

    def _objective(self, xi, admm, mu, alpha, want_grad):
        lo, hi, k = self._road_arrays()
        w = self.weights
        return backend.objective_and_grad(
            np.asarray(xi, float), want_grad, self._x0_arr, self.ts,
            lo, hi, k, self.geom.lf, self.geom.lr,
            w.q(), w.qN(), w.r(), self._refs_arr,
            np.asarray(admm.z, float), np.asarray(admm.lam, float),
            float(admm.rho), np.asarray(mu, float), float(alpha),
            self.bounds.ay_hi, self.bounds.atot_hi)

    def tracking_cost(self, xi) -> float:
        """Pure tracking cost (stage + terminal), no penalty terms."""
        zero = AdmmLocalData(z=np.zeros(self.n), lam=np.zeros(self.n),
                             rho=1.0)
        # rho=1 with z matched to xi's own s-trajectory cancels the
        # consensus term; alpha=0 kills penalties but h'mu stays 0.
        zero.z = self.s_trajectory(xi)
        val, _ = backend.objective_and_grad(
            np.asarray(xi, float), False, self._x0_arr, self.ts,
            *self._road_arrays(), self.geom.lf, self.geom.lr,
            self.weights.q(), self.weights.qN(), self.weights.r(),
            self._refs_arr, zero.z, np.zeros(self.n), 1.0,
            np.zeros(4 * self.n), 0.0, self.bounds.ay_hi,
            self.bounds.atot_hi)
        return val

    def project(self, xi) -> np.ndarray:
        """Componentwise clamp onto the feasible box."""
        b = self.bounds
        return backend.project_box(np.asarray(xi, float), self._dy_lo,
                                   self._dy_hi, b.v_hi, b.ax_lo, b.ax_hi,
                                   b.delta_lo, b.delta_hi)

    # helpers -------------------------------------------------------------

    def s_trajectory(self, xi) -> np.ndarray:
        """Consensus selector: path coordinate of every stage."""
        return np.asarray(xi, float).reshape(self.n, STAGE_DIM)[:, 0].copy()

    def rollout(self, inputs=None) -> np.ndarray:
        """Build a dynamically consistent trajectory from x0.

        With no inputs this is the constant-speed, zero-steering cold
        start; h vanishes on the result by construction.
        """
        lo, hi, k = self._road_arrays()
        if inputs is None:
            inputs = np.zeros((self.n, N_INPUT))
        inputs = np.asarray(inputs, float).reshape(self.n, N_INPUT)
        xi = np.empty(self.dim)
        x = self._x0_arr.copy()
        for b in range(self.n):
            x = backend.rk4_step_arr(x, inputs[b, 0], inputs[b, 1], self.ts,
                                     lo, hi, k, self.geom.lf, self.geom.lr)
            xi[STAGE_DIM * b:STAGE_DIM * b + N_STATE] = x
            xi[STAGE_DIM * b + N_STATE:STAGE_DIM * (b + 1)] = inputs[b]
        return xi

    def solver_problem(self, admm: AdmmLocalData) -> "AgentProblem":
        return AgentProblem(self, admm)


@dataclass
class AgentProblem:
    """Adapter binding an AgentOcp and its consensus data to the smooth
    box-constrained problem interface the local solver expects."""

    ocp: AgentOcp
    admm: AdmmLocalData

    @property
    def n_eq(self) -> int:
        return 4 * self.ocp.n

    def value(self, xi, mu, alpha) -> float:
        return self.ocp.smooth_objective(xi, self.admm, mu, alpha)

    def value_and_grad(self, xi, mu, alpha):
        return self.ocp.smooth_objective_gradient(xi, self.admm, mu, alpha)

    def residuals(self, xi):
        return self.ocp._residuals(xi)

    def project(self, xi):
        return self.ocp.project(xi)
