"""Kinematic bicycle model in the Frenet frame.

Continuous-time dynamics, sideslip, the derived lateral and total
acceleration quantities, and a classical RK4 zero-order-hold step. All
functions are pure; hot-loop variants live in the kernel backends.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import ConfigError, DynamicsDomainError
from .road import RoadProfile

_HALF_PI = math.pi / 2.0


@dataclass(frozen=True)
class AgentState:
    """[s, dy, dpsi, v]: path coordinate, lateral offset, heading error,
    speed."""

    s: float
    dy: float
    dpsi: float
    v: float

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.dy, self.dpsi, self.v])

    @staticmethod
    def from_array(arr) -> "AgentState":
        return AgentState(float(arr[0]), float(arr[1]), float(arr[2]),
                          float(arr[3]))


@dataclass(frozen=True)
class ControlInput:
    """[ax, delta]: longitudinal acceleration and wheel steering angle."""

    ax: float
    delta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.ax, self.delta])


@dataclass(frozen=True)
class VehicleGeometry:
    lf: float
    lr: float
    length: float
    width: float

    def __post_init__(self):
        if self.lf <= 0 or self.lr <= 0:
            raise ConfigError("axle distances lf, lr must be positive")
        if self.length < self.lf + self.lr:
            raise ConfigError("vehicle length must cover lf + lr")
        if self.width <= 0:
            raise ConfigError("vehicle width must be positive")


def sideslip(delta: float, geom: VehicleGeometry) -> float:
    """Sideslip angle beta = arctan(tan(delta) * lr / (lf + lr))."""
    if abs(delta) >= _HALF_PI:
        raise DynamicsDomainError(f"|delta|={abs(delta)} >= pi/2")
    return math.atan(math.tan(delta) * geom.lr / (geom.lf + geom.lr))


def dynamics_rhs(x: AgentState, u: ControlInput, kappa: float,
                 geom: VehicleGeometry) -> AgentState:
    """Continuous-time state derivative at curvature kappa."""
    if abs(u.delta) >= _HALF_PI:
        raise DynamicsDomainError(f"|delta|={abs(u.delta)} >= pi/2")
    if 1.0 - x.dy * kappa <= 1e-12:
        raise DynamicsDomainError(
            f"frame singularity: 1 - dy*kappa = {1.0 - x.dy * kappa}")
    out = backend.rhs_single(x.s, x.dy, x.dpsi, x.v, u.ax, u.delta,
                             kappa, geom.lf, geom.lr)
    return AgentState.from_array(out)


def rk4_step(x: AgentState, u: ControlInput, ts: float,
             profile: RoadProfile, geom: VehicleGeometry) -> AgentState:
    """One RK4 step with the input held constant over [t, t+ts].

    Curvature is re-evaluated at each internal stage's path coordinate.
    """
    if abs(u.delta) >= _HALF_PI:
        raise DynamicsDomainError(f"|delta|={abs(u.delta)} >= pi/2")
    lo, hi, k = profile._arrays
    out = backend.rk4_step_arr(x.as_array(), u.ax, u.delta, ts, lo, hi, k,
                               geom.lf, geom.lr)
    if not np.all(np.isfinite(out)):
        raise DynamicsDomainError("frame singularity inside RK4 step")
    return AgentState.from_array(out)


def lateral_accel(x: AgentState, u: ControlInput,
                  geom: VehicleGeometry) -> float:
    """a_y = (v cos(beta)) * (v sin(beta)) / lr."""
    beta = sideslip(u.delta, geom)
    return (x.v * math.cos(beta)) * (x.v * math.sin(beta)) / geom.lr


def total_accel_sq(x: AgentState, u: ControlInput,
                   geom: VehicleGeometry) -> float:
    """Squared total acceleration ax^2 + a_y^2 (squared form keeps the
    bound constraint smooth)."""
    ay = lateral_accel(x, u, geom)
    return u.ax * u.ax + ay * ay
