import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coopnmpc.dynamics import (AgentState, ControlInput, VehicleGeometry,
                               dynamics_rhs, lateral_accel, rk4_step,
                               sideslip, total_accel_sq)
from coopnmpc.errors import ConfigError, DynamicsDomainError
from coopnmpc.road import RoadProfile


def _fine_integrate(x, u, ts, road, geom, substeps=1000):
    """Independent oracle: midpoint (RK2) integration with many substeps."""
    state = x
    h = ts / substeps
    for _ in range(substeps):
        k1 = dynamics_rhs(state, u, road.curvature_at(state.s), geom)
        mid = AgentState(state.s + 0.5 * h * k1.s,
                         state.dy + 0.5 * h * k1.dy,
                         state.dpsi + 0.5 * h * k1.dpsi,
                         state.v + 0.5 * h * k1.v)
        k2 = dynamics_rhs(mid, u, road.curvature_at(mid.s), geom)
        state = AgentState(state.s + h * k2.s, state.dy + h * k2.dy,
                           state.dpsi + h * k2.dpsi, state.v + h * k2.v)
    return state


def test_sideslip_formula(geom):
    # [TRIVIAL] beta = arctan(tan(delta) lr / (lf + lr)) with lf = lr
    d = 0.05
    assert sideslip(d, geom) == pytest.approx(math.atan(math.tan(d) * 0.5))
    assert sideslip(0.0, geom) == 0.0
    with pytest.raises(DynamicsDomainError):
        sideslip(math.pi / 2, geom)


def test_rhs_straight_road(geom, straight_road):
    # [DERIVED] on a straight road with zero steering: pure translation
    x = AgentState(s=10.0, dy=-2.0, dpsi=0.0, v=14.0)
    u = ControlInput(ax=1.5, delta=0.0)
    dx = dynamics_rhs(x, u, 0.0, geom)
    assert dx.s == pytest.approx(14.0)
    assert dx.dy == pytest.approx(0.0)
    assert dx.dpsi == pytest.approx(0.0)
    assert dx.v == pytest.approx(1.5)


def test_rhs_curvature_term(geom):
    # [DERIVED] dy velocity = v sin(dpsi + beta); s rate scaled by 1/(1 - dy k)
    x = AgentState(s=0.0, dy=1.0, dpsi=0.1, v=10.0)
    u = ControlInput(ax=0.0, delta=0.02)
    kappa = 0.01
    b = sideslip(u.delta, VehicleGeometry(1.4, 1.4, 5.0, 2.0))
    dx = dynamics_rhs(x, u, kappa, geom)
    den = 1.0 - 1.0 * kappa
    assert dx.s == pytest.approx(10.0 * math.cos(0.1 + b) / den, rel=1e-12)
    assert dx.dy == pytest.approx(10.0 * math.sin(0.1 + b), rel=1e-12)
    assert dx.dpsi == pytest.approx(
        10.0 / 1.4 * math.sin(b) - 10.0 * math.cos(0.1) * kappa / den,
        rel=1e-12)


def test_rhs_singularity(geom):
    x = AgentState(s=0.0, dy=2.0, dpsi=0.0, v=10.0)
    with pytest.raises(DynamicsDomainError):
        dynamics_rhs(x, ControlInput(0.0, 0.0), 0.5, geom)


def test_rk4_matches_fine_integration(road, geom, rng):
    # [DERIVED] RK4 vs 1000-substep midpoint integration, <= 1e-6 per state
    for _ in range(20):
        x = AgentState(s=float(rng.uniform(-20, 200)),
                       dy=float(rng.uniform(-2.5, 2.5)),
                       dpsi=float(rng.uniform(-0.1, 0.1)),
                       v=float(rng.uniform(5.0, 17.0)))
        u = ControlInput(ax=float(rng.uniform(-4, 4)),
                         delta=float(rng.uniform(-0.087, 0.087)))
        got = rk4_step(x, u, 0.1, road, geom)
        ref = _fine_integrate(x, u, 0.1, road, geom)
        for a, b in zip(got.as_array(), ref.as_array()):
            assert abs(a - b) <= 1e-6


def test_rk4_observed_order(road, geom):
    # [DERIVED] step halving: error ratio ~ 2^4 against a tight reference
    x = AgentState(s=5.0, dy=1.0, dpsi=0.05, v=12.0)
    u = ControlInput(ax=2.0, delta=0.05)
    ref = _fine_integrate(x, u, 0.4, road, geom, substeps=200000)

    def err(n_steps):
        state = x
        h = 0.4 / n_steps
        for _ in range(n_steps):
            state = rk4_step(state, u, h, road, geom)
        return float(np.max(np.abs(state.as_array() - ref.as_array())))

    e1, e2 = err(2), err(4)
    ratio = e1 / e2
    assert 10.0 < ratio < 25.0  # 2^4 = 16 up to higher-order terms


def test_lateral_and_total_accel(geom):
    x = AgentState(0.0, 0.0, 0.0, 14.0)
    u = ControlInput(ax=2.0, delta=0.05)
    b = sideslip(u.delta, geom)
    ay = (14.0 * math.cos(b)) * (14.0 * math.sin(b)) / 1.4
    assert lateral_accel(x, u, geom) == pytest.approx(ay, rel=1e-12)
    assert total_accel_sq(x, u, geom) == pytest.approx(4.0 + ay * ay,
                                                       rel=1e-12)
    assert lateral_accel(x, ControlInput(0.0, 0.0), geom) == 0.0


def test_geometry_validation():
    with pytest.raises(ConfigError):
        VehicleGeometry(lf=0.0, lr=1.4, length=5.0, width=2.0)
    with pytest.raises(ConfigError):
        VehicleGeometry(lf=1.4, lr=1.4, length=2.0, width=2.0)
    with pytest.raises(ConfigError):
        VehicleGeometry(lf=1.4, lr=1.4, length=5.0, width=0.0)


def test_state_array_round_trip():
    x = AgentState(1.0, 2.0, 3.0, 4.0)
    assert AgentState.from_array(x.as_array()) == x


@settings(max_examples=30, deadline=None)
@given(v=st.floats(1.0, 17.0), dy=st.floats(-2.5, 2.5),
       dpsi=st.floats(-0.2, 0.2), ax=st.floats(-4.0, 4.0),
       delta=st.floats(-0.087, 0.087))
def test_rk4_property_accuracy(v, dy, dpsi, ax, delta):
    road = RoadProfile(segments=((-50.0, 500.0, 0.003),), lane_width=4.0)
    geom = VehicleGeometry(1.4, 1.4, 5.0, 2.0)
    x = AgentState(0.0, dy, dpsi, v)
    u = ControlInput(ax, delta)
    got = rk4_step(x, u, 0.1, road, geom)
    ref = _fine_integrate(x, u, 0.1, road, geom)
    assert np.max(np.abs(got.as_array() - ref.as_array())) <= 1e-6
