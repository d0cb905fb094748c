"""Shared fixtures: a small road, a reference vehicle, and helpers for
building agent problems at desk scale."""
import numpy as np
import pytest

from coopnmpc.dynamics import AgentState, VehicleGeometry
from coopnmpc.ocp import (AgentOcp, CostWeights, ReferenceTrajectory,
                          StageBounds)
from coopnmpc.road import RoadProfile


@pytest.fixture
def road():
    return RoadProfile(segments=((-50.0, 150.0, 0.0),
                                 (150.0, 400.0, 0.005)),
                       lane_width=4.0)


@pytest.fixture
def straight_road():
    return RoadProfile(segments=((-50.0, 500.0, 0.0),), lane_width=4.0)


@pytest.fixture
def geom():
    return VehicleGeometry(lf=1.4, lr=1.4, length=5.0, width=2.0)


@pytest.fixture
def weights():
    return CostWeights(q_s=0.0, q_dy=1.0, q_dpsi=100.0, q_v=1.0,
                       qN_s=0.0, qN_dy=1.0, qN_dpsi=100.0, qN_v=1.0,
                       r_ax=1.0, r_delta=600.0)


@pytest.fixture
def bounds():
    return StageBounds(dy_lo=-2.75, dy_hi=-1.25, v_hi=17.0,
                       ax_lo=-4.0, ax_hi=4.0,
                       delta_lo=-0.08726646259971647,
                       delta_hi=0.08726646259971647,
                       ay_hi=3.5, atot_hi=4.0)


@pytest.fixture
def make_ocp(road, geom, weights, bounds):
    def build(n_horizon=5, x0=None, refs=None, the_road=None):
        if x0 is None:
            x0 = AgentState(s=0.0, dy=-2.0, dpsi=0.0, v=14.0)
        if refs is None:
            refs = ReferenceTrajectory.constant(n_horizon, dy_ref=-2.0,
                                                v_ref=14.0)
        return AgentOcp(road=the_road or road, geom=geom, weights=weights,
                        bounds=bounds, refs=refs, x0=x0, ts=0.1,
                        n_horizon=n_horizon)
    return build


@pytest.fixture
def rng():
    return np.random.default_rng(20260826)
