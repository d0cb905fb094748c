import numpy as np
import pytest

from coopnmpc.ocp import AdmmLocalData
from coopnmpc.solver import (LocalSolution, SolverSettings, alm_solve,
                             panoc_solve)


class QuadraticBoxProblem:
    """min 1/2 x'Hx + c'x over a box, with optional equality Ex = d.

    Small dense problem with a known solution, used as an oracle for the
    inner and outer solvers. The mu/alpha arguments follow the agent
    problem interface: value = f + mu'h + alpha/2 ||h||^2.
    """

    def __init__(self, H, c, lo, hi, E=None, d=None):
        self.H, self.c = np.asarray(H, float), np.asarray(c, float)
        self.lo, self.hi = np.asarray(lo, float), np.asarray(hi, float)
        self.E = np.zeros((0, self.c.size)) if E is None else np.asarray(E)
        self.d = np.zeros(0) if d is None else np.asarray(d, float)

    @property
    def n_eq(self):
        return self.E.shape[0]

    def _h(self, x):
        return self.E @ x - self.d

    def value(self, x, mu, alpha):
        h = self._h(x)
        return float(0.5 * x @ self.H @ x + self.c @ x + mu @ h
                     + 0.5 * alpha * h @ h)

    def value_and_grad(self, x, mu, alpha):
        h = self._h(x)
        g = self.H @ x + self.c + self.E.T @ (mu + alpha * h)
        return self.value(x, mu, alpha), g

    def residuals(self, x):
        return self._h(x), np.zeros(0)

    def project(self, x):
        return np.clip(x, self.lo, self.hi)


def test_panoc_unconstrained_quadratic(rng):
    # [DERIVED] solution of a strictly convex quadratic is -H^{-1} c
    H = np.diag([1.0, 4.0, 9.0])
    c = np.array([1.0, -2.0, 3.0])
    prob = QuadraticBoxProblem(H, c, [-10] * 3, [10] * 3)
    x, iters, ok, f = panoc_solve(prob, rng.normal(0, 1, 3),
                                  np.zeros(0), 0.0, SolverSettings())
    assert ok
    np.testing.assert_allclose(x, -np.linalg.solve(H, c), atol=1e-4)


def test_panoc_active_box(rng):
    # minimizer outside the box clamps onto the boundary
    H = np.eye(2)
    c = np.array([-5.0, 0.5])
    prob = QuadraticBoxProblem(H, c, [-1, -1], [1, 1])
    x, _, ok, _ = panoc_solve(prob, np.zeros(2), np.zeros(0), 0.0,
                              SolverSettings())
    assert ok
    np.testing.assert_allclose(x, [1.0, -0.5], atol=1e-4)


def test_panoc_matches_projected_gradient_oracle(rng):
    # [DERIVED] plain projected gradient with a tiny step agrees
    H = np.array([[3.0, 1.0], [1.0, 2.0]])
    c = np.array([-4.0, 1.0])
    lo, hi = np.array([-0.5, -0.5]), np.array([0.5, 0.5])
    prob = QuadraticBoxProblem(H, c, lo, hi)
    x, _, ok, _ = panoc_solve(prob, np.zeros(2), np.zeros(0), 0.0,
                              SolverSettings())
    y = np.zeros(2)
    for _ in range(20000):
        y = np.clip(y - 0.05 * (H @ y + c), lo, hi)
    assert ok
    np.testing.assert_allclose(x, y, atol=1e-4)


def test_alm_toy_equality():
    # [DERIVED] min (x-1)^2 s.t. -x = 0 has x*=0, multiplier mu*=-2
    # stationarity: 2(x-1) - mu = 0 at x=0 => mu = -2
    H = 2.0 * np.eye(1)
    c = np.array([-2.0])
    prob = QuadraticBoxProblem(H, c, [-10], [10], E=np.array([[-1.0]]),
                               d=np.zeros(1))
    sol = alm_solve(prob, np.array([0.7]), SolverSettings())
    assert isinstance(sol, LocalSolution)
    assert sol.converged
    assert sol.xi[0] == pytest.approx(0.0, abs=1e-3)
    assert sol.mu[0] == pytest.approx(-2.0, abs=5e-2)
    assert sol.max_violation <= SolverSettings().constraint_tol


def test_alm_violation_trend():
    H = np.diag([2.0, 2.0])
    c = np.array([-2.0, -4.0])
    E = np.array([[1.0, 1.0]])
    d = np.array([1.0])
    prob = QuadraticBoxProblem(H, c, [-10, -10], [10, 10], E=E, d=d)
    sol = alm_solve(prob, np.zeros(2), SolverSettings())
    assert sol.converged
    # the recorded violation sequence ends below tolerance
    assert sol.outer_violations[-1] <= SolverSettings().constraint_tol
    assert min(sol.outer_violations) == sol.outer_violations[-1]
    # optimality: minimize (x1-... ) s.t. x1+x2=1 via KKT oracle
    K = np.block([[H, E.T], [E, np.zeros((1, 1))]])
    rhs = np.concatenate([-c, d])
    expect = np.linalg.solve(K, rhs)[:2]
    np.testing.assert_allclose(sol.xi, expect, atol=1e-3)


def test_alm_warm_start_is_cheap(make_ocp, rng):
    # warm mu/penalty from a converged solve make the re-solve cheap
    ocp = make_ocp(n_horizon=4)
    admm = AdmmLocalData(z=ocp.s_trajectory(ocp.rollout()),
                         lam=np.zeros(4), rho=100.0)
    prob = ocp.solver_problem(admm)
    settings = SolverSettings()
    cold = alm_solve(prob, ocp.rollout(), settings)
    assert cold.converged
    warm = alm_solve(prob, cold.xi, settings, mu0=cold.mu,
                     penalty0=cold.penalty)
    assert warm.converged
    assert warm.outer_iters <= 2
    assert warm.inner_iters <= cold.inner_iters


def test_penalty_clamped_to_configured_range():
    H = 2.0 * np.eye(1)
    prob = QuadraticBoxProblem(H, np.array([-2.0]), [-10], [10],
                               E=np.array([[-1.0]]), d=np.zeros(1))
    settings = SolverSettings(penalty_init=50.0, penalty_max=1e5)
    sol = alm_solve(prob, np.zeros(1), settings, penalty0=1e12)
    assert sol.penalty <= 1e5
    sol2 = alm_solve(prob, np.zeros(1), settings, penalty0=1.0)
    assert sol2.penalty >= 50.0


def test_mu_shape_validation():
    prob = QuadraticBoxProblem(np.eye(1), np.zeros(1), [-1], [1],
                               E=np.array([[1.0]]), d=np.zeros(1))
    from coopnmpc.errors import ConfigError
    with pytest.raises(ConfigError):
        alm_solve(prob, np.zeros(1), SolverSettings(), mu0=np.zeros(3))
