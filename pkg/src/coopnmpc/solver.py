"""Local trajectory solver.

Inner loop: a projected-gradient method with L-BFGS acceleration on the
fixed-point residual (monotone acceptance, fall back to the plain
projected-gradient step when the accelerated candidate does not
decrease the objective). Outer loop: an augmented-Lagrangian scheme
driving the shooting equality residuals to zero while the acceleration
inequalities are handled by a fixed quadratic penalty folded into the
smooth objective.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class SolverSettings:
    inner_tol: float = 1e-4
    constraint_tol: float = 5e-4
    penalty_init: float = 100.0
    penalty_max: float = 1e6
    max_outer: int = 10
    max_inner: int = 500
    lbfgs_memory: int = 10

    def __post_init__(self):
        if self.inner_tol <= 0 or self.constraint_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if not (0 < self.penalty_init <= self.penalty_max):
            raise ConfigError("penalty parameters must satisfy "
                              "0 < init <= max")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ConfigError("iteration limits must be >= 1")
        if self.lbfgs_memory < 1:
            raise ConfigError("lbfgs_memory must be >= 1")


@dataclass
class LocalSolution:
    xi: np.ndarray
    mu: np.ndarray
    converged: bool
    outer_iters: int
    inner_iters: int
    max_violation: float
    objective: float
    penalty: float = 0.0
    outer_violations: list = field(default_factory=list)


class _Lbfgs:
    """Two-loop recursion over (step, residual-change) pairs."""

    def __init__(self, memory: int, dim: int):
        self.memory = memory
        self.s: list = []
        self.y: list = []

    def reset(self):
        self.s.clear()
        self.y.clear()

    def push(self, s: np.ndarray, y: np.ndarray):
        sy = float(s @ y)
        if sy <= 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y) + 1e-300):
            return
        self.s.append(s)
        self.y.append(y)
        if len(self.s) > self.memory:
            self.s.pop(0)
            self.y.pop(0)

    def apply(self, r: np.ndarray) -> np.ndarray:
        if not self.s:
            return r.copy()
        q = r.copy()
        alphas = []
        rhos = [1.0 / float(s @ y) for s, y in zip(self.s, self.y)]
        for i in range(len(self.s) - 1, -1, -1):
            a = rhos[i] * float(self.s[i] @ q)
            alphas.append(a)
            q -= a * self.y[i]
        gamma = float(self.s[-1] @ self.y[-1]) / float(self.y[-1] @ self.y[-1])
        q *= gamma
        for i, a in zip(range(len(self.s)), reversed(alphas)):
            b = rhos[i] * float(self.y[i] @ q)
            q += (a - b) * self.s[i]
        return q


def panoc_solve(problem, xi0, mu, alpha, settings: SolverSettings):
    """Minimize the smooth objective over the box from xi0.

    Returns (xi, n_iters, converged, objective_value).
    """
    xi = problem.project(np.asarray(xi0, float))
    f, g = problem.value_and_grad(xi, mu, alpha)
    if not np.isfinite(f):
        raise ConfigError("initial point evaluates to a non-finite "
                          "objective")
    gamma = _init_gamma(problem, xi, f, g, mu, alpha)
    lbfgs = _Lbfgs(settings.lbfgs_memory, xi.size)
    prev = None
    # The fixed-point residual scales with the gradient of the penalty
    # terms, so a fixed absolute tolerance becomes unreachable at large
    # penalty weights; loosen it proportionally.
    tol = settings.inner_tol * max(1.0, alpha / 100.0) ** 0.5

    for it in range(1, settings.max_inner + 1):
        # base projected-gradient step, with gamma backtracking so that
        # the quadratic upper bound holds at T(xi)
        while True:
            t = problem.project(xi - gamma * g)
            d = t - xi
            ft = problem.value(t, mu, alpha)
            ub = f + g @ d + (0.5 / gamma) * (d @ d)
            if np.isfinite(ft) and ft <= ub + 1e-10 * max(1.0, abs(f)):
                break
            gamma *= 0.5
            lbfgs.reset()
            prev = None
            if gamma < 1e-14:
                return xi, it, False, f
        r = (xi - t) / gamma
        rnorm = float(np.linalg.norm(r))
        if rnorm <= tol:
            return t, it, True, ft

        if prev is not None:
            lbfgs.push(xi - prev[0], r - prev[1])
        prev = (xi.copy(), r.copy())

        accepted = False
        step = lbfgs.apply(r)
        tau = 1.0
        for _ in range(4):
            cand = problem.project(xi - tau * step)
            fc = problem.value(cand, mu, alpha)
            if np.isfinite(fc) and fc < f:
                xi = cand
                f = fc
                accepted = True
                break
            tau *= 0.25
        if not accepted:
            xi, f = t, ft
        _, g = problem.value_and_grad(xi, mu, alpha)

    return xi, settings.max_inner, False, f


def _init_gamma(problem, xi, f, g, mu, alpha):
    """Local Lipschitz estimate from a small forward probe."""
    gn = float(np.linalg.norm(g))
    if gn < 1e-12:
        return 1.0
    eps = 1e-6 * max(1.0, float(np.linalg.norm(xi))) / gn
    f2, g2 = problem.value_and_grad(xi - eps * g, mu, alpha)
    if not np.isfinite(f2):
        return 1e-3
    lip = float(np.linalg.norm(g2 - g)) / (eps * gn + 1e-300)
    lip = max(lip, 1e-6)
    return min(0.95 / lip, 1e6)


def alm_solve(problem, xi0, settings: SolverSettings,
              mu0=None, penalty0=None) -> LocalSolution:
    """Outer augmented-Lagrangian loop around panoc_solve.

    mu0 and penalty0 warm-start the equality multipliers and penalty
    weight; the returned solution carries both for reuse, which lets a
    receding-horizon caller converge in one outer round at steady state.
    """
    n_eq = problem.n_eq
    mu = np.zeros(n_eq) if mu0 is None else np.asarray(mu0, float).copy()
    if mu.shape != (n_eq,):
        raise ConfigError(f"mu must have shape ({n_eq},)")
    alpha = settings.penalty_init if penalty0 is None else float(penalty0)
    alpha = min(max(alpha, settings.penalty_init), settings.penalty_max)
    xi = np.asarray(xi0, float)
    total_inner = 0
    violations = []
    prev_viol = np.inf
    f = np.inf

    for outer in range(1, settings.max_outer + 1):
        xi, inner, inner_ok, f = panoc_solve(problem, xi, mu, alpha,
                                             settings)
        total_inner += inner
        h, g = problem.residuals(xi)
        viol = max(float(np.max(np.abs(h))) if h.size else 0.0,
                   float(np.max(g)) if g.size else 0.0, 0.0)
        violations.append(viol)
        mu = mu + alpha * h
        if viol <= settings.constraint_tol:
            return LocalSolution(xi=xi, mu=mu, converged=True,
                                 outer_iters=outer, inner_iters=total_inner,
                                 max_violation=viol, objective=f,
                                 penalty=alpha,
                                 outer_violations=violations)
        if viol > 0.25 * prev_viol:
            alpha = min(alpha * 10.0, settings.penalty_max)
        prev_viol = viol

    return LocalSolution(xi=xi, mu=mu, converged=False,
                         outer_iters=settings.max_outer,
                         inner_iters=total_inner, max_violation=violations[-1],
                         objective=f, penalty=alpha,
                         outer_violations=violations)
