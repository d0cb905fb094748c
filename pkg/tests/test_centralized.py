import dataclasses

import numpy as np
import pytest

from coopnmpc.centralized import StackedProblem, solve_centralized
from coopnmpc.coordinator import (ConsensusState, HeadwayGraph, check_stop,
                                  compute_residuals, dual_step,
                                  solve_coordination_qp)
from coopnmpc.dynamics import AgentState
from coopnmpc.ocp import AdmmLocalData
from coopnmpc.solver import SolverSettings, alm_solve


@dataclasses.dataclass
class _MiniCfg:
    q_eps: float
    solver: SolverSettings


def _two_agents(make_ocp, gap):
    """Leader 'b' ahead of follower 'a' by gap metres."""
    ocps = {
        "a": make_ocp(n_horizon=5,
                      x0=AgentState(0.0, -2.0, 0.0, 14.0)),
        "b": make_ocp(n_horizon=5,
                      x0=AgentState(gap, -2.0, 0.0, 14.0)),
    }
    graph = HeadwayGraph(edges={"a": ("b",)}, d_hw=15.0)
    return ocps, graph


def _run_admm(ocps, graph, cfg, rho=100.0, eps_primal=0.01, eps_dual=1.0,
              max_iters=40):
    order = sorted(ocps)
    n = next(iter(ocps.values())).n
    xi = {a: ocps[a].rollout() for a in order}
    z = {a: ocps[a].s_trajectory(xi[a]) for a in order}
    lam = {a: np.zeros(n) for a in order}
    mu = {a: np.zeros(4 * n) for a in order}
    pen = {a: None for a in order}
    iters = 0
    while iters < max_iters:
        iters += 1
        s_trajs = {}
        for a in order:
            admm = AdmmLocalData(z=z[a], lam=lam[a], rho=rho)
            sol = alm_solve(ocps[a].solver_problem(admm), xi[a], cfg.solver,
                            mu0=mu[a], penalty0=pen[a])
            xi[a], mu[a], pen[a] = sol.xi, sol.mu, sol.penalty
            s_trajs[a] = ocps[a].s_trajectory(sol.xi)
        state = ConsensusState(z=z, lam=lam, rho=rho, q_eps=cfg.q_eps)
        result = solve_coordination_qp(s_trajs, state, graph)
        lam = dual_step(state, s_trajs, result.z)
        res = compute_residuals(s_trajs, result.z, z, rho)
        z = result.z
        if check_stop(res, eps_primal, eps_dual):
            break
    return xi


def test_inactive_coupling_matches_distributed(make_ocp):
    # [DERIVED] with a 40 m gap the headway rows never bind: the stacked
    # solve and the consensus loop must agree on cost and first inputs
    cfg = _MiniCfg(q_eps=12.0, solver=SolverSettings())
    ocps, graph = _two_agents(make_ocp, gap=40.0)
    xi_c, cost_c, eps, sol = solve_centralized(ocps, graph, cfg)
    assert sol.converged
    for e in eps.values():
        assert np.max(e) <= 1e-6

    xi_d = _run_admm(ocps, graph, cfg)
    cost_d = sum(ocps[a].tracking_cost(xi_d[a]) for a in ocps)
    assert cost_d == pytest.approx(cost_c, abs=1e-6 * max(1.0, abs(cost_c)))
    for a in ocps:
        np.testing.assert_allclose(xi_d[a][4:6], xi_c[a][4:6], atol=1e-3)


def test_coupled_snapshot_cost_gap(make_ocp):
    # [DERIVED] binding coupling: the consensus solution's aggregate
    # tracking-plus-slack objective is within 5% of the stacked one
    # (both are local solutions of a nonconvex problem)
    cfg = _MiniCfg(q_eps=12.0, solver=SolverSettings())
    ocps, graph = _two_agents(make_ocp, gap=8.0)
    xi_c, cost_c, eps_c, sol = solve_centralized(ocps, graph, cfg)
    assert sol.converged

    xi_d = _run_admm(ocps, graph, cfg)

    def merit(xi):
        total = sum(ocps[a].tracking_cost(xi[a]) for a in ocps)
        gap = (ocps["b"].s_trajectory(xi["b"])
               - ocps["a"].s_trajectory(xi["a"]))
        total += cfg.q_eps * float(np.sum(np.maximum(15.0 - gap, 0.0)))
        return total

    mc, md = merit(xi_c), merit(xi_d)
    assert md <= mc * 1.05 + 1e-9
    assert mc <= md * 1.05 + 1e-9


def test_stacked_violation_shrinks(make_ocp):
    cfg = _MiniCfg(q_eps=12.0, solver=SolverSettings())
    ocps, graph = _two_agents(make_ocp, gap=8.0)
    _, _, _, sol = solve_centralized(ocps, graph, cfg)
    v = sol.outer_violations
    assert v[-1] <= cfg.solver.constraint_tol
    assert v[-1] <= v[0]


def test_stacked_problem_layout(make_ocp):
    ocps, graph = _two_agents(make_ocp, gap=20.0)
    prob = StackedProblem(ocps=ocps, graph=graph, q_eps=12.0)
    assert prob.dim == 2 * 30 + 5
    assert prob.n_eq == 2 * 20
    x = np.arange(float(prob.dim))
    xi, eps = prob.split(x)
    np.testing.assert_allclose(prob.join(xi, eps), x)


def test_stacked_gradient_check(make_ocp, rng):
    ocps, graph = _two_agents(make_ocp, gap=16.0)
    prob = StackedProblem(ocps=ocps, graph=graph, q_eps=12.0)
    x = prob.join({a: ocps[a].rollout() for a in sorted(ocps)})
    x = prob.project(x + rng.normal(0, 0.2, x.size))
    mu = rng.normal(0, 5.0, prob.n_eq)
    val, grad = prob.value_and_grad(x, mu, 150.0)
    idx = rng.choice(x.size, size=12, replace=False)
    h = 1e-6
    for i in idx:
        e = np.zeros_like(x)
        e[i] = h
        fd = (prob.value(x + e, mu, 150.0)
              - prob.value(x - e, mu, 150.0)) / (2 * h)
        assert abs(grad[i] - fd) <= 1e-5 * max(1.0, abs(fd), abs(grad[i]))
