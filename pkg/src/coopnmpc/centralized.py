"""Monolithic solve of the full multi-vehicle problem.

All agents' decision trajectories are stacked into one vector together
with one nonnegative slack per headway edge; the headway rows enter the
smooth objective through the same one-sided quadratic penalty the local
solver uses for its acceleration limits, plus a linear slack cost that
drives the slack to zero whenever the dynamics permit. Serves as a
desk-scale equivalence oracle for the distributed path.
"""
from dataclasses import dataclass

import numpy as np

from . import backend
from .coordinator import HeadwayGraph
from .ocp import STAGE_DIM, AgentOcp
from .solver import LocalSolution, SolverSettings, alm_solve


@dataclass
class StackedProblem:
    """Adapter exposing the stacked problem to the local solver loop.

    Decision layout: per-agent trajectory blocks in sorted-id order,
    then one slack per headway edge and stage.
    """

    ocps: dict
    graph: HeadwayGraph
    q_eps: float

    def __post_init__(self):
        self.order = sorted(self.ocps)
        self.edges = [(f, l) for f, l in self.graph.edge_list()
                      if f in self.ocps and l in self.ocps]
        self.n = self.ocps[self.order[0]].n
        self.block = STAGE_DIM * self.n
        self.offset = {a: i * self.block for i, a in enumerate(self.order)}
        self.eps_base = self.block * len(self.order)
        self.dim = self.eps_base + len(self.edges) * self.n
        self.n_eq = 4 * self.n * len(self.order)

    # layout helpers -----------------------------------------------------

    def split(self, x):
        xi = {a: x[self.offset[a]:self.offset[a] + self.block]
              for a in self.order}
        eps = {e: x[self.eps_base + i * self.n:
                    self.eps_base + (i + 1) * self.n].copy()
               for i, e in enumerate(self.edges)}
        return xi, eps

    def join(self, xi: dict, eps: dict = None) -> np.ndarray:
        x = np.zeros(self.dim)
        for a in self.order:
            x[self.offset[a]:self.offset[a] + self.block] = xi[a]
        if eps:
            for i, e in enumerate(self.edges):
                if e in eps:
                    x[self.eps_base + i * self.n:
                      self.eps_base + (i + 1) * self.n] = eps[e]
        return x

    def _s_index(self, agent, j):
        return self.offset[agent] + STAGE_DIM * j

    def _headway_rows(self, x):
        """r[e, j] = d_hw - eps_e - (s_leader_j - s_follower_j) <= 0."""
        rows = np.empty((len(self.edges), self.n))
        for e, (f, l) in enumerate(self.edges):
            sf = x[self.offset[f]:self.offset[f] + self.block:STAGE_DIM]
            sl = x[self.offset[l]:self.offset[l] + self.block:STAGE_DIM]
            rows[e] = (self.graph.d_hw
                       - x[self.eps_base + e * self.n:
                           self.eps_base + (e + 1) * self.n]
                       - (sl - sf))
        return rows

    # solver interface ---------------------------------------------------

    def value(self, x, mu, alpha):
        v, _ = self._evaluate(x, mu, alpha, want_grad=False)
        return v

    def value_and_grad(self, x, mu, alpha):
        return self._evaluate(x, mu, alpha, want_grad=True)

    def _evaluate(self, x, mu, alpha, want_grad):
        total = 0.0
        grad = np.zeros(self.dim) if want_grad else None
        neq_block = 4 * self.n
        for i, a in enumerate(self.order):
            ocp = self.ocps[a]
            sl = slice(self.offset[a], self.offset[a] + self.block)
            xi = x[sl]
            lo, hi, k = ocp.road._arrays
            w = ocp.weights
            # self-consistent z and zero duals cancel every consensus
            # term while keeping tracking + equality/inequality penalties
            val, g = backend.objective_and_grad(
                xi, want_grad, ocp._x0_arr, ocp.ts, lo, hi, k,
                ocp.geom.lf, ocp.geom.lr, w.q(), w.qN(), w.r(),
                ocp._refs_arr, ocp.s_trajectory(xi), np.zeros(ocp.n), 1.0,
                mu[i * neq_block:(i + 1) * neq_block], alpha,
                ocp.bounds.ay_hi, ocp.bounds.atot_hi)
            if not np.isfinite(val):
                return np.inf, grad
            total += val
            if want_grad:
                grad[sl] += g

        rows = self._headway_rows(x)
        pos = np.maximum(rows, 0.0)
        total += 0.5 * alpha * float(np.sum(pos * pos))
        total += self.q_eps * float(np.sum(x[self.eps_base:]))
        if want_grad:
            for e, (f, l) in enumerate(self.edges):
                w = alpha * pos[e]
                grad[self._s_index(f, 0):self.offset[f]
                     + self.block:STAGE_DIM] += w
                grad[self.eps_base + e * self.n:
                     self.eps_base + (e + 1) * self.n] += -w + self.q_eps
                grad[self._s_index(l, 0):self.offset[l]
                     + self.block:STAGE_DIM] -= w
        return total, grad

    def residuals(self, x):
        hs = []
        gs = []
        for a in self.order:
            ocp = self.ocps[a]
            xi = x[self.offset[a]:self.offset[a] + self.block]
            h, g = ocp._residuals(xi)
            hs.append(h)
            gs.append(g)
        gs.append(self._headway_rows(x).ravel())
        return np.concatenate(hs), np.concatenate(gs)

    def project(self, x):
        out = x.copy()
        for a in self.order:
            sl = slice(self.offset[a], self.offset[a] + self.block)
            out[sl] = self.ocps[a].project(out[sl])
        out[self.eps_base:] = np.maximum(out[self.eps_base:], 0.0)
        return out


def solve_centralized(ocps: dict, graph: HeadwayGraph, cfg,
                      warm_xi: dict = None, warm_eps: dict = None):
    """Solve the stacked problem; returns (per-agent trajectories,
    aggregate tracking cost, per-edge slacks, solver record)."""
    prob = StackedProblem(ocps=ocps, graph=graph, q_eps=cfg.q_eps)
    if warm_xi is None:
        warm_xi = {a: ocps[a].rollout() for a in prob.order}
    x0 = prob.join(warm_xi, warm_eps)
    # start the slacks feasible so the penalty is inactive at entry
    rows = prob._headway_rows(x0)
    for e in range(len(prob.edges)):
        sl = slice(prob.eps_base + e * prob.n,
                   prob.eps_base + (e + 1) * prob.n)
        x0[sl] += np.maximum(rows[e], 0.0)
    sol = alm_solve(prob, x0, cfg.solver)
    xi, eps = prob.split(sol.xi)
    cost = sum(ocps[a].tracking_cost(xi[a]) for a in prob.order)
    return {a: xi[a].copy() for a in prob.order}, cost, eps, sol
