"""Coordination step of the consensus loop.

Solves the headway QP over the auxiliary path-coordinate copies z and
per-edge slacks, performs the dual gradient step, and evaluates the
stopping residuals. The QP is solved by a dense primal active-set
method; the slack directions carry no curvature, so the
equality-constrained subproblems are handled through a null-space
eigendecomposition that detects rays of linear descent.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

_QP_TOL = 1e-10


@dataclass(frozen=True)
class HeadwayGraph:
    """Predecessor sets: edges[follower] = tuple of leaders ahead of it."""

    edges: dict
    d_hw: float

    def __post_init__(self):
        if self.d_hw <= 0:
            raise ConfigError("d_hw must be positive")
        for follower, leaders in self.edges.items():
            if follower in leaders:
                raise ConfigError(f"self-edge on agent {follower!r}")
        object.__setattr__(self, "edges",
                           {f: tuple(ls) for f, ls in self.edges.items()})

    def edge_list(self):
        """Deterministically ordered (follower, leader) pairs."""
        out = []
        for follower in sorted(self.edges):
            for leader in sorted(self.edges[follower]):
                out.append((follower, leader))
        return out


@dataclass
class ConsensusState:
    """Auxiliary copies z and duals lam per agent, shared penalty rho."""

    z: dict
    lam: dict
    rho: float
    q_eps: float = 100.0

    def __post_init__(self):
        if self.rho <= 0:
            raise ConfigError("rho must be positive")
        if self.q_eps <= 0:
            raise ConfigError("q_eps must be positive")
        n = {len(v) for v in self.z.values()}
        n |= {len(v) for v in self.lam.values()}
        if len(n) > 1:
            raise ConfigError("z and lambda lengths must agree across agents")


@dataclass(frozen=True)
class Residuals:
    primal_norm: float
    dual_norm: float


@dataclass
class CoordinationResult:
    z: dict
    eps: dict
    agents: list
    active_set: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# dense active-set QP:  min 1/2 x'Hx + c'x  s.t.  A x >= b
# ---------------------------------------------------------------------------

def _asqp_solve(H, c, A, b, x0, max_iter=500):
    """Primal active-set method; H may be singular (slack directions).

    x0 must be strictly feasible enough that no constraint is violated.
    Returns (x, duals) with duals the full-length multiplier vector
    (nonzero only on the final active set).
    """
    x = np.asarray(x0, float).copy()
    m = A.shape[0]
    work = [i for i in range(m) if A[i] @ x - b[i] <= _QP_TOL]

    for _ in range(max_iter):
        g = H @ x + c
        Aw = A[work] if work else np.zeros((0, x.size))
        p, is_ray = _eqp_direction(H, g, Aw)
        if np.linalg.norm(p) <= 1e-11 * max(1.0, np.linalg.norm(x)):
            lam_w, stationary = _multipliers(g, Aw)
            if stationary and (lam_w.size == 0 or lam_w.min() >= -1e-9):
                duals = np.zeros(m)
                duals[work] = np.maximum(lam_w, 0.0)
                return _polish(H, c, A, b, x, work, duals)
            work.pop(int(np.argmin(lam_w)))
            continue
        # step to the nearest blocking constraint
        alpha = np.inf if is_ray else 1.0
        blocker = -1
        Ap = A @ p
        res = A @ x - b
        for i in range(m):
            if i in work or Ap[i] >= -_QP_TOL:
                continue
            a = res[i] / (-Ap[i])
            if a < alpha:
                alpha = a
                blocker = i
        if not np.isfinite(alpha):
            raise ConfigError("coordination QP is unbounded; "
                              "slack weight missing?")
        x = x + alpha * p
        if blocker >= 0:
            work.append(blocker)
    raise ConfigError("coordination QP active-set method did not converge")


def _eqp_direction(H, g, Aw):
    """Descent direction with A_w p = 0; (p, ray?) where ray means the
    direction has zero curvature and the step is limited only by the
    inactive constraints."""
    n = g.size
    if Aw.shape[0] == 0:
        Z = np.eye(n)
    else:
        _, sv, Vt = np.linalg.svd(Aw)
        rank = int(np.sum(sv > 1e-10 * max(1.0, sv[0] if sv.size else 1.0)))
        Z = Vt[rank:].T
        if Z.shape[1] == 0:
            return np.zeros(n), False
    Hr = Z.T @ H @ Z
    gr = Z.T @ g
    w, V = np.linalg.eigh(Hr)
    pos = w > 1e-10 * max(1.0, float(np.max(np.abs(w), initial=1.0)))
    g_eig = V.T @ gr
    # zero-curvature components with nonzero gradient give a ray
    ray_part = g_eig.copy()
    ray_part[pos] = 0.0
    if np.linalg.norm(ray_part) > 1e-10 * max(1.0, np.linalg.norm(gr)):
        return -Z @ (V @ ray_part), True
    newton = np.zeros_like(g_eig)
    newton[pos] = -g_eig[pos] / w[pos]
    return Z @ (V @ newton), False


def _multipliers(g, Aw):
    if Aw.shape[0] == 0:
        return np.zeros(0), True
    lam, *_ = np.linalg.lstsq(Aw.T, g, rcond=None)
    ok = np.linalg.norm(Aw.T @ lam - g) <= 1e-7 * max(1.0, np.linalg.norm(g))
    return lam, ok


def _polish(H, c, A, b, x, work, duals):
    """Re-solve the KKT system on the final active set for tight
    stationarity and exact constraint activity."""
    act = sorted(i for i in work if duals[i] > 1e-11)
    n = x.size
    Aw = A[act]
    K = np.block([[H, -Aw.T],
                  [Aw, np.zeros((len(act), len(act)))]])
    rhs = np.concatenate([-c, b[act]])
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    x_p = sol[:n]
    if np.all(A @ x_p - b >= -1e-9):
        x = x_p
        duals = np.zeros(A.shape[0])
        duals[act] = np.maximum(sol[n:], 0.0)
    return x, duals


# ---------------------------------------------------------------------------
# coordination QP assembly
# ---------------------------------------------------------------------------

def solve_coordination_qp(s_trajs: dict, state: ConsensusState,
                          graph: HeadwayGraph) -> CoordinationResult:
    """Minimize sum_i [-lam_i'z_i + rho/2 ||s_i - z_i||^2]
    + q_eps sum_{e,j} eps_{e,j} subject to
    z_leader[j] - z_follower[j] >= d_hw - eps_{e,j} and eps >= 0.

    With one nonnegative slack per edge and stage the problem separates
    into independent per-stage QPs, each solved by the dense active-set
    routine; the stacked solution is reassembled afterwards.
    """
    agents = sorted(s_trajs)
    n = len(next(iter(s_trajs.values())))
    for a in agents:
        if len(s_trajs[a]) != n or len(state.lam[a]) != n:
            raise ConfigError("inconsistent trajectory lengths")
    edges = [(f, l) for f, l in graph.edge_list()
             if f in s_trajs and l in s_trajs]
    na = len(edges)
    dim = len(agents) + na
    col = {a: i for i, a in enumerate(agents)}

    # stage-independent quadratic and constraint structure
    H = np.zeros((dim, dim))
    H[:len(agents), :len(agents)] = state.rho * np.eye(len(agents))
    rows = []
    rhs = []
    for e, (follower, leader) in enumerate(edges):
        row = np.zeros(dim)
        row[col[leader]] = 1.0
        row[col[follower]] = -1.0
        row[len(agents) + e] = 1.0
        rows.append(row)
        rhs.append(graph.d_hw)
    for e in range(na):
        row = np.zeros(dim)
        row[len(agents) + e] = 1.0
        rows.append(row)
        rhs.append(0.0)
    A = np.array(rows) if rows else np.zeros((0, dim))
    b = np.array(rhs)

    z = {a: np.empty(n) for a in agents}
    eps = {e: np.empty(n) for e in edges}
    kkt_parts = []
    for j in range(n):
        c = np.zeros(dim)
        for a in agents:
            c[col[a]] = (-float(state.lam[a][j])
                         - state.rho * float(s_trajs[a][j]))
        c[len(agents):] = state.q_eps
        x0 = np.zeros(dim)
        for a in agents:
            x0[col[a]] = s_trajs[a][j]
        for e, (follower, leader) in enumerate(edges):
            gap = float(s_trajs[leader][j]) - float(s_trajs[follower][j])
            x0[len(agents) + e] = max(0.0, graph.d_hw - gap)
        x, duals = _asqp_solve(H, c, A, b, x0)
        for a in agents:
            z[a][j] = x[col[a]]
        for e, pair in enumerate(edges):
            eps[pair][j] = max(x[len(agents) + e], 0.0)
        kkt_parts.append((H, c, A, b, x, duals))

    res = CoordinationResult(z=z, eps=eps, agents=agents)
    res._kkt = kkt_parts
    return res


def qp_kkt_residual(result: CoordinationResult) -> float:
    """Max norm over stationarity, primal feasibility violation, dual
    feasibility violation and complementarity of the returned solution."""
    worst = 0.0
    for H, c, A, b, x, duals in result._kkt:
        stat = H @ x + c - A.T @ duals
        slack = A @ x - b
        worst = max(worst,
                    float(np.max(np.abs(stat))) if stat.size else 0.0,
                    float(np.max(-slack, initial=0.0)),
                    float(np.max(-duals, initial=0.0)),
                    float(np.max(np.abs(duals * slack), initial=0.0)))
    return worst


def dual_step(state: ConsensusState, s_trajs: dict, z: dict) -> dict:
    """lam <- lam + rho (s - z), per agent and stage."""
    out = {}
    for a, lam in state.lam.items():
        if a in s_trajs:
            out[a] = np.asarray(lam, float) + state.rho * (
                np.asarray(s_trajs[a], float) - np.asarray(z[a], float))
        else:
            out[a] = np.asarray(lam, float).copy()
    return out


def compute_residuals(s_trajs: dict, z_new: dict, z_old: dict,
                      rho: float) -> Residuals:
    agents = sorted(s_trajs)
    prim = np.concatenate([np.asarray(s_trajs[a], float)
                           - np.asarray(z_new[a], float) for a in agents])
    dual = np.concatenate([rho * (np.asarray(z_new[a], float)
                                  - np.asarray(z_old[a], float))
                           for a in agents])
    return Residuals(primal_norm=float(np.linalg.norm(prim)),
                     dual_norm=float(np.linalg.norm(dual)))


def check_stop(res: Residuals, eps_prim: float, eps_dual: float) -> bool:
    if eps_prim < 0 or eps_dual < 0:
        raise ConfigError("thresholds must be nonnegative")
    return res.primal_norm <= eps_prim and res.dual_norm <= eps_dual
