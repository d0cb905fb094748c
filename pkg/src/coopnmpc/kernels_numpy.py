"""Vectorised numpy twins of the numba kernels.

Fallback path selected by setting the ``COOPNMPC_NO_NUMBA`` environment
flag (or when numba is unavailable). Same public surface and semantics
as :mod:`coopnmpc.kernels_numba`; shooting stages are independent given
the stacked decision vector, so everything is batched over the horizon.
"""
import numpy as np

BACKEND_NAME = "numpy"


def _kappa_batch(s, seg_lo, seg_k):
    idx = np.searchsorted(seg_lo, s, side="right") - 1
    idx = np.clip(idx, 0, len(seg_lo) - 1)
    return seg_k[idx]


def curvature_value(s, seg_lo, seg_hi, seg_k):
    return float(_kappa_batch(np.asarray([s]), seg_lo, seg_k)[0])


def rhs_single(s, dy, dpsi, v, ax, delta, kappa, lf, lr):
    X = np.array([[s, dy, dpsi, v]])
    out = _rhs_batch(X, np.array([ax]), np.array([delta]),
                     np.array([kappa]), lf, lr)
    return out[0]


def _rhs_batch(X, ax, dl, kap, lf, lr):
    with np.errstate(invalid="ignore", divide="ignore"):
        den = 1.0 - X[:, 1] * kap
        den = np.where(den <= 1e-12, np.nan, den)
        b = np.arctan(np.tan(dl) * lr / (lf + lr))
        cpb = np.cos(X[:, 2] + b)
        spb = np.sin(X[:, 2] + b)
        out = np.empty_like(X)
        out[:, 0] = X[:, 3] * cpb / den
        out[:, 1] = X[:, 3] * spb
        out[:, 2] = (X[:, 3] / lr * np.sin(b)
                     - X[:, 3] * np.cos(X[:, 2]) * kap / den)
        out[:, 3] = ax
    return out


def _rhs_jac_batch(X, dl, kap, lf, lr):
    M = X.shape[0]
    A = np.zeros((M, 4, 4))
    B = np.zeros((M, 4, 2))
    with np.errstate(invalid="ignore", divide="ignore"):
        c = lr / (lf + lr)
        t = np.tan(dl)
        b = np.arctan(c * t)
        dbd = c * (1.0 + t * t) / (1.0 + c * c * t * t)
        den = 1.0 - X[:, 1] * kap
        den = np.where(den <= 1e-12, np.nan, den)
        cpb = np.cos(X[:, 2] + b)
        spb = np.sin(X[:, 2] + b)
        sb = np.sin(b)
        cb = np.cos(b)
        cps = np.cos(X[:, 2])
        sps = np.sin(X[:, 2])
        v = X[:, 3]
        A[:, 0, 1] = v * cpb * kap / (den * den)
        A[:, 0, 2] = -v * spb / den
        A[:, 0, 3] = cpb / den
        B[:, 0, 1] = -v * spb * dbd / den
        A[:, 1, 2] = v * cpb
        A[:, 1, 3] = spb
        B[:, 1, 1] = v * cpb * dbd
        A[:, 2, 1] = -v * cps * kap * kap / (den * den)
        A[:, 2, 2] = v * sps * kap / den
        A[:, 2, 3] = sb / lr - cps * kap / den
        B[:, 2, 1] = v * cb * dbd / lr
        B[:, 3, 0] = 1.0
    return A, B


def _rk4_batch(X, ax, dl, ts, seg_lo, seg_k, lf, lr, want_jac):
    I4 = np.eye(4)

    def stage(Xs):
        kap = _kappa_batch(Xs[:, 0], seg_lo, seg_k)
        k = _rhs_batch(Xs, ax, dl, kap, lf, lr)
        if want_jac:
            Aj, Bj = _rhs_jac_batch(Xs, dl, kap, lf, lr)
        else:
            Aj = Bj = None
        return k, Aj, Bj

    k1, A1, B1 = stage(X)
    X2 = X + 0.5 * ts * k1
    k2, A2, B2 = stage(X2)
    X3 = X + 0.5 * ts * k2
    k3, A3, B3 = stage(X3)
    X4 = X + ts * k3
    k4, A4, B4 = stage(X4)

    XN = X + (ts / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not want_jac:
        return XN, None, None

    dk1dx = A1
    dk1du = B1
    dk2dx = A2 @ (I4 + 0.5 * ts * dk1dx)
    dk2du = 0.5 * ts * (A2 @ dk1du) + B2
    dk3dx = A3 @ (I4 + 0.5 * ts * dk2dx)
    dk3du = 0.5 * ts * (A3 @ dk2du) + B3
    dk4dx = A4 @ (I4 + ts * dk3dx)
    dk4du = ts * (A4 @ dk3du) + B4
    A = I4 + (ts / 6.0) * (dk1dx + 2.0 * dk2dx + 2.0 * dk3dx + dk4dx)
    B = (ts / 6.0) * (dk1du + 2.0 * dk2du + 2.0 * dk3du + dk4du)
    return XN, A, B


def rk4_step_arr(x, ax, delta, ts, seg_lo, seg_hi, seg_k, lf, lr):
    XN, _, _ = _rk4_batch(np.asarray(x, float).reshape(1, 4),
                          np.array([float(ax)]), np.array([float(delta)]),
                          ts, seg_lo, seg_k, lf, lr, False)
    return XN[0]


def rk4_step_jac(x, ax, delta, ts, seg_lo, seg_hi, seg_k, lf, lr):
    XN, A, B = _rk4_batch(np.asarray(x, float).reshape(1, 4),
                          np.array([float(ax)]), np.array([float(delta)]),
                          ts, seg_lo, seg_k, lf, lr, True)
    return XN[0], A[0], B[0]


def _stage_lateral(Vj, dl, lf, lr):
    crat = lr / (lf + lr)
    t = np.tan(dl)
    bta = np.arctan(crat * t)
    sb = np.sin(bta)
    cb = np.cos(bta)
    ay = Vj * Vj * sb * cb / lr
    day_dv = 2.0 * Vj * sb * cb / lr
    dbd = crat * (1.0 + t * t) / (1.0 + crat * crat * t * t)
    day_dd = Vj * Vj * (cb * cb - sb * sb) / lr * dbd
    return ay, day_dv, day_dd


def constraint_residuals(xi, x0, ts, seg_lo, seg_hi, seg_k, lf, lr,
                         ay_hi, atot_hi):
    N = xi.shape[0] // 6
    S = xi.reshape(N, 6)
    X = S[:, :4]
    U = S[:, 4:6]
    Xj = np.vstack((np.asarray(x0, float).reshape(1, 4), X[:-1]))
    XN, _, _ = _rk4_batch(Xj, U[:, 0], U[:, 1], ts, seg_lo, seg_k, lf, lr,
                          False)
    h = (X - XN).ravel()
    ay, _, _ = _stage_lateral(Xj[:, 3], U[:, 1], lf, lr)
    g = np.empty(2 * N)
    g[0::2] = np.abs(ay) - ay_hi
    g[1::2] = U[:, 0] ** 2 + ay ** 2 - atot_hi ** 2
    return h, g


def project_box(xi, dy_lo, dy_hi, v_hi, ax_lo, ax_hi, dl_lo, dl_hi):
    N = dy_lo.shape[0]
    S = xi.reshape(N, 6).copy()
    S[:, 1] = np.clip(S[:, 1], dy_lo, dy_hi)
    S[:, 3] = np.clip(S[:, 3], 0.0, v_hi)
    S[:, 4] = np.clip(S[:, 4], ax_lo, ax_hi)
    S[:, 5] = np.clip(S[:, 5], dl_lo, dl_hi)
    return S.ravel()


def objective_and_grad(xi, want_grad, x0, ts, seg_lo, seg_hi, seg_k, lf, lr,
                       q, qn, r, refs, z, lam, rho, mu, alpha, ay_hi, atot_hi):
    N = z.shape[0]
    S = xi.reshape(N, 6)
    X = S[:, :4]
    U = S[:, 4:6]
    x0 = np.asarray(x0, float).reshape(4)
    Xj = np.vstack((x0.reshape(1, 4), X[:-1]))
    grad = np.zeros((N, 6))

    # tracking
    val = float(np.sum(r * U * U))
    dX = Xj - refs[:N]
    val += float(np.sum(q * dX * dX))
    dT = X[-1] - refs[N]
    val += float(np.sum(qn * dT * dT))
    if want_grad:
        grad[:, 4:6] += 2.0 * r * U
        gX = 2.0 * q * dX
        grad[:-1, 0:4] += gX[1:]
        grad[-1, 0:4] += 2.0 * qn * dT

    # consensus coupling terms on the path coordinates
    sb = X[:, 0]
    val += float(np.sum(lam * sb) + 0.5 * rho * np.sum((sb - z) ** 2))
    if want_grad:
        grad[:, 0] += lam + rho * (sb - z)

    # acceleration penalty rows
    Vj = Xj[:, 3]
    ay, day_dv, day_dd = _stage_lateral(Vj, U[:, 1], lf, lr)
    g1 = np.abs(ay) - ay_hi
    g2 = U[:, 0] ** 2 + ay ** 2 - atot_hi ** 2
    g1p = np.maximum(g1, 0.0)
    g2p = np.maximum(g2, 0.0)
    val += float(0.5 * alpha * (np.sum(g1p ** 2) + np.sum(g2p ** 2)))
    if want_grad:
        sgn = np.where(ay >= 0.0, 1.0, -1.0)
        c1 = alpha * g1p * sgn
        c2 = alpha * g2p
        gi_v = c1 * day_dv + 2.0 * c2 * ay * day_dv
        gi_d = c1 * day_dd + 2.0 * c2 * ay * day_dd
        gi_a = 2.0 * c2 * U[:, 0]
        grad[:, 4] += gi_a
        grad[:, 5] += gi_d
        grad[:-1, 3] += gi_v[1:]

    # shooting residuals with multiplier and quadratic terms
    XN, A, B = _rk4_batch(Xj, U[:, 0], U[:, 1], ts, seg_lo, seg_k, lf, lr,
                          bool(want_grad))
    if not np.all(np.isfinite(XN)):
        return np.inf, grad.ravel()
    H = X - XN
    MU = mu.reshape(N, 4)
    val += float(np.sum(MU * H) + 0.5 * alpha * np.sum(H * H))
    if want_grad:
        W = MU + alpha * H
        grad[:, 0:4] += W
        grad[:, 4:6] -= np.einsum("nij,ni->nj", B, W)
        AtW = np.einsum("nij,ni->nj", A, W)
        grad[:-1, 0:4] -= AtW[1:]
    return val, grad.ravel()
