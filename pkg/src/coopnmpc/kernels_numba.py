"""Scalar hot-loop kernels, compiled with numba.

This module is selected by :mod:`coopnmpc.backend` unless the
``COOPNMPC_NO_NUMBA`` environment flag is set, in which case the
vectorised numpy twins in :mod:`coopnmpc.kernels_numpy` are used.
Both modules expose the same public functions and must agree to
floating-point noise; ``tests/test_backends.py`` enforces that.

Conventions:
  * state vector layout: [s, dy, dpsi, v]
  * input layout: [ax, delta]
  * decision trajectory ``xi``: N stages of 6 values,
    stage b = (x_{b+1}, u_b), flat length 6N
  * singular model evaluations (1 - dy*kappa <= 0) yield NaN states;
    the objective maps them to +inf instead of raising.
"""
import numpy as np
from numba import njit

BACKEND_NAME = "numba"


@njit(cache=True)
def curvature_value(s, seg_lo, seg_hi, seg_k):
    """Piecewise-constant curvature, right-continuous at breakpoints.

    Outside the covered range the nearest segment value is used; range
    checking is the responsibility of the road-profile wrapper.
    """
    n = seg_lo.shape[0]
    if s <= seg_lo[0]:
        return seg_k[0]
    for i in range(n - 1, -1, -1):
        if s >= seg_lo[i]:
            return seg_k[i]
    return seg_k[0]


@njit(cache=True)
def rhs_single(s, dy, dpsi, v, ax, delta, kappa, lf, lr):
    """Continuous-time state derivative; NaN on frame singularity."""
    out = np.empty(4)
    den = 1.0 - dy * kappa
    if den <= 1e-12:
        out[:] = np.nan
        return out
    b = np.arctan(np.tan(delta) * lr / (lf + lr))
    cpb = np.cos(dpsi + b)
    spb = np.sin(dpsi + b)
    out[0] = v * cpb / den
    out[1] = v * spb
    out[2] = v / lr * np.sin(b) - v * np.cos(dpsi) * kappa / den
    out[3] = ax
    return out


@njit(cache=True)
def _rhs_jac(dy, dpsi, v, delta, kappa, lf, lr, A, B):
    # Jacobians of rhs_single wrt state (A, 4x4) and input (B, 4x2).
    # kappa is treated as locally constant in s (piecewise-constant road).
    c = lr / (lf + lr)
    t = np.tan(delta)
    b = np.arctan(c * t)
    dbd = c * (1.0 + t * t) / (1.0 + c * c * t * t)
    den = 1.0 - dy * kappa
    cpb = np.cos(dpsi + b)
    spb = np.sin(dpsi + b)
    sb = np.sin(b)
    cb = np.cos(b)
    cps = np.cos(dpsi)
    sps = np.sin(dpsi)
    A[:, :] = 0.0
    B[:, :] = 0.0
    A[0, 1] = v * cpb * kappa / (den * den)
    A[0, 2] = -v * spb / den
    A[0, 3] = cpb / den
    B[0, 1] = -v * spb * dbd / den
    A[1, 2] = v * cpb
    A[1, 3] = spb
    B[1, 1] = v * cpb * dbd
    A[2, 1] = -v * cps * kappa * kappa / (den * den)
    A[2, 2] = v * sps * kappa / den
    A[2, 3] = sb / lr - cps * kappa / den
    B[2, 1] = v * cb * dbd / lr
    B[3, 0] = 1.0


@njit(cache=True)
def rk4_step_arr(x, ax, delta, ts, seg_lo, seg_hi, seg_k, lf, lr):
    """Classical RK4 step with zero-order-hold input.

    Curvature is looked up at each stage's running path coordinate.
    """
    k1 = rhs_single(x[0], x[1], x[2], x[3], ax, delta,
                    curvature_value(x[0], seg_lo, seg_hi, seg_k), lf, lr)
    x2 = x + 0.5 * ts * k1
    k2 = rhs_single(x2[0], x2[1], x2[2], x2[3], ax, delta,
                    curvature_value(x2[0], seg_lo, seg_hi, seg_k), lf, lr)
    x3 = x + 0.5 * ts * k2
    k3 = rhs_single(x3[0], x3[1], x3[2], x3[3], ax, delta,
                    curvature_value(x3[0], seg_lo, seg_hi, seg_k), lf, lr)
    x4 = x + ts * k3
    k4 = rhs_single(x4[0], x4[1], x4[2], x4[3], ax, delta,
                    curvature_value(x4[0], seg_lo, seg_hi, seg_k), lf, lr)
    return x + (ts / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def rk4_step_jac(x, ax, delta, ts, seg_lo, seg_hi, seg_k, lf, lr):
    """RK4 step together with its state/input Jacobians (A, B)."""
    I4 = np.eye(4)
    A1 = np.empty((4, 4))
    B1 = np.empty((4, 2))
    A2 = np.empty((4, 4))
    B2 = np.empty((4, 2))
    A3 = np.empty((4, 4))
    B3 = np.empty((4, 2))
    A4 = np.empty((4, 4))
    B4 = np.empty((4, 2))

    kap = curvature_value(x[0], seg_lo, seg_hi, seg_k)
    k1 = rhs_single(x[0], x[1], x[2], x[3], ax, delta, kap, lf, lr)
    _rhs_jac(x[1], x[2], x[3], delta, kap, lf, lr, A1, B1)

    x2 = x + 0.5 * ts * k1
    kap = curvature_value(x2[0], seg_lo, seg_hi, seg_k)
    k2 = rhs_single(x2[0], x2[1], x2[2], x2[3], ax, delta, kap, lf, lr)
    _rhs_jac(x2[1], x2[2], x2[3], delta, kap, lf, lr, A2, B2)

    x3 = x + 0.5 * ts * k2
    kap = curvature_value(x3[0], seg_lo, seg_hi, seg_k)
    k3 = rhs_single(x3[0], x3[1], x3[2], x3[3], ax, delta, kap, lf, lr)
    _rhs_jac(x3[1], x3[2], x3[3], delta, kap, lf, lr, A3, B3)

    x4 = x + ts * k3
    kap = curvature_value(x4[0], seg_lo, seg_hi, seg_k)
    k4 = rhs_single(x4[0], x4[1], x4[2], x4[3], ax, delta, kap, lf, lr)
    _rhs_jac(x4[1], x4[2], x4[3], delta, kap, lf, lr, A4, B4)

    dk1dx = A1
    dk1du = B1
    dk2dx = A2 @ (I4 + 0.5 * ts * dk1dx)
    dk2du = 0.5 * ts * (A2 @ dk1du) + B2
    dk3dx = A3 @ (I4 + 0.5 * ts * dk2dx)
    dk3du = 0.5 * ts * (A3 @ dk2du) + B3
    dk4dx = A4 @ (I4 + ts * dk3dx)
    dk4du = ts * (A4 @ dk3du) + B4

    xn = x + (ts / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    A = I4 + (ts / 6.0) * (dk1dx + 2.0 * dk2dx + 2.0 * dk3dx + dk4dx)
    B = (ts / 6.0) * (dk1du + 2.0 * dk2du + 2.0 * dk3du + dk4du)
    return xn, A, B


@njit(cache=True)
def constraint_residuals(xi, x0, ts, seg_lo, seg_hi, seg_k, lf, lr,
                         ay_hi, atot_hi):
    """Shooting equality residuals h (4N) and acceleration rows g (2N).

    g per stage j: [ |a_y| - ay_hi, ax^2 + a_y^2 - atot_hi^2 ].
    Stage-j quantities use input u_j and its predecessor state x_j.
    """
    N = xi.shape[0] // 6
    h = np.empty(4 * N)
    g = np.empty(2 * N)
    crat = lr / (lf + lr)
    xprev = np.empty(4)
    for b in range(N):
        base = 6 * b
        if b == 0:
            xprev[:] = x0
        else:
            for m in range(4):
                xprev[m] = xi[6 * (b - 1) + m]
        a = xi[base + 4]
        d = xi[base + 5]
        xn = rk4_step_arr(xprev, a, d, ts, seg_lo, seg_hi, seg_k, lf, lr)
        for m in range(4):
            h[4 * b + m] = xi[base + m] - xn[m]
        vj = xprev[3]
        t = np.tan(d)
        bta = np.arctan(crat * t)
        ay = vj * vj * np.sin(bta) * np.cos(bta) / lr
        g[2 * b] = abs(ay) - ay_hi
        g[2 * b + 1] = a * a + ay * ay - atot_hi * atot_hi
    return h, g


@njit(cache=True)
def project_box(xi, dy_lo, dy_hi, v_hi, ax_lo, ax_hi, dl_lo, dl_hi):
    """Componentwise clamp of dy, v, ax, delta; s and dpsi are free."""
    N = dy_lo.shape[0]
    out = xi.copy()
    for j in range(N):
        base = 6 * j
        out[base + 1] = min(max(out[base + 1], dy_lo[j]), dy_hi[j])
        out[base + 3] = min(max(out[base + 3], 0.0), v_hi)
        out[base + 4] = min(max(out[base + 4], ax_lo), ax_hi)
        out[base + 5] = min(max(out[base + 5], dl_lo), dl_hi)
    return out


@njit(cache=True)
def objective_and_grad(xi, want_grad, x0, ts, seg_lo, seg_hi, seg_k, lf, lr,
                       q, qn, r, refs, z, lam, rho, mu, alpha, ay_hi, atot_hi):
    """Smooth local objective and (optionally) its exact gradient.

    Value = tracking costs + mu'h + (alpha/2)|h|^2 + (alpha/2)|[g]+|^2
            + lam'(C xi) + (rho/2)|C xi - z|^2.
    Returns (+inf, grad) when a model singularity is hit.
    """
    N = z.shape[0]
    grad = np.zeros(6 * N)
    val = 0.0
    crat = lr / (lf + lr)

    for j in range(N):
        base = 6 * j
        a = xi[base + 4]
        d = xi[base + 5]
        val += r[0] * a * a + r[1] * d * d
        if want_grad:
            grad[base + 4] += 2.0 * r[0] * a
            grad[base + 5] += 2.0 * r[1] * d
        if j == 0:
            for m in range(4):
                dxm = x0[m] - refs[0, m]
                val += q[m] * dxm * dxm
        else:
            pb = 6 * (j - 1)
            for m in range(4):
                dxm = xi[pb + m] - refs[j, m]
                val += q[m] * dxm * dxm
                if want_grad:
                    grad[pb + m] += 2.0 * q[m] * dxm
        sb = xi[base]
        val += lam[j] * sb + 0.5 * rho * (sb - z[j]) * (sb - z[j])
        if want_grad:
            grad[base] += lam[j] + rho * (sb - z[j])

        vj = x0[3] if j == 0 else xi[6 * (j - 1) + 3]
        t = np.tan(d)
        bta = np.arctan(crat * t)
        sb_ = np.sin(bta)
        cb_ = np.cos(bta)
        ay = vj * vj * sb_ * cb_ / lr
        g1 = abs(ay) - ay_hi
        g2 = a * a + ay * ay - atot_hi * atot_hi
        if g1 > 0.0:
            val += 0.5 * alpha * g1 * g1
        if g2 > 0.0:
            val += 0.5 * alpha * g2 * g2
        if want_grad and (g1 > 0.0 or g2 > 0.0):
            day_dv = 2.0 * vj * sb_ * cb_ / lr
            dbd = crat * (1.0 + t * t) / (1.0 + crat * crat * t * t)
            day_dd = vj * vj * (cb_ * cb_ - sb_ * sb_) / lr * dbd
            gi_v = 0.0
            gi_d = 0.0
            gi_a = 0.0
            if g1 > 0.0:
                sgn = 1.0 if ay >= 0.0 else -1.0
                c1 = alpha * g1 * sgn
                gi_v += c1 * day_dv
                gi_d += c1 * day_dd
            if g2 > 0.0:
                c2 = alpha * g2
                gi_a += 2.0 * c2 * a
                gi_v += 2.0 * c2 * ay * day_dv
                gi_d += 2.0 * c2 * ay * day_dd
            grad[base + 4] += gi_a
            grad[base + 5] += gi_d
            if j > 0:
                grad[6 * (j - 1) + 3] += gi_v

    tb = 6 * (N - 1)
    for m in range(4):
        dxm = xi[tb + m] - refs[N, m]
        val += qn[m] * dxm * dxm
        if want_grad:
            grad[tb + m] += 2.0 * qn[m] * dxm

    xprev = np.empty(4)
    for b in range(N):
        base = 6 * b
        if b == 0:
            xprev[:] = x0
        else:
            for m in range(4):
                xprev[m] = xi[6 * (b - 1) + m]
        a = xi[base + 4]
        d = xi[base + 5]
        if want_grad:
            xn, A, B = rk4_step_jac(xprev, a, d, ts, seg_lo, seg_hi, seg_k,
                                    lf, lr)
        else:
            xn = rk4_step_arr(xprev, a, d, ts, seg_lo, seg_hi, seg_k, lf, lr)
            A = np.empty((0, 0))
            B = np.empty((0, 0))
        ok = True
        for m in range(4):
            if not np.isfinite(xn[m]):
                ok = False
        if not ok:
            return np.inf, grad
        for m in range(4):
            hbm = xi[base + m] - xn[m]
            val += mu[4 * b + m] * hbm + 0.5 * alpha * hbm * hbm
        if want_grad:
            for m in range(4):
                w = mu[4 * b + m] + alpha * (xi[base + m] - xn[m])
                grad[base + m] += w
                grad[base + 4] -= B[m, 0] * w
                grad[base + 5] -= B[m, 1] * w
                if b > 0:
                    for p in range(4):
                        grad[6 * (b - 1) + p] -= A[m, p] * w
    return val, grad
