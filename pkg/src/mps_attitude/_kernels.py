# Compiled closed-loop rollout. Mirrors dynamics.integrate_step and
# control.torque_sigma operation for operation; keep them in sync.
import math

import numpy as np
from numba import njit


@njit(cache=True)
def _matvec(M, x, out):
    for i in range(3):
        out[i] = M[i, 0] * x[0] + M[i, 1] * x[1] + M[i, 2] * x[2]


@njit(cache=True)
def _quadform(M, x):
    s = 0.0
    for i in range(3):
        s += x[i] * (M[i, 0] * x[0] + M[i, 1] * x[1] + M[i, 2] * x[2])
    return s


@njit(cache=True)
def _deriv(q, w, tau, J, J_inv, dq, dw, Jw, tmp):
    # q̇ = ½ q ⊗ [0, ω]
    dq[0] = 0.5 * (-q[1] * w[0] - q[2] * w[1] - q[3] * w[2])
    dq[1] = 0.5 * (q[0] * w[0] + q[2] * w[2] - q[3] * w[1])
    dq[2] = 0.5 * (q[0] * w[1] - q[1] * w[2] + q[3] * w[0])
    dq[3] = 0.5 * (q[0] * w[2] + q[1] * w[1] - q[2] * w[0])
    _matvec(J, w, Jw)
    tmp[0] = tau[0] - (w[1] * Jw[2] - w[2] * Jw[1])
    tmp[1] = tau[1] - (w[2] * Jw[0] - w[0] * Jw[2])
    tmp[2] = tau[2] - (w[0] * Jw[1] - w[1] * Jw[0])
    _matvec(J_inv, tmp, dw)


@njit(cache=True)
def rollout(sigma, q0, w0, q_d, w_d, w_d_rate, J, J_inv, K_n, K_w, R, Q, dt, n_steps, torque_limit):
    q = q0.copy()
    w = w0.copy()
    n_e = np.empty(3)
    tau = np.empty(3)
    a = np.empty(3)
    b = np.empty(3)
    c = np.empty(3)
    ff = np.empty(3)
    _matvec(J, w_d_rate, ff)
    k1q = np.empty(4)
    k2q = np.empty(4)
    k3q = np.empty(4)
    k4q = np.empty(4)
    k1w = np.empty(3)
    k2w = np.empty(3)
    k3w = np.empty(3)
    k4w = np.empty(3)
    qs = np.empty(4)
    ws = np.empty(3)
    Jw = np.empty(3)
    tmp = np.empty(3)
    cost = 0.0
    for _ in range(n_steps):
        # q_e = q⁻¹ ⊗ q_d, renormalized
        ew = q[0] * q_d[0] + q[1] * q_d[1] + q[2] * q_d[2] + q[3] * q_d[3]
        ex = q[0] * q_d[1] - q[1] * q_d[0] - q[2] * q_d[3] + q[3] * q_d[2]
        ey = q[0] * q_d[2] + q[1] * q_d[3] - q[2] * q_d[0] - q[3] * q_d[1]
        ez = q[0] * q_d[3] - q[1] * q_d[2] + q[2] * q_d[1] - q[3] * q_d[0]
        nrm = math.sqrt(ew * ew + ex * ex + ey * ey + ez * ez)
        n_e[0] = ex / nrm
        n_e[1] = ey / nrm
        n_e[2] = ez / nrm
        _matvec(K_n, n_e, a)
        for i in range(3):
            c[i] = w_d[i] - w[i]
        _matvec(K_w, c, b)
        _matvec(J, w, Jw)
        tau[0] = sigma * a[0] + b[0] + ff[0] + (w[1] * Jw[2] - w[2] * Jw[1])
        tau[1] = sigma * a[1] + b[1] + ff[1] + (w[2] * Jw[0] - w[0] * Jw[2])
        tau[2] = sigma * a[2] + b[2] + ff[2] + (w[0] * Jw[1] - w[1] * Jw[0])
        for i in range(3):
            if tau[i] > torque_limit:
                tau[i] = torque_limit
            elif tau[i] < -torque_limit:
                tau[i] = -torque_limit
        cost += (_quadform(R, tau) + _quadform(Q, n_e)) * dt

        _deriv(q, w, tau, J, J_inv, k1q, k1w, Jw, tmp)
        for i in range(4):
            qs[i] = q[i] + 0.5 * dt * k1q[i]
        for i in range(3):
            ws[i] = w[i] + 0.5 * dt * k1w[i]
        _deriv(qs, ws, tau, J, J_inv, k2q, k2w, Jw, tmp)
        for i in range(4):
            qs[i] = q[i] + 0.5 * dt * k2q[i]
        for i in range(3):
            ws[i] = w[i] + 0.5 * dt * k2w[i]
        _deriv(qs, ws, tau, J, J_inv, k3q, k3w, Jw, tmp)
        for i in range(4):
            qs[i] = q[i] + dt * k3q[i]
        for i in range(3):
            ws[i] = w[i] + dt * k3w[i]
        _deriv(qs, ws, tau, J, J_inv, k4q, k4w, Jw, tmp)
        for i in range(4):
            q[i] = q[i] + dt / 6.0 * (k1q[i] + 2.0 * k2q[i] + 2.0 * k3q[i] + k4q[i])
        for i in range(3):
            w[i] = w[i] + dt / 6.0 * (k1w[i] + 2.0 * k2w[i] + 2.0 * k3w[i] + k4w[i])
        nrm = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
        for i in range(4):
            q[i] = q[i] / nrm
    return cost
