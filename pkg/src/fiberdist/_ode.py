"""Compiled Dormand-Prince 5(4) integrators for the Euler-Lagrange systems.

All kernels work in scaled variables: the fiber coordinate runs over [0, 1]
and the nonlinearity enters only through ``kappa = gamma * L * r0**2`` where
``r0`` is the amplitude unit chosen by the caller.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Dormand-Prince 5(4) tableau (autonomous systems only, nodes unused)
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1 = 71 / 57600
_E3 = -71 / 16695
_E4 = 71 / 1920
_E5 = -17253 / 339200
_E6 = 22 / 525
_E7 = -1 / 40

MAX_STEPS = 50_000
H_MIN = 1e-14
# scaled states are O(1) on physical solutions; beyond this the shot has escaped
Y_ESCAPE = 1e4


@njit(cache=True)
def joint_rhs(y, kappa, out):
    """State layout: a1 b1 a1' b1' a2 b2 a2' b2' c e, with e = int g1."""
    g1 = 0.0
    g2 = 0.0
    for k in range(2):
        o = 4 * k
        a = y[o]
        b = y[o + 1]
        da = y[o + 2]
        db = y[o + 3]
        r2 = a * a + b * b
        out[o] = da
        out[o + 1] = db
        out[o + 2] = -4.0 * kappa * db * r2 + 3.0 * kappa * kappa * a * r2 * r2
        out[o + 3] = 4.0 * kappa * da * r2 + 3.0 * kappa * kappa * b * r2 * r2
        na = da + kappa * b * r2
        nb = db - kappa * a * r2
        if k == 0:
            g1 = na * na + nb * nb
        else:
            g2 = na * na + nb * nb
    out[8] = g2 - g1
    out[9] = g1


@njit(cache=True)
def single_rhs(y, kappa, out):
    """State layout: a b a' b' e, with e = int g."""
    a = y[0]
    b = y[1]
    da = y[2]
    db = y[3]
    r2 = a * a + b * b
    out[0] = da
    out[1] = db
    out[2] = -4.0 * kappa * db * r2 + 3.0 * kappa * kappa * a * r2 * r2
    out[3] = 4.0 * kappa * da * r2 + 3.0 * kappa * kappa * b * r2 * r2
    na = da + kappa * b * r2
    nb = db - kappa * a * r2
    out[4] = na * na + nb * nb


@njit(cache=True)
def _trajectory_jacobian(a, b, da, db, kappa, A, o, cost_rows, cost_sign):
    """Fill rows ``o..o+3`` of the state Jacobian for one trajectory and add
    ``cost_sign * d|n|^2`` to each row listed in ``cost_rows``."""
    r2 = a * a + b * b
    k2 = kappa * kappa
    A[o, o + 2] = 1.0
    A[o + 1, o + 3] = 1.0
    A[o + 2, o] = -8.0 * kappa * a * db + 3.0 * k2 * (r2 * r2 + 4.0 * a * a * r2)
    A[o + 2, o + 1] = -8.0 * kappa * b * db + 12.0 * k2 * a * b * r2
    A[o + 2, o + 3] = -4.0 * kappa * r2
    A[o + 3, o] = 8.0 * kappa * a * da + 12.0 * k2 * a * b * r2
    A[o + 3, o + 1] = 8.0 * kappa * b * da + 3.0 * k2 * (r2 * r2 + 4.0 * b * b * r2)
    A[o + 3, o + 2] = 4.0 * kappa * r2
    na = da + kappa * b * r2
    nb = db - kappa * a * r2
    ga = 2.0 * na * (2.0 * kappa * a * b) - 2.0 * nb * kappa * (r2 + 2.0 * a * a)
    gb = 2.0 * na * kappa * (r2 + 2.0 * b * b) - 2.0 * nb * (2.0 * kappa * a * b)
    for row, sign in zip(cost_rows, cost_sign):
        A[row, o] += sign * ga
        A[row, o + 1] += sign * gb
        A[row, o + 2] += sign * 2.0 * na
        A[row, o + 3] += sign * 2.0 * nb


@njit(cache=True)
def joint_jacobian(y, kappa, A):
    A[:, :] = 0.0
    _trajectory_jacobian(y[0], y[1], y[2], y[3], kappa, A, 0, (8, 9), (-1.0, 1.0))
    _trajectory_jacobian(y[4], y[5], y[6], y[7], kappa, A, 4, (8, 8), (1.0, 0.0))


@njit(cache=True)
def single_jacobian(y, kappa, A):
    A[:, :] = 0.0
    _trajectory_jacobian(y[0], y[1], y[2], y[3], kappa, A, 0, (4, 4), (1.0, 0.0))


JOINT = 0
SINGLE = 1
# the same systems augmented with first-order sensitivities to the initial slopes
JOINT_SENS = 2
SINGLE_SENS = 3
JOINT_DIM = 10
SINGLE_DIM = 5


@njit(cache=True)
def _sens_rhs(y, kappa, out, n, m, joint):
    """State ``y[:n]`` followed by an n-by-m sensitivity block, row-major."""
    if joint:
        joint_rhs(y[:n], kappa, out[:n])
    else:
        single_rhs(y[:n], kappa, out[:n])
    A = np.empty((n, n))
    if joint:
        joint_jacobian(y[:n], kappa, A)
    else:
        single_jacobian(y[:n], kappa, A)
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(n):
                acc += A[i, k] * y[n + k * m + j]
            out[n + i * m + j] = acc


@njit(cache=True)
def rhs(system, y, kappa, out):
    if system == JOINT:
        joint_rhs(y, kappa, out)
    elif system == SINGLE:
        single_rhs(y, kappa, out)
    elif system == JOINT_SENS:
        _sens_rhs(y, kappa, out, JOINT_DIM, 4, True)
    else:
        _sens_rhs(y, kappa, out, SINGLE_DIM, 2, False)


@njit(cache=True)
def integrate(system, y0, kappa, rtol, atol, record, n_err):
    """Integrate over s in [0, 1].

    Returns ``(y_end, status, s_nodes, y_nodes)`` where status is 0 on
    success, 1 when the step budget ran out, 2 when the step collapsed and
    3 when the state escaped.  Nodes are only filled when ``record``.  Step
    control and the escape test use the first ``n_err`` components.
    """
    n = y0.shape[0]
    y = y0.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    tmp = np.empty(n)
    ynew = np.empty(n)

    cap = 256 if record else 1
    zs = np.empty(cap)
    ys = np.empty((cap, n))
    count = 0
    if record:
        zs[0] = 0.0
        ys[0, :] = y
        count = 1

    s = 0.0
    h = 1e-3
    rhs(system, y, kappa, k1)
    steps = 0
    status = 0
    while s < 1.0:
        if steps >= MAX_STEPS:
            status = 1
            break
        if h < H_MIN:
            status = 2
            break
        last = False
        if s + h >= 1.0:
            h = 1.0 - s
            last = True

        for i in range(n):
            tmp[i] = y[i] + h * _A21 * k1[i]
        rhs(system, tmp, kappa, k2)
        for i in range(n):
            tmp[i] = y[i] + h * (_A31 * k1[i] + _A32 * k2[i])
        rhs(system, tmp, kappa, k3)
        for i in range(n):
            tmp[i] = y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
        rhs(system, tmp, kappa, k4)
        for i in range(n):
            tmp[i] = y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
        rhs(system, tmp, kappa, k5)
        for i in range(n):
            tmp[i] = y[i] + h * (
                _A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i]
            )
        rhs(system, tmp, kappa, k6)
        for i in range(n):
            ynew[i] = y[i] + h * (
                _B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i] + _B6 * k6[i]
            )
        rhs(system, ynew, kappa, k7)

        err = 0.0
        for i in range(n_err):
            e = h * (
                _E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i]
            )
            sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            err += (e / sc) ** 2
        err = np.sqrt(err / n_err)

        if err <= 1.0:
            escaped = False
            for i in range(n_err):
                if not abs(ynew[i]) < Y_ESCAPE:
                    escaped = True
            if escaped:
                status = 3
                for i in range(n):
                    y[i] = ynew[i]
                break
            s = 1.0 if last else s + h
            for i in range(n):
                y[i] = ynew[i]
                k1[i] = k7[i]
            steps += 1
            if record:
                if count == cap:
                    cap *= 2
                    zs2 = np.empty(cap)
                    ys2 = np.empty((cap, n))
                    zs2[:count] = zs[:count]
                    ys2[:count, :] = ys[:count, :]
                    zs = zs2
                    ys = ys2
                zs[count] = s
                ys[count, :] = y
                count += 1
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h *= fac
        else:
            h *= max(0.2, 0.9 * err ** -0.2)

    return y, status, zs[:count], ys[:count]


def integrate_joint(y0, kappa, rtol, atol, record):
    return integrate(JOINT, y0, kappa, rtol, atol, record, JOINT_DIM)


def integrate_single(y0, kappa, rtol, atol, record):
    return integrate(SINGLE, y0, kappa, rtol, atol, record, SINGLE_DIM)


def integrate_joint_sens(y0, kappa, rtol, atol):
    """End state and d(end state)/d(a1', b1', a2', b2') at s = 1."""
    z0 = np.zeros(JOINT_DIM * 5)
    z0[:JOINT_DIM] = y0
    for j in range(4):
        z0[JOINT_DIM + (2 + j + 2 * (j >= 2)) * 4 + j] = 1.0
    z, status, _, _ = integrate(JOINT_SENS, z0, kappa, rtol, atol, False, JOINT_DIM)
    return z[:JOINT_DIM], z[JOINT_DIM:].reshape(JOINT_DIM, 4), status


def integrate_single_sens(y0, kappa, rtol, atol):
    """End state and d(end state)/d(a', b') at s = 1."""
    z0 = np.zeros(SINGLE_DIM * 3)
    z0[:SINGLE_DIM] = y0
    z0[SINGLE_DIM + 2 * 2 + 0] = 1.0
    z0[SINGLE_DIM + 3 * 2 + 1] = 1.0
    z, status, _, _ = integrate(SINGLE_SENS, z0, kappa, rtol, atol, False, SINGLE_DIM)
    return z[:SINGLE_DIM], z[SINGLE_DIM:].reshape(SINGLE_DIM, 2), status
