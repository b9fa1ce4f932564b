"""Constant-modulus controls ``n(z) = C exp(i theta(z))``.

With such a control the radius moves linearly from ``|x|`` to ``|y|`` and
the phase picks up ``gamma*int R^2 + Im(C)*int 1/R``.  Both integrals have
closed forms, which gives an explicit effort for every endpoint pair and a
cheap initial slope for the shooting solvers.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

SERIES_SWITCH = 1e-6
_TWO_PI = 2.0 * math.pi


def wrap_angle(a):
    """Reduce to ``[-pi, pi)``."""
    with np.errstate(invalid="ignore"):
        return np.mod(np.asarray(a, dtype=float) + np.pi, 2 * np.pi) - np.pi


def log_mean(r1, r2):
    """Logarithmic mean ``(r2 - r1) / ln(r2 / r1)``; 0 when either radius is 0.

    Uses a second-order series when the radii differ by less than
    ``SERIES_SWITCH`` relative.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    lo = np.minimum(r1, r2)
    hi = np.maximum(r1, r2)
    out = np.zeros(np.broadcast(lo, hi).shape)
    pos = lo > 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        u = np.where(pos, np.log(np.where(pos, hi / np.where(pos, lo, 1.0), 1.0)), 0.0)
        exact = lo * np.expm1(u) / np.where(u == 0, 1.0, u)
        series = lo * (1.0 + u / 2.0 + u * u / 6.0)
    out = np.where(pos, np.where(u < SERIES_SWITCH, series, exact), 0.0)
    return out[()] if out.ndim == 0 else out


def phase_mismatch(x, y, gamma, L, winding=0):
    """Phase the azimuthal part of the control must supply, ``Delta + 2*pi*winding``."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    r1, r2 = np.abs(x), np.abs(y)
    drift = gamma * L * (r1 * r1 + r1 * r2 + r2 * r2) / 3.0
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.angle(y) - np.angle(x)
    return wrap_angle(rel - drift) + 2 * np.pi * np.asarray(winding)


def spiral_effort(x, y, gamma, L, winding=0):
    """Effort of the constant-modulus control steering ``x`` to ``y``."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    r1, r2 = np.abs(x), np.abs(y)
    delta = phase_mismatch(x, y, gamma, L, winding)
    lm = log_mean(r1, r2)
    out = ((r2 - r1) ** 2 + np.where(lm > 0, lm * lm * delta * delta, 0.0)) / L
    return out[()] if np.ndim(out) == 0 else out


def spiral_effort_scalar(x: complex, y: complex, gamma: float, L: float) -> float:
    """Scalar fast path of :func:`spiral_effort` (principal winding)."""
    r1, r2 = abs(x), abs(y)
    if r1 == 0.0 or r2 == 0.0:
        return (r2 - r1) ** 2 / L
    lo, hi = (r1, r2) if r1 <= r2 else (r2, r1)
    u = math.log(hi / lo)
    lm = lo * (1.0 + u / 2.0 + u * u / 6.0) if u < SERIES_SWITCH else lo * math.expm1(u) / u
    rel = cmath.phase(y) - cmath.phase(x) - gamma * L * (r1 * r1 + r1 * r2 + r2 * r2) / 3.0
    delta = (rel + math.pi) % _TWO_PI - math.pi
    return ((r2 - r1) ** 2 + lm * lm * delta * delta) / L


def spiral_slope(x: complex, y: complex, gamma: float, L: float, winding: int = 0):
    """Initial slope ``q'(0)`` and modulus ``|C|`` of the constant-modulus control."""
    x, y = complex(x), complex(y)
    r1, r2 = abs(x), abs(y)
    if r1 == 0.0:
        n0 = (y / L) * np.exp(-1j * gamma * r2 * r2 * L / 3.0)
        return complex(n0), r2 / L
    unit = x / r1
    a = (r2 - r1) / L
    b = 0.0 if r2 == 0.0 else float(log_mean(r1, r2)) * float(phase_mismatch(x, y, gamma, L, winding)) / L
    n0 = (a + 1j * b) * unit
    return complex(1j * gamma * r1 * r1 * x + n0), float(np.hypot(a, b))


def _best_angle(x1: complex, x2: complex, gamma: float, L: float, rho: np.ndarray):
    """For each meeting radius, the exact best meeting angle and its max-effort.

    At fixed ``|y| = rho`` each effort is ``A_k + B_k * wrap(psi - c_k)^2``;
    the minimum of their maximum sits at a vertex ``c_k`` or at a crossing
    of the two parabolas along either arc, so evaluating those candidates
    is exact.
    """
    r = np.array([abs(x1), abs(x2)])
    arg = np.array([np.angle(x1), np.angle(x2)])
    A = (rho[None, :] - r[:, None]) ** 2 / L
    B = log_mean(np.broadcast_to(r[:, None], A.shape), np.broadcast_to(rho[None, :], A.shape)) ** 2 / L
    c = arg[:, None] + gamma * L * (r[:, None] ** 2 + r[:, None] * rho[None, :] + rho[None, :] ** 2) / 3.0

    D = wrap_angle(c[1] - c[0])
    cands = [c[0], c[1]]
    for arc in (D, D - 2 * np.pi * np.where(D >= 0, 1.0, -1.0)):
        qa = B[0] - B[1]
        qb = 2.0 * B[1] * arc
        qc = A[0] - A[1] - B[1] * arc * arc
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            disc = qb * qb - 4.0 * qa * qc
            sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
            # cancellation-free roots; qa vanishes for equal radii
            q = -0.5 * (qb + np.copysign(sq, qb))
            for t in (q / qa, qc / q):
                cands.append(np.where(np.abs(t) <= 2 * np.pi, c[0] + t, np.nan))
    psi = np.stack(cands)
    e1 = A[0] + B[0] * wrap_angle(psi - c[0]) ** 2
    e2 = A[1] + B[1] * wrap_angle(psi - c[1]) ** 2
    worst = np.where(np.isfinite(psi), np.maximum(e1, e2), np.inf)
    j = np.argmin(worst, axis=0)
    cols = np.arange(rho.size)
    return worst[j, cols], psi[j, cols]


def min_max_spiral(x1: complex, x2: complex, gamma: float, L: float, n_radii: int = 129, zoom_levels: int = 30):
    """Minimize ``max_k spiral_effort(x_k, y)`` over meeting points ``y``.

    Exact in the meeting angle; the meeting radius is scanned on
    ``[0, 1.25 max|x_k|]`` and refined by shrinking 1-D grids around the
    three best radii.  Returns ``(value, y)``.
    """
    x1, x2 = complex(x1), complex(x2)
    rmax = 1.25 * max(abs(x1), abs(x2))
    rho = np.linspace(0.0, rmax, n_radii)
    vals, psis = _best_angle(x1, x2, gamma, L, rho)
    order = np.argsort(vals)
    best = (float(vals[order[0]]), float(rho[order[0]]), float(psis[order[0]]))
    offsets = np.linspace(-1.0, 1.0, 11)
    for idx in order[:3]:
        centre, width = float(rho[idx]), rmax / (n_radii - 1)
        val, psi = float(vals[idx]), float(psis[idx])
        for _ in range(zoom_levels):
            cand = np.clip(centre + width * offsets, 0.0, None)
            cv, cp = _best_angle(x1, x2, gamma, L, cand)
            j = int(np.argmin(cv))
            if cv[j] <= val:
                centre, val, psi = float(cand[j]), float(cv[j]), float(cp[j])
            width /= 2.0
        if val < best[0]:
            best = (val, centre, psi)
    val, radius, psi = best
    return val, complex(radius * np.exp(1j * psi))
