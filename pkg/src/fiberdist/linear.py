"""Minimum-effort confusion of two waveforms on a linear channel.

The channel is ``q_z = sum_j a_j d^j q / dt^j + n`` on a periodic window
``[-T, T]``.  Each Fourier mode evolves independently as
``Q' = R(i w) Q + N`` with the channel polynomial ``R``, so the optimal
trajectories are sums of exponentials and everything reduces to one small
linear system per mode plus a scalar equation for the multiplier ``mu``.

Efforts here are per unit window length, ``sum_m int |N_m|^2 dz``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import approx as apx
from . import distance as dist
from .channel import FiberParams
from .errors import NoRoot, SingularSystem

FLAT_SWITCH = 1e-12
MU_BRACKET = (1e-6, 1.0 - 1e-6)


@dataclass
class FourierSignal:
    """``x(t) = sum_m X_m exp(i m pi t / T)`` on ``[-T, T]``."""

    half_window: float
    coefficients: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.half_window > 0:
            raise ValueError("half_window must be positive")
        self.coefficients = {int(m): complex(v) for m, v in self.coefficients.items()}

    @property
    def modes(self) -> list[int]:
        return sorted(self.coefficients)

    def omega(self, m: int) -> float:
        return m * math.pi / self.half_window

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for m, X in self.coefficients.items():
            out += X * np.exp(1j * self.omega(m) * t)
        return out

    @classmethod
    def random(cls, M: int, half_window: float, scale: float, rng) -> "FourierSignal":
        X = scale * (rng.standard_normal(2 * M + 1) + 1j * rng.standard_normal(2 * M + 1)) / math.sqrt(2.0)
        return cls(half_window, dict(zip(range(-M, M + 1), X)))


@dataclass(frozen=True)
class ChannelPolynomial:
    """``R(x) = sum_j a_j x^j``."""

    coefficients: tuple

    def __call__(self, x):
        return sum(complex(a) * x**j for j, a in enumerate(self.coefficients))

    @classmethod
    def dispersion(cls, beta2: float) -> "ChannelPolynomial":
        """``R(x) = -i beta2 / 2 x^2``: a purely dispersive fiber."""
        return cls((0.0, 0.0, -0.5j * beta2))


def _flat(R: complex) -> bool:
    return abs(R.real) < FLAT_SWITCH


def mode_solution(m: int, X1: complex, X2: complex, R_at_iw: complex, mu: float, L: float):
    """Coefficients ``(A, B, C, D)`` of the optimal mode trajectories.

    Flat modes (``Re R = 0``) use ``(A + B z) e^{R z}``; others use
    ``A e^{R z} + B e^{-R* z}``.  The four conditions are the two starts,
    the common end point and ``(1 - mu) B + mu D = 0``.
    """
    if not 0.0 < mu < 1.0:
        raise ValueError("mu must lie in (0, 1)")
    R = complex(R_at_iw)
    if _flat(R):
        # Q(L) = P(L)  <=>  (A + B L) = (C + D L)
        M = np.array([
            [1, 0, 0, 0],
            [0, 0, 1, 0],
            [1, L, -1, -L],
            [0, 1 - mu, 0, mu],
        ], dtype=complex)
    else:
        # the matching row divided by the larger of the two exponentials
        s = 2.0 * R.real * L
        eR, eS = (1.0, math.exp(-s)) if s > 0 else (math.exp(s), 1.0)
        M = np.array([
            [1, 1, 0, 0],
            [0, 0, 1, 1],
            [eR, eS, -eR, -eS],
            [0, 1 - mu, 0, mu],
        ], dtype=complex)
    rhs = np.array([X1, X2, 0, 0], dtype=complex)
    if np.linalg.cond(M) > 1e14:
        raise SingularSystem(f"mode {m}: exponentials coincide (R = {R})")
    A, B, C, D = np.linalg.solve(M, rhs)
    return complex(A), complex(B), complex(C), complex(D)


def mode_weight(R_at_iw: complex, L: float) -> float:
    """Energy ``int_0^L |N|^2 dz`` of a mode trajectory per unit ``|B|^2``."""
    R = complex(R_at_iw)
    if _flat(R):
        return L
    s = 2.0 * R.real
    return -s * math.expm1(-s * L)


def printed_weight(R_at_iw: complex, L: float) -> float:
    """The alternative weight ``1`` / ``(x + x*)(exp(-L (x + x*)) - 1)`` per branch."""
    R = complex(R_at_iw)
    if _flat(R):
        return 1.0
    s = 2.0 * R.real
    return s * math.expm1(-s * L)


def _common_modes(x1: FourierSignal, x2: FourierSignal):
    if not math.isclose(x1.half_window, x2.half_window, rel_tol=1e-12):
        raise ValueError("signals must share the window")
    return sorted(set(x1.coefficients) | set(x2.coefficients))


def _solve_all(x1, x2, poly, L, mu):
    out = []
    for m in _common_modes(x1, x2):
        R = complex(poly(1j * x1.omega(m)))
        X1, X2 = x1.coefficients.get(m, 0j), x2.coefficients.get(m, 0j)
        out.append((m, R, mode_solution(m, X1, X2, R, mu, L)))
    return out


def energy_balance(mu: float, x1, x2, poly, L) -> float:
    """``E_2 - E_1`` with ``E_k`` the effort of trajectory ``k`` at multiplier ``mu``."""
    return sum(mode_weight(R, L) * (abs(B) ** 2 - abs(D) ** 2) for _, R, (_, B, _, D) in _solve_all(x1, x2, poly, L, mu))


def solve_mu(x1: FourierSignal, x2: FourierSignal, poly: ChannelPolynomial, L: float) -> float:
    """Root of the energy balance on ``(0, 1)``; 1/2 when the inputs coincide."""
    lo, hi = MU_BRACKET
    g_lo = energy_balance(lo, x1, x2, poly, L)
    g_hi = energy_balance(hi, x1, x2, poly, L)
    scale = max(abs(g_lo), abs(g_hi))
    if scale == 0.0:
        return 0.5
    if g_lo * g_hi > 0:
        raise NoRoot("energy balance keeps its sign on (0, 1)")
    return float(brentq(energy_balance, lo, hi, args=(x1, x2, poly, L), xtol=1e-15, rtol=4 * np.finfo(float).eps))


def linear_distance(x1: FourierSignal, x2: FourierSignal, poly: ChannelPolynomial, L: float, with_mu: bool = False):
    """Least common effort (per unit window length) at which the two inputs are confused."""
    mu = solve_mu(x1, x2, poly, L)
    sols = _solve_all(x1, x2, poly, L, mu)
    e1 = sum(mode_weight(R, L) * abs(B) ** 2 for _, R, (_, B, _, _) in sols)
    e2 = sum(mode_weight(R, L) * abs(D) ** 2 for _, R, (_, _, _, D) in sols)
    d = 0.5 * (e1 + e2)
    return (d, mu) if with_mu else d


def euclidean_form(x1: FourierSignal, x2: FourierSignal, L: float, n_t: int | None = None) -> float:
    """``(1 / 8 L T) int |x2 - x1|^2 dt`` by the periodic trapezoid rule."""
    T = x1.half_window
    M = max(abs(m) for m in _common_modes(x1, x2))
    n_t = n_t or 4 * M + 8
    t = -T + 2 * T * np.arange(n_t) / n_t
    diff = x2(t) - x1(t)
    return float(np.sum(np.abs(diff) ** 2) * (2 * T / n_t) / (8 * L * T))


def waveform_distance(x1, x2, t, fiber: FiberParams, source: str = "exact", table=None, tol: float = 1e-10) -> float:
    """Trapezoidal integral over ``t`` of the per-sample distance.

    ``source`` is ``exact`` (joint solve per distinct sample pair) or
    ``approximation`` (needs ``table``).
    """
    x1 = np.asarray(x1, dtype=complex)
    x2 = np.asarray(x2, dtype=complex)
    t = np.asarray(t, dtype=float)
    if not (x1.shape == x2.shape == t.shape):
        raise ValueError("waveforms and time grid must have equal length")
    if np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be increasing")
    if source == "approximation":
        vals = apx.approx_distance_many(x1, x2, table)
    elif source == "exact":
        cache = {}
        vals = np.empty(t.size)
        for k, (a, b) in enumerate(zip(x1, x2)):
            key = (complex(a), complex(b))
            if key not in cache:
                cache[key] = 0.0 if a == b else dist.exact_distance(a, b, fiber, tol, with_witness=False).value
            vals[k] = cache[key]
    else:
        raise ValueError(f"unknown source {source!r}")
    return float(np.trapezoid(vals, t))
