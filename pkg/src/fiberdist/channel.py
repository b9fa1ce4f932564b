"""Per-sample nondispersive fiber channel.

The state obeys ``q' = i*gamma*|q|^2*q + n(z)`` on ``0 <= z <= L``.
Units: q in sqrt(W), z in km, gamma in 1/(W km), effort in W/km.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp

from .errors import StepFailure

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class FiberParams:
    """Fiber length ``length_km`` (L) and nonlinearity ``gamma``."""

    length_km: float
    gamma: float

    def __post_init__(self):
        if not np.isfinite(self.length_km) or self.length_km <= 0:
            raise ValueError(f"length_km must be positive, got {self.length_km}")
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")

    @property
    def L(self) -> float:
        return self.length_km


@dataclass
class ControlSignal:
    """Uniformly sampled control on ``[0, L]``, linearly interpolated between samples."""

    samples: np.ndarray
    grid_step: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.samples.ndim != 1 or self.samples.size < 2:
            raise ValueError("a control needs at least 2 samples")
        if not self.grid_step > 0:
            raise ValueError("grid_step must be positive")

    @property
    def length(self) -> float:
        return self.grid_step * (self.samples.size - 1)

    @property
    def z(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.samples.size)

    def at(self, z):
        zg = self.z
        return np.interp(z, zg, self.samples.real) + 1j * np.interp(z, zg, self.samples.imag)

    @classmethod
    def from_function(cls, fn, length: float, n_samples: int = 2001) -> "ControlSignal":
        z = np.linspace(0.0, length, n_samples)
        return cls(np.asarray(fn(z), dtype=complex) * np.ones_like(z), length / (n_samples - 1))

    @classmethod
    def zeros(cls, length: float, n_samples: int = 2) -> "ControlSignal":
        return cls(np.zeros(n_samples, dtype=complex), length / (n_samples - 1))


@dataclass
class Trajectory:
    z: np.ndarray
    q: np.ndarray
    control: ControlSignal = field(repr=False)

    @property
    def start(self) -> complex:
        return complex(self.q[0])

    @property
    def end(self) -> complex:
        return complex(self.q[-1])


def propagate_noise_free(x, fiber: FiberParams):
    """Noise-free channel output: a rotation by ``gamma * L * |x|^2``."""
    x = np.asarray(x, dtype=complex)
    out = x * np.exp(1j * fiber.gamma * fiber.length_km * np.abs(x) ** 2)
    return complex(out) if out.ndim == 0 else out


def control_energy(n: ControlSignal) -> float:
    """Trapezoidal estimate of the effort ``int |n|^2 dz``."""
    return float(np.trapezoid(np.abs(n.samples) ** 2, dx=n.grid_step))


def integrate(
    x: complex,
    n: ControlSignal,
    fiber: FiberParams,
    tol: float = DEFAULT_TOL,
    n_out: int | None = None,
) -> Trajectory:
    """Integrate the controlled state equation from ``q(0) = x``.

    Uses an adaptive 4(5) Runge-Kutta pair on the real 2-vector state.  The
    returned trajectory is sampled on a uniform grid of ``n_out`` points
    (default: the control grid, refined to at least 1025 points).
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    L = fiber.length_km
    if abs(n.length - L) > 1e-9 * L:
        raise ValueError(f"control covers [0, {n.length}] but the fiber has L = {L}")
    gamma = fiber.gamma
    x = complex(x)
    zc = n.z
    nre, nim = n.samples.real, n.samples.imag

    def rhs(z, y):
        r2 = y[0] * y[0] + y[1] * y[1]
        return [
            -gamma * r2 * y[1] + np.interp(z, zc, nre),
            gamma * r2 * y[0] + np.interp(z, zc, nim),
        ]

    scale = max(abs(x), L * float(np.max(np.abs(n.samples))), 1e-300)
    if n_out is None:
        n_out = max(n.samples.size, 1025)
    z_out = np.linspace(0.0, L, n_out)
    sol = solve_ivp(
        rhs, (0.0, L), [x.real, x.imag], method="RK45",
        rtol=tol, atol=tol * scale, t_eval=z_out, dense_output=False,
    )
    if sol.status != 0:
        raise StepFailure(sol.message)
    return Trajectory(z_out, sol.y[0] + 1j * sol.y[1], n)


def check_integrating_factor(traj: Trajectory, fiber: FiberParams) -> float:
    """Largest deviation of ``traj`` from the integrating-factor representation.

    ``q(z) = exp(i*gamma*P(z)) * (q(0) + int_0^z n(r) exp(-i*gamma*P(r)) dr)``
    with ``P(z) = int_0^z |q|^2``; integrals by cumulative Simpson.
    """
    z, q = traj.z, traj.q
    phase = fiber.gamma * cumulative_simpson(np.abs(q) ** 2, x=z, initial=0.0)
    integrand = traj.control.at(z) * np.exp(-1j * phase)
    acc = cumulative_simpson(integrand.real, x=z, initial=0.0) + 1j * cumulative_simpson(
        integrand.imag, x=z, initial=0.0
    )
    rebuilt = np.exp(1j * phase) * (q[0] + acc)
    return float(np.max(np.abs(q - rebuilt)))
