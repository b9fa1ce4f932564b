"""Shooting solvers for the minimum-effort boundary-value problems.

Two problems are solved:

* the joint problem: two trajectories from ``x1`` and ``x2`` that meet at
  ``z = L`` with equal control energy, coupled at the far end through a
  constant multiplier ``lam``; its effort is the adversarial distance;
* the single problem: one trajectory from ``x`` to a fixed ``y``; its
  effort is the minimum energy needed to map ``x`` onto ``y``.

Both are integrated in scaled variables (``s = z/L``, ``u = q/r0``) so that
Newton sees O(1) quantities for any fiber; results are reported in
physical units.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import _ode
from ._polar import min_max_spiral, spiral_effort, spiral_slope
from .channel import ControlSignal, FiberParams, Trajectory
from .errors import DegenerateMultiplier, NoConvergence

DEFAULT_TOL = 1e-10
# relative energy mismatch allowed at an accepted joint solution
ENERGY_MISMATCH = 1e-6
MAX_NEWTON = 50
MAX_HALVINGS = 8
# Newton gives up when the residual has not halved over this many iterations
STALL_WINDOW = 8
CONTINUATION_STEPS = 8
# target continuation for the single problem: angle per step (rad), smallest step in s
PATH_ANGLE_STEP = 0.2
PATH_MIN_STEP = 1e-3
TRAJECTORY_SAMPLES = 2001
BRANCHES = ("linear", "radial", "phase")


@dataclass(frozen=True)
class JointState:
    a1: float
    b1: float
    a2: float
    b2: float
    da1: float
    db1: float
    da2: float
    db2: float
    c: float
    lam: float


@dataclass(frozen=True)
class JointSeed:
    """Initial guess for the joint shooting: slopes ``q_k'(0)`` and multiplier."""

    branch: str
    dq1: complex
    dq2: complex
    lam: float


@dataclass
class JointSolution:
    traj1: Trajectory
    traj2: Trajectory
    lam: float
    effort: float
    residual_norm: float
    meeting_point: complex
    # terminal residuals in scaled units: meet (2), c(L), transversality (2)
    residuals: np.ndarray = field(repr=False)
    # physical energy mismatch int g2 - int g1
    c_end: float = 0.0
    branch: str = ""


@dataclass
class EffortSolution:
    traj: Trajectory
    effort: float
    residual_norm: float
    slope: complex = 0j
    branch: str = ""


def running_cost(q, dq, gamma):
    """``|q' - i gamma |q|^2 q|^2``: the squared control along a trajectory."""
    q = np.asarray(q, dtype=complex)
    return np.abs(np.asarray(dq) - 1j * gamma * np.abs(q) ** 2 * q) ** 2


def eulag_rhs(s: JointState, fiber: FiberParams) -> JointState:
    """Derivative of the joint state; each field holds d/dz of that field."""
    g = fiber.gamma
    out = {}
    costs = []
    for k in (1, 2):
        a, b = getattr(s, f"a{k}"), getattr(s, f"b{k}")
        da, db = getattr(s, f"da{k}"), getattr(s, f"db{k}")
        r2 = a * a + b * b
        out[f"a{k}"], out[f"b{k}"] = da, db
        out[f"da{k}"] = -4 * g * db * r2 + 3 * g * g * a * r2 * r2
        out[f"db{k}"] = 4 * g * da * r2 + 3 * g * g * b * r2 * r2
        costs.append((da + g * b * r2) ** 2 + (db - g * a * r2) ** 2)
    return JointState(c=costs[1] - costs[0], lam=0.0, **out)


# -- scaling -----------------------------------------------------------------


@dataclass(frozen=True)
class _Scale:
    r0: float
    L: float
    gamma: float

    @property
    def kappa(self) -> float:
        return self.gamma * self.L * self.r0 * self.r0

    def u(self, q: complex) -> complex:
        return q / self.r0

    def du(self, dq: complex) -> complex:
        return dq * self.L / self.r0

    def effort(self, e_scaled: float) -> float:
        return e_scaled * self.r0 * self.r0 / self.L


def _integrator_tol(tol: float, kappa: float = 0.0) -> float:
    # shooting amplifies integration error roughly in proportion to kappa
    return min(1e-12, max(1e-14, tol * 1e-2 / (1.0 + kappa)))


def _newton(residual, jacobian, v0, tol):
    """Damped Newton with halving line search.

    ``residual(v)`` returns the residual vector, ``jacobian(v)`` the pair
    (residual, Jacobian); either returns None when the shot fails.  Returns
    the converged point and residual, or None.
    """
    v = np.asarray(v0, dtype=float).copy()
    history = []
    for _ in range(MAX_NEWTON):
        got = jacobian(v)
        if got is None:
            return None
        F, J = got
        if np.max(np.abs(F)) <= tol:
            return v, F
        norm = np.linalg.norm(F)
        history.append(norm)
        if len(history) > STALL_WINDOW and norm > 0.5 * history[-1 - STALL_WINDOW]:
            return None
        step = np.linalg.lstsq(J, -F, rcond=None)[0]
        alpha = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = v + alpha * step
            Fn = residual(trial)
            if Fn is not None and np.linalg.norm(Fn) < norm:
                v = trial
                break
            alpha *= 0.5
        else:
            return None
        if np.max(np.abs(Fn)) <= tol:
            return v, Fn
    return None


def _resample(s_nodes, states, deriv, sc: _Scale, n_out: int):
    """Uniform-grid trajectory from recorded nodes via cubic Hermite interpolation.

    ``states`` columns are (a, b, a', b'); ``deriv`` columns (a', b', a'', b'').
    """
    s_out = np.linspace(0.0, 1.0, n_out)
    u = CubicHermiteSpline(s_nodes, states[:, 0] + 1j * states[:, 1], deriv[:, 0] + 1j * deriv[:, 1])(s_out)
    du = CubicHermiteSpline(s_nodes, states[:, 2] + 1j * states[:, 3], deriv[:, 2] + 1j * deriv[:, 3])(s_out)
    q = sc.r0 * u
    dq = du * sc.r0 / sc.L
    n = dq - 1j * sc.gamma * np.abs(q) ** 2 * q
    return Trajectory(s_out * sc.L, q, ControlSignal(n, sc.L / (n_out - 1)))


# -- single trajectory ---------------------------------------------------------


def _effort_seeds(x: complex, y: complex, fiber: FiberParams, windings=(-2, -1, 0, 1, 2)):
    L, g = fiber.length_km, fiber.gamma
    if abs(x) == 0.0 or abs(y) == 0.0:
        return [("spiral", spiral_slope(x, y, g, L)[0])]
    seeds = []
    for w in windings:
        seeds.append((float(spiral_effort(x, y, g, L, w)), f"spiral{w:+d}", spiral_slope(x, y, g, L, w)[0]))
    seeds.sort(key=lambda t: t[0])
    return [(name, dq) for _, name, dq in seeds]


class _SingleShooter:
    """Newton shooting for ``x -> target`` in the scaled variables of ``sc``."""

    def __init__(self, x: complex, sc: _Scale, tol: float):
        self.u0 = sc.u(x)
        self.sc = sc
        self.kappa = sc.kappa
        self.tol = tol
        self.itol = _integrator_tol(tol, sc.kappa)
        self.energy = {}

    def _y0(self, v):
        return np.array([self.u0.real, self.u0.imag, v[0], v[1], 0.0])

    def solve(self, target: complex, v0):
        u1 = self.sc.u(target)

        def shoot(v):
            yend, status, _, _ = _ode.integrate_single(self._y0(v), self.kappa, self.itol, self.itol, False)
            if status != 0:
                return None
            self.energy[tuple(v)] = yend[4]
            return np.array([yend[0] - u1.real, yend[1] - u1.imag])

        def shoot_jac(v):
            yend, S, status = _ode.integrate_single_sens(self._y0(v), self.kappa, self.itol, self.itol)
            if status != 0:
                return None
            self.energy[tuple(v)] = yend[4]
            return np.array([yend[0] - u1.real, yend[1] - u1.imag]), S[0:2, :].copy()

        out = _newton(shoot, shoot_jac, v0, self.tol)
        if out is None:
            return None
        v, F = out
        if tuple(v) not in self.energy:
            shoot(v)
        return v, F, self.energy[tuple(v)]


def _target_path(shooter: _SingleShooter, x: complex, y: complex, fiber: FiberParams, sweep: float):
    """Continue the target from the noise-free output of ``x`` to ``y``.

    The target moves linearly in radius and by ``sweep`` radians in angle;
    the start is exact (zero control).  Returns ``(v, F, e)`` or None.
    """
    g, L = fiber.gamma, fiber.length_km
    r_x, r_y = abs(x), abs(y)
    out0 = x * cmath.exp(1j * g * L * r_x * r_x)
    th0 = cmath.phase(out0)

    def target(s):
        return (r_x + s * (r_y - r_x)) * cmath.exp(1j * (th0 + s * sweep))

    dq0 = 1j * g * r_x * r_x * x
    du = shooter.sc.du(dq0)
    v = np.array([du.real, du.imag])
    prev = None
    s, h = 0.0, min(0.25, PATH_ANGLE_STEP / max(abs(sweep), 1e-12))
    got = None
    while s < 1.0:
        h = min(h, 1.0 - s)
        pred = v if prev is None else v + (v - prev[0]) * (h / prev[1])
        got = shooter.solve(target(s + h), pred)
        if got is None and prev is not None:
            got = shooter.solve(target(s + h), v)
        if got is None:
            h *= 0.5
            if h < PATH_MIN_STEP:
                return None
            continue
        prev = (v, h)
        v = got[0]
        s += h
        h = min(1.5 * h, 2.0 * PATH_ANGLE_STEP / max(abs(sweep), 1e-12), 0.5)
    return got


def solve_effort(
    x: complex,
    y: complex,
    fiber: FiberParams,
    seeds=None,
    tol: float = DEFAULT_TOL,
    with_trajectory: bool = True,
    spiral_seeds: bool = True,
) -> EffortSolution:
    """Minimum-effort trajectory from ``x`` to ``y``.

    ``seeds`` is an optional list of initial slopes ``q'(0)`` (complex).
    Unless ``spiral_seeds=False`` (warm start: only the given seeds are
    tried), the target is also continued from the noise-free output of
    ``x`` to ``y`` both ways round, with the constant-modulus spiral slopes
    as a fallback when neither path gets through.  Every converged solution is kept and the lowest-effort one
    returned.
    """
    x, y = complex(x), complex(y)
    L = fiber.length_km
    r0 = max(abs(x), abs(y))
    if r0 == 0.0:
        z = np.linspace(0.0, L, 2)
        return EffortSolution(Trajectory(z, np.zeros(2, complex), ControlSignal.zeros(L)), 0.0, 0.0)
    sc = _Scale(r0, L, fiber.gamma)
    shooter = _SingleShooter(x, sc, tol)
    itol, kappa = shooter.itol, shooter.kappa
    u0 = shooter.u0

    results = []

    def run(cands):
        for name, dq in cands:
            du = sc.du(dq)
            got = shooter.solve(y, [du.real, du.imag])
            if got is not None:
                results.append((got[2], got[0], got[1], name))

    run([("given", complex(s)) for s in (seeds or [])])
    if spiral_seeds or not seeds:
        if abs(x) > 0 and abs(y) > 0 and fiber.gamma > 0:
            out0 = x * cmath.exp(1j * fiber.gamma * L * abs(x) ** 2)
            delta = float(cmath.phase(y / out0))
            for sweep in (delta, delta - 2 * np.pi * np.copysign(1.0, delta)):
                got = _target_path(shooter, x, y, fiber, sweep)
                if got is not None:
                    results.append((got[2], got[0], got[1], "path"))
        if not any(r[3] == "path" for r in results):
            run(_effort_seeds(x, y, fiber))
    if not results:
        raise NoConvergence(f"single-trajectory shooting failed for x={x}, y={y}")
    e, v, F, name = min(results, key=lambda t: t[0])
    best = (e, v, float(np.max(np.abs(F))), name)

    e, v, res, name = best
    slope = complex(v[0], v[1]) * r0 / L
    if with_trajectory:
        y0 = np.array([u0.real, u0.imag, v[0], v[1], 0.0])
        _, _, s_nodes, states = _ode.integrate_single(y0, kappa, itol, itol, True)
        deriv = np.empty_like(states)
        for i in range(states.shape[0]):
            _ode.single_rhs(states[i], kappa, deriv[i])
        traj = _resample(s_nodes, states, deriv, sc, TRAJECTORY_SAMPLES)
    else:
        z = np.linspace(0.0, L, 2)
        traj = Trajectory(z, np.array([x, y]), ControlSignal.zeros(L))
    return EffortSolution(traj, sc.effort(e), res, slope, name)


# -- joint problem -------------------------------------------------------------


def _lam_from_moduli(m1: float, m2: float) -> float:
    # far-end condition: (1 - lam) |n1| = lam |n2|
    return 0.5 if m1 + m2 == 0 else m1 / (m1 + m2)


def _seed_towards(x1, x2, y, fiber, branch, w1=0, w2=0) -> JointSeed:
    L, g = fiber.length_km, fiber.gamma
    dq1, m1 = spiral_slope(x1, y, g, L, w1)
    dq2, m2 = spiral_slope(x2, y, g, L, w2)
    return JointSeed(branch, dq1, dq2, _lam_from_moduli(m1, m2))


def make_seeds(x1: complex, x2: complex, fiber: FiberParams, branch: str) -> list[JointSeed]:
    """Initial guesses for one family of joint solutions.

    ``linear``: straight-line noise meeting at the midpoint (exact at gamma = 0).
    ``radial``: constant-modulus controls to the circle of mean radius and
    to the origin.  ``phase``: constant-modulus controls to the best common
    endpoint of that family, plus winding-shifted variants.
    """
    x1, x2 = complex(x1), complex(x2)
    L, g = fiber.length_km, fiber.gamma
    if branch == "linear":
        mid = (x1 + x2) / 2
        out = [JointSeed("linear", (mid - x1) / L, (mid - x2) / L, 0.5)]
        if g > 0:
            out.append(JointSeed(
                "linear", 1j * g * abs(x1) ** 2 * x1 + (mid - x1) / L, 1j * g * abs(x2) ** 2 * x2 + (mid - x2) / L, 0.5
            ))
        return out
    if branch == "radial":
        r1, r2 = abs(x1), abs(x2)
        rbar = (r1 + r2) / 2
        arrive = [
            cmath.phase(x) + g * L * (r * r + r * rbar + rbar * rbar) / 3 if r > 0 else None
            for x, r in ((x1, r1), (x2, r2))
        ]
        angles = [a for a in arrive if a is not None]
        mean = cmath.phase(sum(cmath.exp(1j * a) for a in angles)) if angles else 0.0
        out = [_seed_towards(x1, x2, 0j, fiber, "radial")]
        for psi in (mean, mean + np.pi, *angles):
            out.append(_seed_towards(x1, x2, rbar * cmath.exp(1j * psi), fiber, "radial"))
        return out
    if branch == "phase":
        _, ystar = min_max_spiral(x1, x2, g, L)
        out = [_seed_towards(x1, x2, ystar, fiber, "phase")]
        if abs(ystar) > 0:
            for w1, w2 in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                out.append(_seed_towards(x1, x2, ystar, fiber, "phase", w1, w2))
        return out
    raise ValueError(f"unknown branch {branch!r}")


class _JointProblem:
    def __init__(self, x1: complex, x2: complex, fiber: FiberParams, tol: float):
        self.fiber = fiber
        self.sc = _Scale(max(abs(x1), abs(x2)), fiber.length_km, fiber.gamma)
        self.u1, self.u2 = self.sc.u(x1), self.sc.u(x2)
        self.tol = tol
        self.itol = _integrator_tol(tol, self.sc.kappa)

    def initial(self, v):
        return np.array([self.u1.real, self.u1.imag, v[0], v[1], self.u2.real, self.u2.imag, v[2], v[3], 0.0, 0.0])

    def residual(self, v, kappa):
        yend, status, _, _ = _ode.integrate_joint(self.initial(v), kappa, self.itol, self.itol, False)
        if status != 0:
            return None
        return self._terminal(yend, v[4], kappa)

    def residual_jacobian(self, v, kappa):
        yend, S, status = _ode.integrate_joint_sens(self.initial(v), kappa, self.itol, self.itol)
        if status != 0:
            return None
        lam = v[4]
        a1, b1 = yend[0], yend[1]
        r2 = a1 * a1 + b1 * b1
        w = 1.0 / (1.0 + kappa)
        J = np.zeros((5, 5))
        J[0, :4] = S[0] - S[4]
        J[1, :4] = S[1] - S[5]
        J[2, :4] = S[8]
        J[3, :4] = w * ((1 - lam) * S[2] + lam * S[6] + kappa * ((r2 + 2 * b1 * b1) * S[1] + 2 * a1 * b1 * S[0]))
        J[4, :4] = w * ((1 - lam) * S[3] + lam * S[7] - kappa * ((r2 + 2 * a1 * a1) * S[0] + 2 * a1 * b1 * S[1]))
        J[3, 4] = w * (yend[6] - yend[2])
        J[4, 4] = w * (yend[7] - yend[3])
        return self._terminal(yend, lam, kappa), J

    @staticmethod
    def _terminal(yend, lam, kappa):
        a1, b1 = yend[0], yend[1]
        r2 = a1 * a1 + b1 * b1
        # transversality rows are combinations of slopes of size ~kappa
        w = 1.0 / (1.0 + kappa)
        return np.array([
            yend[0] - yend[4],
            yend[1] - yend[5],
            yend[8],
            w * ((1 - lam) * yend[2] + lam * yend[6] + kappa * b1 * r2),
            w * ((1 - lam) * yend[3] + lam * yend[7] - kappa * a1 * r2),
        ])

    def unknowns(self, seed: JointSeed):
        d1, d2 = self.sc.du(seed.dq1), self.sc.du(seed.dq2)
        return np.array([d1.real, d1.imag, d2.real, d2.imag, seed.lam])

    def solve(self, v0, kappa=None):
        kappa = self.sc.kappa if kappa is None else kappa
        return _newton(
            lambda v: self.residual(v, kappa), lambda v: self.residual_jacobian(v, kappa), v0, self.tol
        )

    def endpoint(self, v):
        yend, _, _, _ = _ode.integrate_joint(self.initial(v), self.sc.kappa, self.itol, self.itol, False)
        return yend


def _continuation(prob: _JointProblem, x1: complex, x2: complex):
    """Ramp the nonlinearity from the exact linear solution up to the target."""
    mid = (prob.u1 + prob.u2) / 2
    d1, d2 = mid - prob.u1, mid - prob.u2
    v = np.array([d1.real, d1.imag, d2.real, d2.imag, 0.5])
    for j in range(CONTINUATION_STEPS):
        kappa = prob.sc.kappa * 2.0 ** (j + 1 - CONTINUATION_STEPS)
        out = prob.solve(v, kappa)
        if out is None:
            return None
        v = out[0]
    return out


def solve_joint(
    x1: complex,
    x2: complex,
    fiber: FiberParams,
    seeds=None,
    tol: float = DEFAULT_TOL,
    with_trajectory: bool = True,
    continuation: bool = True,
) -> JointSolution:
    """Solve the joint boundary-value problem; lowest effort over all seeds.

    Falls back to continuation in gamma when no seed converges (unless
    ``continuation`` is False).  Raises
    :class:`NoConvergence` when nothing converges and
    :class:`DegenerateMultiplier` when every converged solution has its
    multiplier outside (0, 1).
    """
    x1, x2 = complex(x1), complex(x2)
    if x1 == x2:
        raise ValueError("solve_joint needs distinct points")
    if not tol > 0:
        raise ValueError("tol must be positive")
    prob = _JointProblem(x1, x2, fiber, tol)
    if seeds is None:
        seeds = [s for b in BRANCHES for s in make_seeds(x1, x2, fiber, b)]

    found = []
    degenerate = 0

    def consider(out, branch):
        nonlocal degenerate
        if out is None:
            return
        v, F = out
        yend = prob.endpoint(v)
        e = yend[9]
        if not 0.0 < v[4] < 1.0:
            degenerate += 1
            return
        if abs(yend[8]) > ENERGY_MISMATCH * max(e, 1e-300):
            return
        found.append((e, v, F, branch))

    for seed in seeds:
        consider(prob.solve(prob.unknowns(seed)), seed.branch)
    if not found and continuation and fiber.gamma > 0:
        consider(_continuation(prob, x1, x2), "continuation")
    if not found:
        if degenerate:
            raise DegenerateMultiplier(f"multiplier left (0, 1) for x1={x1}, x2={x2}")
        raise NoConvergence(f"joint shooting failed from every seed for x1={x1}, x2={x2}")

    e, v, F, branch = min(found, key=lambda t: t[0])
    return _assemble(prob, v, F, branch, with_trajectory)


def _assemble(prob: _JointProblem, v, F, branch: str, with_trajectory: bool) -> JointSolution:
    sc = prob.sc
    kappa = sc.kappa
    L = sc.L
    yend, _, s_nodes, states = _ode.integrate_joint(prob.initial(v), kappa, prob.itol, prob.itol, with_trajectory)
    meet = sc.r0 * complex(0.5 * (yend[0] + yend[4]), 0.5 * (yend[1] + yend[5]))
    if with_trajectory:
        deriv = np.empty_like(states)
        for i in range(states.shape[0]):
            _ode.joint_rhs(states[i], kappa, deriv[i])
        traj1 = _resample(s_nodes, states[:, 0:4], deriv[:, 0:4], sc, TRAJECTORY_SAMPLES)
        traj2 = _resample(s_nodes, states[:, 4:8], deriv[:, 4:8], sc, TRAJECTORY_SAMPLES)
    else:
        z = np.linspace(0.0, L, 2)
        traj1 = Trajectory(z, np.array([sc.r0 * prob.u1, meet]), ControlSignal.zeros(L))
        traj2 = Trajectory(z, np.array([sc.r0 * prob.u2, meet]), ControlSignal.zeros(L))
    return JointSolution(
        traj1=traj1,
        traj2=traj2,
        lam=float(v[4]),
        effort=sc.effort(yend[9]),
        residual_norm=float(np.max(np.abs(F))),
        meeting_point=meet,
        residuals=np.asarray(F, dtype=float),
        c_end=sc.effort(yend[8]),
        branch=branch,
    )


# -- continuation along a path of input pairs ------------------------------------


@dataclass
class PathPoint:
    """Converged joint solution at one parameter value of a tracked path."""

    s: float
    x1: complex
    x2: complex
    dq1: complex
    dq2: complex
    lam: float
    effort: float
    residual_norm: float

    def seed(self, branch: str = "path") -> JointSeed:
        return JointSeed(branch, self.dq1, self.dq2, self.lam)


def _normalizer(x: complex) -> complex:
    # slopes divided by their start point are invariant under rotating that point
    return x if x != 0 else 1.0


def track_joint(
    pair_at,
    s_values,
    start: JointSeed,
    fiber: FiberParams,
    tol: float = DEFAULT_TOL,
    first_step: float = 0.1,
    min_step: float = 1e-4,
    max_step: float = 0.2,
) -> list[PathPoint | None]:
    """Follow a joint solution along a smooth path of input pairs.

    ``pair_at(s)`` returns ``(x1, x2)``; ``s_values`` must be increasing and
    ``start`` must converge at ``s_values[0]``.  Steps adapt between the
    requested values using a secant predictor on the rotation-normalized
    slopes ``q_k'(0)/x_k``.  Entries after the first failure are None.
    """
    s_values = [float(s) for s in s_values]
    out: list[PathPoint | None] = [None] * len(s_values)

    def attempt(s, dq1, dq2, lam):
        x1, x2 = pair_at(s)
        prob = _JointProblem(complex(x1), complex(x2), fiber, tol)
        got = prob.solve(prob.unknowns(JointSeed("path", dq1, dq2, lam)))
        if got is None or not 0.0 < got[0][4] < 1.0:
            return None
        v, F = got
        yend = prob.endpoint(v)
        e = prob.sc.effort(yend[9])
        if abs(yend[8]) > ENERGY_MISMATCH * max(yend[9], 1e-300):
            return None
        scale = prob.sc.r0 / prob.sc.L
        return PathPoint(
            s, complex(x1), complex(x2), complex(v[0], v[1]) * scale, complex(v[2], v[3]) * scale,
            float(v[4]), e, float(np.max(np.abs(F))),
        )

    def normalized(p: PathPoint):
        a, b = p.dq1 / _normalizer(p.x1), p.dq2 / _normalizer(p.x2)
        return np.array([a.real, a.imag, b.real, b.imag, p.lam])

    s0 = s_values[0]
    cur = attempt(s0, start.dq1, start.dq2, start.lam)
    if cur is None:
        return out
    out[0] = cur
    prev = None
    h = first_step
    for i in range(1, len(s_values)):
        target = s_values[i]
        while cur.s < target - 1e-15:
            step = min(h, target - cur.s)
            s_new = cur.s + step
            w = normalized(cur)
            if prev is not None:
                w = w + (w - normalized(prev)) * step / (cur.s - prev.s)
            x1, x2 = pair_at(s_new)
            dq1 = complex(w[0], w[1]) * _normalizer(complex(x1))
            dq2 = complex(w[2], w[3]) * _normalizer(complex(x2))
            nxt = attempt(s_new, dq1, dq2, min(max(w[4], 1e-6), 1 - 1e-6))
            if nxt is None:
                h = step / 2
                if h < min_step:
                    return out
                continue
            prev, cur = cur, nxt
            h = min(2 * step, max_step)
        out[i] = cur
    return out


def joint_from_seed(x1, x2, fiber: FiberParams, seed: JointSeed, tol: float = DEFAULT_TOL, with_trajectory=True):
    """Polish one seed into a full :class:`JointSolution` (no fallbacks)."""
    return solve_joint(x1, x2, fiber, seeds=[seed], tol=tol, with_trajectory=with_trajectory, continuation=False)
