"""Adversarial distance: closed forms, bounds, the exact joint solve and the
min-max decomposition, plus the dimensionless change of units.

The distance is invariant under a common rotation of both points and under
swapping them, so every pair is reduced to ``x1 = r1 > 0`` with
``r1 >= |x2|`` before solving.  The exact solver follows the joint solution
along the relative phase, starting from the known purely radial solution at
the phase ``phi*`` where the distance equals the radial distance, and keeps
the cheapest of the two directions around the circle.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import eulag
from ._polar import min_max_spiral, spiral_effort, wrap_angle
from .channel import FiberParams
from .errors import BothZero, NoConvergence, SandwichViolation, ZeroGamma

METHODS = ("closed_form", "joint_bvp", "decomposition", "approximation")
# the phase sweep follows each direction this far past phi*
SWEEP_SPAN = 1.25 * math.pi
# radii closer than this (relative) start from a slightly split pair
EQUAL_RADII = 1e-3
# relative slack on the bounds check: the bounds are exact, the solves are not
SANDWICH_SLACK = 1e-7
DECOMP_GRID = 12
DECOMP_ANGLES = 32
DECOMP_RESTARTS = 3
DECOMP_MAXFEV = 150


@dataclass
class DistanceResult:
    value: float
    method: str
    lower_bound: float = float("nan")
    upper_bound: float = float("nan")
    witness: eulag.JointSolution | None = field(default=None, repr=False)
    meeting_point: complex | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")


def distance_from_origin(x, fiber: FiberParams) -> float:
    return abs(complex(x)) ** 2 / (4.0 * fiber.length_km)


def radial_distance(x1, x2, fiber: FiberParams) -> float:
    """``(|x1| - |x2|)^2 / 4L``; also the lower bound on the distance."""
    return (abs(complex(x1)) - abs(complex(x2))) ** 2 / (4.0 * fiber.length_km)


def phi_star(r1: float, r2: float, fiber: FiberParams) -> float:
    """Relative phase ``arg x2 - arg x1`` at which the distance is radial (not wrapped)."""
    return 0.5 * fiber.length_km * fiber.gamma * (r1 * r1 - r2 * r2)


def upper_bound(x1, x2, fiber: FiberParams, with_point: bool = False):
    """Best constant-modulus-control bound: min over y of max_k effort(x_k -> y)."""
    x1, x2 = complex(x1), complex(x2)
    if x1 == 0 and x2 == 0:
        raise BothZero("upper bound undefined for two zero points")
    if x1 == x2:
        return (0.0, x1) if with_point else 0.0
    value, y = min_max_spiral(x1, x2, fiber.gamma, fiber.length_km)
    return (value, y) if with_point else value


# -- phase sweep ----------------------------------------------------------------


def _radial_seed(r1: float, x2: complex, fiber: FiberParams) -> eulag.JointSeed:
    """Exact solution at the radial phase: both radii move linearly to their mean."""
    L, g = fiber.length_km, fiber.gamma
    r2 = abs(x2)
    rho = 0.5 * (r1 + r2)
    dq1 = 1j * g * r1 * r1 * r1 + (rho - r1) / L
    dq2 = 1j * g * r2 * r2 * x2 + (rho - r2) / L * (x2 / r2)
    return eulag.JointSeed("radial", dq1, dq2, 0.5)


def _track_phase(r1, r2, fiber, start_t, start_seed, targets, tol, sign):
    """Track along ``t`` from ``start_t`` outwards to every target on one side.

    ``targets`` are offsets from phi*; returns {target: PathPoint}.
    """
    base = phi_star(r1, r2, fiber)

    def pair(s):
        return r1, r2 * cmath.exp(1j * (base + sign * s))

    out = {}
    up = sorted({t for t in targets if sign * t >= sign * start_t - 1e-15}, key=lambda t: sign * t)
    down = sorted({t for t in targets if sign * t < sign * start_t - 1e-15}, key=lambda t: -sign * t)
    if up:
        svals = [sign * start_t] + [sign * t for t in up]
        pts = eulag.track_joint(pair, svals, start_seed, fiber, tol)
        out.update({t: p for t, p in zip(up, pts[1:]) if p is not None})
    if down:
        # walk back towards phi*; reparametrize so the tracker still sees increasing s
        def pair_back(s):
            return pair(sign * start_t - s)

        svals = [0.0] + [sign * start_t - sign * t for t in down]
        pts = eulag.track_joint(pair_back, svals, start_seed, fiber, tol)
        out.update({t: p for t, p in zip(down, pts[1:]) if p is not None})
    return out


def _near_equal_start(r1, r2, fiber, sign, tol):
    """Start point for nearly equal radii, away from the coincident pair.

    Tracks a pair with ``r2`` pulled down by ``EQUAL_RADII`` to a quarter turn,
    then moves the radius back to ``r2`` at fixed absolute phase.
    Returns ``(t, seed)`` with ``t`` measured from phi*(r1, r2), or None.
    """
    r2s = r1 * (1.0 - EQUAL_RADII) if r2 > r1 * (1.0 - EQUAL_RADII) else r2
    base_s = phi_star(r1, r2s, fiber)
    x2s = r2s * cmath.exp(1j * base_s)
    quarter = 0.5 * math.pi

    def pair(s):
        return r1, r2s * cmath.exp(1j * (base_s + sign * s))

    p = eulag.track_joint(pair, [0.0, quarter], _radial_seed(r1, x2s, fiber), fiber, tol)[-1]
    if p is None:
        return None
    ang = base_s + sign * quarter

    def grow(s):
        return r1, (r2s + s * (r2 - r2s)) * cmath.exp(1j * ang)

    q = eulag.track_joint(grow, [0.0, 1.0], p.seed(), fiber, tol, first_step=0.02, max_step=0.05)[-1]
    if q is None:
        return None
    return ang - phi_star(r1, r2, fiber), q.seed("phase")


def phase_sweep(r1: float, r2: float, offsets, fiber: FiberParams, tol: float = eulag.DEFAULT_TOL):
    """Joint solutions for ``x1 = r1`` and ``x2 = r2 exp(i (phi* + t))`` for each ``t``.

    ``offsets`` are wrapped into [-pi, pi).  For each one the cheaper of the
    two directions around the circle is kept (each direction is followed up
    to ``SWEEP_SPAN``).  Requires ``r1 >= r2 > 0``.  Returns a list of
    :class:`eulag.PathPoint` (None where neither direction converged).
    """
    if not (r1 >= r2 > 0):
        raise ValueError("phase_sweep needs r1 >= r2 > 0")
    offs = [float(wrap_angle(t)) for t in offsets]
    near_equal = r2 > r1 * (1.0 - EQUAL_RADII)
    best: list[eulag.PathPoint | None] = [None] * len(offs)
    for sign in (1.0, -1.0):
        # the same relative phase reached going this way round
        wanted = {}
        for i, t in enumerate(offs):
            for cand in (t, t + 2 * math.pi, t - 2 * math.pi):
                if 0.0 <= sign * cand <= SWEEP_SPAN and not (near_equal and cand == 0.0):
                    wanted.setdefault(cand, []).append(i)
        if not wanted:
            continue
        if near_equal:
            start = _near_equal_start(r1, r2, fiber, sign, tol)
            if start is None:
                continue
            t0, seed = start
        else:
            t0, seed = 0.0, _radial_seed(r1, r2 * cmath.exp(1j * phi_star(r1, r2, fiber)), fiber)
        found = _track_phase(r1, r2, fiber, t0, seed, list(wanted), tol, sign)
        for cand, p in found.items():
            for i in wanted[cand]:
                if best[i] is None or p.effort < best[i].effort:
                    best[i] = p
    return best


# -- exact distance -------------------------------------------------------------


def _canonical(x1: complex, x2: complex):
    """Rotate/swap so that ``x1`` is real positive with the larger modulus."""
    swapped = abs(x2) > abs(x1)
    if swapped:
        x1, x2 = x2, x1
    rot = x1 / abs(x1)
    return abs(x1), x2 / rot, rot, swapped


def _restore(sol: eulag.JointSolution, rot: complex, swapped: bool) -> eulag.JointSolution:
    def turn(traj):
        ctl = type(traj.control)(traj.control.samples * rot, traj.control.grid_step)
        return type(traj)(traj.z, traj.q * rot, ctl)

    t1, t2 = turn(sol.traj1), turn(sol.traj2)
    lam = sol.lam
    res = sol.residuals.copy()
    c_end = sol.c_end
    if swapped:
        t1, t2 = t2, t1
        lam = 1.0 - lam
        c_end = -c_end
    return eulag.JointSolution(
        traj1=t1, traj2=t2, lam=lam, effort=sol.effort, residual_norm=sol.residual_norm,
        meeting_point=sol.meeting_point * rot, residuals=res, c_end=c_end, branch=sol.branch,
    )


def _within_bounds(value: float, lower: float, upper: float) -> bool:
    slack = SANDWICH_SLACK * max(abs(upper), abs(value))
    return lower - slack <= value <= upper + slack


def exact_distance(
    x1,
    x2,
    fiber: FiberParams,
    tol: float = eulag.DEFAULT_TOL,
    with_witness: bool = True,
    use_seeds: bool = True,
) -> DistanceResult:
    """Adversarial distance from the joint boundary-value problem.

    Candidates come from the phase sweep and (with ``use_seeds``) from the
    analytic seed families; the cheapest accepted solution wins.  When no
    candidate converges, or the winner violates the analytic bounds, the
    min-max decomposition is used instead.
    """
    x1, x2 = complex(x1), complex(x2)
    if x1 == x2:
        return DistanceResult(0.0, "closed_form", 0.0, 0.0)
    lower = radial_distance(x1, x2, fiber)
    upper = upper_bound(x1, x2, fiber)
    r1, z2, rot, swapped = _canonical(x1, x2)

    cands = []
    if abs(z2) > 0 and fiber.gamma > 0:
        t = float(wrap_angle(cmath.phase(z2) - phi_star(r1, abs(z2), fiber)))
        p = phase_sweep(r1, abs(z2), [t], fiber, tol)[0]
        if p is not None:
            cands.append((p.effort, p.seed(), None))
    if use_seeds or not cands:
        try:
            sol = eulag.solve_joint(r1, z2, fiber, tol=tol, with_trajectory=with_witness)
            cands.append((sol.effort, None, sol))
        except NoConvergence:
            pass

    cands.sort(key=lambda c: c[0])
    for effort, seed, sol in cands:
        if not _within_bounds(effort, lower, upper):
            continue
        if sol is None:
            try:
                sol = eulag.joint_from_seed(r1, z2, fiber, seed, tol, with_trajectory=with_witness)
            except NoConvergence:
                continue
        sol = _restore(sol, rot, swapped)
        return DistanceResult(
            sol.effort, "joint_bvp", lower, upper, sol if with_witness else None, sol.meeting_point
        )

    res = decompose_distance(x1, x2, fiber, tol)
    if not _within_bounds(res.value, lower, upper):
        raise SandwichViolation(
            f"d={res.value:.6g} outside [{lower:.6g}, {upper:.6g}] for x1={x1}, x2={x2}"
        )
    return res


# -- decomposition ----------------------------------------------------------------


class _EffortField:
    """``y -> max_k E(x_k -> y)`` with warm starts from the nearest evaluated point."""

    def __init__(self, x1, x2, fiber, tol):
        self.xs = (x1, x2)
        self.fiber = fiber
        self.tol = tol
        self.ys: list[complex] = []
        self.slopes: list[tuple] = []
        self.values: list[float] = []

    def add(self, y: complex, efforts, slopes):
        self.ys.append(y)
        self.slopes.append(tuple(slopes))
        self.values.append(max(efforts))

    def _efforts(self, y: complex):
        warm = [[], []]
        if self.ys:
            d = np.abs(np.asarray(self.ys) - y)
            for j in np.argsort(d)[:2]:
                for k in (0, 1):
                    if self.slopes[j][k] is not None:
                        warm[k].append(self.slopes[j][k])
        out, slopes = [], []
        for k, x in enumerate(self.xs):
            sol = None
            for cold in ((False, True) if warm[k] else (True,)):
                try:
                    sol = eulag.solve_effort(
                        x, y, self.fiber, seeds=warm[k], tol=self.tol,
                        with_trajectory=False, spiral_seeds=cold,
                    )
                    break
                except NoConvergence:
                    continue
            if sol is None:
                # the constant-modulus control is always feasible
                out.append(float(spiral_effort(x, y, self.fiber.gamma, self.fiber.length_km)))
                slopes.append(None)
            else:
                out.append(sol.effort)
                slopes.append(sol.slope)
        return out, slopes

    def __call__(self, y: complex) -> float:
        e, slopes = self._efforts(y)
        self.add(y, e, slopes)
        return max(e)


def _ring_efforts(x: complex, rho: float, psi: np.ndarray, fiber: FiberParams, tol: float):
    """Efforts from ``x`` to the ring ``rho * exp(i psi)`` (``psi`` evenly spaced).

    Starts at the grid angle nearest the drift-only arrival angle and
    continues around the ring both ways, keeping the cheaper branch.
    """
    n = psi.size
    L, g = fiber.length_km, fiber.gamma
    r = abs(x)
    natural = (cmath.phase(x) if r > 0 else 0.0) + g * L * (r * r + r * rho + rho * rho) / 3.0
    j0 = int(np.argmin(np.abs(wrap_angle(psi - natural))))
    reach = int(math.ceil(SWEEP_SPAN / (2 * math.pi) * n))
    E = np.full(n, np.inf)
    slopes: list = [None] * n
    for step in (1, -1):
        prev = None
        for m in range(reach + 1):
            j = (j0 + step * m) % n
            y = rho * cmath.exp(1j * psi[j])
            sol = None
            for seeds, cold in (([prev], False), (None, True)):
                if seeds == [None]:
                    continue
                try:
                    sol = eulag.solve_effort(
                        x, y, fiber, seeds=seeds, tol=tol, with_trajectory=False, spiral_seeds=cold
                    )
                    break
                except NoConvergence:
                    continue
            prev = None if sol is None else sol.slope
            if sol is not None and sol.effort < E[j]:
                E[j], slopes[j] = sol.effort, sol.slope
    return E, slopes


def decompose_distance(x1, x2, fiber: FiberParams, tol: float = eulag.DEFAULT_TOL) -> DistanceResult:
    """Distance as ``min_y max_k E(x_k -> y)``, solving only single-trajectory problems.

    Each effort is tabulated on a polar grid of meeting points by
    continuation around rings, then Nelder-Mead is restarted from the best
    few grid points (and the best constant-modulus meeting point).
    """
    x1, x2 = complex(x1), complex(x2)
    if x1 == x2:
        raise ValueError("decompose_distance needs distinct points")
    lower = radial_distance(x1, x2, fiber)
    upper, ystar = upper_bound(x1, x2, fiber, with_point=True)
    field_ = _EffortField(x1, x2, fiber, tol)

    rmax = 1.25 * max(abs(x1), abs(x2))
    radii = np.linspace(rmax / DECOMP_GRID, rmax, DECOMP_GRID)
    psi = np.linspace(-math.pi, math.pi, DECOMP_ANGLES, endpoint=False)
    for rho in radii:
        rows = [_ring_efforts(x, rho, psi, fiber, tol) for x in (x1, x2)]
        for j in range(psi.size):
            e = [rows[0][0][j], rows[1][0][j]]
            if np.all(np.isfinite(e)):
                field_.add(rho * cmath.exp(1j * psi[j]), e, (rows[0][1][j], rows[1][1][j]))
    for y in (ystar, 0.5 * (x1 + x2)):
        field_(y)

    order = np.argsort(field_.values)
    starts = [ystar]
    for j in order:
        y = field_.ys[j]
        if all(abs(y - s) > 1e-3 * rmax for s in starts):
            starts.append(y)
        if len(starts) == DECOMP_RESTARTS + 1:
            break

    scale = max(rmax, 1e-300)
    best_val, best_y = min(zip(field_.values, field_.ys), key=lambda t: t[0])
    for y0 in starts:
        res = minimize(
            lambda v: field_(complex(v[0], v[1]) * scale),
            [y0.real / scale, y0.imag / scale],
            method="Nelder-Mead",
            options={"xatol": 1e-6, "fatol": 1e-7 * max(best_val, 1e-300), "maxfev": DECOMP_MAXFEV,
                     "initial_simplex": _simplex(y0 / scale, 0.5 / DECOMP_GRID)},
        )
        if res.fun < best_val:
            best_val, best_y = float(res.fun), complex(res.x[0], res.x[1]) * scale
    if not np.isfinite(best_val):
        raise NoConvergence(f"decomposition failed for x1={x1}, x2={x2}")
    return DistanceResult(best_val, "decomposition", lower, upper, None, best_y)


def _simplex(c: complex, h: float):
    return np.array([[c.real, c.imag], [c.real + h, c.imag], [c.real, c.imag + h]])


# -- dimensionless units ----------------------------------------------------------


@dataclass(frozen=True)
class NormalizedUnits:
    """Amplitude scale ``sqrt(gamma L)`` and distance scale ``L^2 gamma``."""

    scale_amplitude: float
    scale_distance: float


def to_normalized(fiber: FiberParams) -> NormalizedUnits:
    if fiber.gamma == 0:
        raise ZeroGamma("normalized units need gamma > 0")
    L, g = fiber.length_km, fiber.gamma
    return NormalizedUnits(math.sqrt(g * L), L * L * g)


def normalize_point(x, units: NormalizedUnits) -> complex:
    return complex(x) * units.scale_amplitude


def denormalize_point(x, units: NormalizedUnits) -> complex:
    return complex(x) / units.scale_amplitude


def normalize_distance(d: float, units: NormalizedUnits) -> float:
    return d * units.scale_distance


def denormalize_distance(d_norm: float, units: NormalizedUnits) -> float:
    return d_norm / units.scale_distance


UNIT_FIBER = FiberParams(1.0, 1.0)


def normalized_distance(x1, x2, fiber: FiberParams, **kw) -> float:
    """Distance computed on the unit fiber (L = gamma = 1) and mapped back."""
    u = to_normalized(fiber)
    d = exact_distance(normalize_point(x1, u), normalize_point(x2, u), UNIT_FIBER, **kw).value
    return denormalize_distance(d, u)
