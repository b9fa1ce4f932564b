"""Fast distance approximation ``d_R(r1, r2) + A(r1, r2) sin^2((phi - phi*) / 2)``.

``A`` is the excess over the radial distance at the worst relative phase
``phi* - pi``; it is tabulated on a square radius grid from exact solves and
bilinearly interpolated in between.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import distance as dist
from . import eulag
from .channel import FiberParams
from .distance import phi_star, radial_distance
from .errors import FiberDistError, NoConvergence, OutOfRange

DEFAULT_RADII = 26
DEFAULT_RMAX = 0.05
WORST_ANGLE_SAMPLES = 8
WORST_ANGLE_PAIRS = 5


@dataclass
class ApproxTable:
    radii: np.ndarray
    values: np.ndarray
    fiber: FiberParams
    _interp: RegularGridInterpolator = field(init=False, repr=False)

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        n = self.radii.size
        if n < 2 or np.any(np.diff(self.radii) <= 0):
            raise ValueError("radii must be strictly increasing with at least 2 entries")
        if self.values.shape != (n, n):
            raise ValueError(f"values must be {n}x{n}, got {self.values.shape}")
        if not np.array_equal(self.values, self.values.T):
            raise ValueError("table is not symmetric")
        if np.any(self.values < 0):
            raise ValueError("table has negative entries")
        self._interp = RegularGridInterpolator((self.radii, self.radii), self.values, method="linear")

    @property
    def r_max(self) -> float:
        return float(self.radii[-1])

    def A(self, r1, r2):
        """Bilinear interpolation of the table; raises OutOfRange beyond the grid."""
        r1 = np.asarray(r1, dtype=float)
        r2 = np.asarray(r2, dtype=float)
        hi = self.r_max * (1.0 + 1e-12)
        if np.any(r1 > hi) or np.any(r2 > hi) or np.any(r1 < self.radii[0]) or np.any(r2 < self.radii[0]):
            raise OutOfRange(f"radius outside table range [{self.radii[0]}, {self.r_max}]")
        pts = np.stack(np.broadcast_arrays(np.minimum(r1, self.r_max), np.minimum(r2, self.r_max)), axis=-1)
        out = self._interp(pts)
        return float(out[0]) if pts.ndim == 1 else out


def _worst_phase_distance(r1: float, r2: float, fiber: FiberParams, tol: float) -> float:
    """Exact distance at relative phase ``phi* - pi`` (radii in either order)."""
    if r1 == 0.0 or r2 == 0.0:
        return dist.distance_from_origin(max(r1, r2), fiber)
    hi, lo = max(r1, r2), min(r1, r2)
    p = dist.phase_sweep(hi, lo, [-math.pi], fiber, tol)[0]
    value = None if p is None else p.effort
    lower = radial_distance(hi, lo, fiber)
    x2 = lo * np.exp(1j * (phi_star(hi, lo, fiber) - math.pi))
    if value is None or not dist._within_bounds(value, lower, dist.upper_bound(hi, x2, fiber)):
        value = dist.exact_distance(hi, x2, fiber, tol, with_witness=False).value
    return value


def _cell(args):
    i, j, r1, r2, fiber, tol = args
    try:
        return i, j, _worst_phase_distance(r1, r2, fiber, tol) - radial_distance(r1, r2, fiber)
    except (FiberDistError, NoConvergence) as exc:
        raise FiberDistError(f"table cell (r1={r1!r}, r2={r2!r}) failed: {exc}") from exc


def build_table(
    fiber: FiberParams,
    radii=None,
    tol: float = eulag.DEFAULT_TOL,
    workers: int = 1,
    progress=None,
) -> ApproxTable:
    """Tabulate ``A`` on ``radii`` (default 26 points on [0, 0.05]).

    Each unordered pair is solved once (the distance is symmetric under
    swapping), then the matrix is symmetrized and clipped at zero.
    """
    radii = np.linspace(0.0, DEFAULT_RMAX, DEFAULT_RADII) if radii is None else np.asarray(radii, float)
    n = radii.size
    jobs = [(i, j, float(radii[i]), float(radii[j]), fiber, tol) for i in range(n) for j in range(i, n)]
    A = np.zeros((n, n))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = pool.map(_cell, jobs, chunksize=4)
            for k, (i, j, a) in enumerate(results):
                A[i, j] = A[j, i] = a
                if progress:
                    progress(k + 1, len(jobs))
    else:
        for k, job in enumerate(jobs):
            i, j, a = _cell(job)
            A[i, j] = A[j, i] = a
            if progress:
                progress(k + 1, len(jobs))
    A = np.maximum(0.5 * (A + A.T), 0.0)
    return ApproxTable(radii, A, fiber)


def check_worst_angle(
    fiber: FiberParams,
    r_max: float = DEFAULT_RMAX,
    n_pairs: int = WORST_ANGLE_PAIRS,
    n_angles: int = WORST_ANGLE_SAMPLES,
    seed: int = 0,
    tol: float = eulag.DEFAULT_TOL,
):
    """Sample ``n_angles`` relative phases at random radius pairs.

    Returns a list of ``(r1, r2, offset_of_max, ok)`` where ``ok`` means the
    largest sampled distance sits within one sample of ``phi* - pi``.
    """
    rng = np.random.default_rng(seed)
    offs = -math.pi + 2 * math.pi * np.arange(n_angles) / n_angles
    report = []
    for _ in range(n_pairs):
        r1, r2 = sorted(rng.uniform(0.1 * r_max, r_max, 2), reverse=True)
        pts = dist.phase_sweep(r1, r2, offs, fiber, tol)
        vals = np.array([np.nan if p is None else p.effort for p in pts])
        k = int(np.nanargmax(vals))
        ok = min(k, n_angles - k) <= 1
        report.append((float(r1), float(r2), float(offs[k]), ok))
    return report


def approx_distance(x1, x2, table: ApproxTable) -> float:
    x1, x2 = complex(x1), complex(x2)
    r1, r2 = abs(x1), abs(x2)
    a = float(table.A(r1, r2))
    rel = np.angle(x2) - np.angle(x1) - phi_star(r1, r2, table.fiber)
    return radial_distance(r1, r2, table.fiber) + a * math.sin(0.5 * rel) ** 2


def approx_distance_many(x1, x2, table: ApproxTable) -> np.ndarray:
    """Vectorized :func:`approx_distance` over broadcast arrays of points."""
    x1 = np.asarray(x1, dtype=complex)
    x2 = np.asarray(x2, dtype=complex)
    r1, r2 = np.abs(x1), np.abs(x2)
    L, g = table.fiber.length_km, table.fiber.gamma
    rel = np.angle(x2) - np.angle(x1) - 0.5 * L * g * (r1 * r1 - r2 * r2)
    return (r1 - r2) ** 2 / (4.0 * L) + table.A(r1, r2) * np.sin(0.5 * rel) ** 2


def save_table(table: ApproxTable, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r1", "r2", "A"])
        for i, r1 in enumerate(table.radii):
            for j, r2 in enumerate(table.radii):
                w.writerow([f"{r1:.9g}", f"{r2:.9g}", f"{table.values[i, j]:.9g}"])


def load_table(path, fiber: FiberParams) -> ApproxTable:
    """Read a table written by :func:`save_table`; checks grid completeness and symmetry."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["r1", "r2", "A"]:
        raise ValueError(f"{path}: expected header r1,r2,A")
    data = np.array([[float(c) for c in row] for row in rows[1:] if row], dtype=float)
    radii = np.unique(data[:, 0])
    n = radii.size
    if data.shape[0] != n * n or not np.array_equal(np.unique(data[:, 1]), radii):
        raise ValueError(f"{path}: rows do not form a complete {n}x{n} grid")
    steps = np.diff(radii)
    if np.ptp(steps) > 1e-6 * steps.mean():
        raise ValueError(f"{path}: radii are not evenly spaced")
    idx = {r: k for k, r in enumerate(radii)}
    A = np.full((n, n), np.nan)
    for r1, r2, a in data:
        A[idx[r1], idx[r2]] = a
    if np.isnan(A).any():
        raise ValueError(f"{path}: duplicate or missing cells")
    if not np.array_equal(A, A.T):
        raise ValueError(f"{path}: table is not symmetric")
    return ApproxTable(radii, A, fiber)
