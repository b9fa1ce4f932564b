"""Peak-power constellation design for the adversarial distance.

Max-min designs come from threshold graphs: keep the pairs at distance at
least ``d_th`` and look for a clique of the wanted size; ``d_th`` is bisected
over the sorted distinct distances.  Large constellations are refined by
greedy coordinate moves under the approximate distance.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import approx as apx
from . import distance as dist
from . import eulag
from .channel import FiberParams
from .errors import FiberDistError, Infeasible, NoConvergence

SOURCES = ("exact", "approximation")
PEAK_POWER = 0.05**2
REFINE_START_STEP = 0.05  # first move, as a fraction of sqrt(peak_power)
REFINE_STOP_STEP = 1e-5
NODE_LIMIT = 20_000  # branch nodes per threshold test in design_max_min


@dataclass
class Constellation:
    points: np.ndarray
    peak_power: float
    fiber: FiberParams
    min_distance: float | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=complex).ravel()
        if np.any(np.abs(self.points) ** 2 > self.peak_power * (1 + 1e-12)):
            raise ValueError("a point violates the peak-power constraint")
        if np.unique(self.points).size != self.points.size:
            raise ValueError("constellation points must be distinct")

    def __len__(self):
        return self.points.size


@dataclass(frozen=True)
class PolarGrid:
    radii: tuple
    phases_per_radius: int
    include_origin: bool = False

    @property
    def phases(self) -> np.ndarray:
        return -math.pi + 2 * math.pi * np.arange(self.phases_per_radius) / self.phases_per_radius

    @property
    def points(self) -> np.ndarray:
        ring = np.array([r * np.exp(1j * self.phases) for r in self.radii]).ravel()
        return np.concatenate([[0j], ring]) if self.include_origin else ring


@dataclass
class DistanceMatrix:
    labels: np.ndarray
    values: np.ndarray
    source: str
    n_solves: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")


def polar_grid(n_radii: int, r_max: float, n_phases: int, include_origin: bool = False) -> PolarGrid:
    if n_radii < 1 or n_phases < 1 or not r_max > 0:
        raise ValueError("need n_radii >= 1, n_phases >= 1, r_max > 0")
    radii = tuple(k * r_max / n_radii for k in range(1, n_radii + 1))
    return PolarGrid(radii, n_phases, include_origin)


# -- distance matrices ----------------------------------------------------------


def _ring_pair(args):
    """Distances from ``r_i`` to ``r_j * exp(i m dphi)`` for every phase offset ``m``.

    The sweep result is checked against the bounds and replaced by a full
    exact solve where it fails or falls outside them.
    """
    i, j, ri, rj, n_phases, fiber, tol = args
    offs = 2 * math.pi * np.arange(n_phases) / n_phases
    out = np.zeros(n_phases)
    hi, lo = max(ri, rj), min(ri, rj)
    sign = 1.0 if ri >= rj else -1.0
    pts = dist.phase_sweep(hi, lo, [sign * o - dist.phi_star(hi, lo, fiber) for o in offs], fiber, tol)
    solves = 1
    for m, p in enumerate(pts):
        if i == j and m == 0:
            continue
        x1, x2 = hi, lo * np.exp(1j * sign * offs[m])
        lower = dist.radial_distance(hi, lo, fiber)
        if p is not None and dist._within_bounds(p.effort, lower, dist.upper_bound(x1, x2, fiber)):
            out[m] = p.effort
            continue
        try:
            out[m] = dist.exact_distance(x1, x2, fiber, tol, with_witness=False).value
            solves += 1
        except (FiberDistError, NoConvergence) as exc:
            raise FiberDistError(f"distance cell (r1={ri!r}, r2={rj!r}, offset={offs[m]!r}) failed: {exc}") from exc
    return i, j, out, solves


def distance_matrix(
    grid: PolarGrid,
    fiber: FiberParams,
    source: str = "exact",
    table: apx.ApproxTable | None = None,
    tol: float = eulag.DEFAULT_TOL,
    workers: int = 1,
    progress=None,
) -> DistanceMatrix:
    """Pairwise distances on a polar grid.

    Only the distinct (radius, radius, phase offset) cells are computed; the
    rest follows from rotation and swap symmetry.
    """
    if source not in SOURCES:
        raise ValueError(f"unknown source {source!r}")
    pts = grid.points
    if source == "approximation":
        if table is None:
            raise ValueError("the approximation source needs an ApproxTable")
        D = apx.approx_distance_many(pts[:, None], pts[None, :], table)
        np.fill_diagonal(D, 0.0)
        D = 0.5 * (D + D.T)
        return DistanceMatrix(pts, D, source, 0)

    radii, P = grid.radii, grid.phases_per_radius
    nr = len(radii)
    # cell[i][j][m] = d(r_i e^{i a}, r_j e^{i (a + m dphi)})
    cell = np.zeros((nr, nr, P))
    jobs = [(i, j, radii[i], radii[j], P, fiber, tol) for i in range(nr) for j in range(i, nr)]
    solves = 0
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_ring_pair, jobs))
    else:
        results = []
        for k, job in enumerate(jobs):
            results.append(_ring_pair(job))
            if progress:
                progress(k + 1, len(jobs))
    for i, j, row, s in results:
        cell[i, j] = row
        cell[j, i] = row[(-np.arange(P)) % P]
        solves += s

    n = len(pts)
    D = np.zeros((n, n))
    off = 1 if grid.include_origin else 0
    idx_r = np.repeat(np.arange(nr), P)
    idx_p = np.tile(np.arange(P), nr)
    m = (idx_p[None, :] - idx_p[:, None]) % P
    D[off:, off:] = cell[idx_r[:, None], idx_r[None, :], m]
    if grid.include_origin:
        D[0, off:] = D[off:, 0] = np.array(radii)[idx_r] ** 2 / (4.0 * fiber.length_km)
    # swapped entries come from different sweeps; average out the solver noise
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return DistanceMatrix(pts, D, "exact", solves)


# -- cliques --------------------------------------------------------------------


def _bits(adj: np.ndarray):
    n = adj.shape[0]
    return [sum(1 << int(k) for k in np.flatnonzero(adj[v])) for v in range(n)]


def _colour_bound(cand: int, nbrs):
    """Greedy colouring of ``cand``; returns vertices with their colour number."""
    order, colours = [], []
    colour = 0
    uncol = cand
    while uncol:
        colour += 1
        avail = uncol
        while avail:
            v = (avail & -avail).bit_length() - 1
            avail &= ~(1 << v)
            avail &= ~nbrs[v]
            uncol &= ~(1 << v)
            order.append(v)
            colours.append(colour)
    return order, colours


class _NodeLimit(Exception):
    pass


def _find_clique(cand: int, need: int, nbrs, budget=None):
    """A clique of ``need`` vertices inside bitset ``cand``, or None.

    ``budget`` is a one-element list counting down the allowed branch nodes;
    :class:`_NodeLimit` is raised when it runs out.
    """
    if need <= 0:
        return []
    if cand.bit_count() < need:
        return None
    if budget is not None:
        budget[0] -= 1
        if budget[0] < 0:
            raise _NodeLimit
    order, colours = _colour_bound(cand, nbrs)
    for k in range(len(order) - 1, -1, -1):
        if colours[k] < need:
            return None
        v = order[k]
        sub = _find_clique(cand & nbrs[v], need - 1, nbrs, budget)
        if sub is not None:
            return [v] + sub
        cand &= ~(1 << v)
    return None


def _has_clique(cand: int, need: int, nbrs) -> bool:
    """Whether the vertices in bitset ``cand`` contain a clique of size ``need``."""
    return _find_clique(cand, need, nbrs) is not None


def _max_clique_size(cand: int, nbrs) -> int:
    best = [0]

    def expand(c, size):
        if not c:
            best[0] = max(best[0], size)
            return
        order, colours = _colour_bound(c, nbrs)
        for k in range(len(order) - 1, -1, -1):
            if size + colours[k] <= best[0]:
                return
            v = order[k]
            expand(c & nbrs[v], size + 1)
            c &= ~(1 << v)

    expand(cand, 0)
    return best[0]


def _first_clique(cand: int, size: int, nbrs) -> list[int]:
    """Lexicographically smallest clique of ``size`` inside ``cand`` (assumed to exist)."""
    chosen = []
    while len(chosen) < size:
        rest = cand
        while rest:
            v = (rest & -rest).bit_length() - 1
            rest &= ~(1 << v)
            if _has_clique(cand & nbrs[v], size - len(chosen) - 1, nbrs):
                chosen.append(v)
                cand &= nbrs[v]
                break
        else:  # pragma: no cover - guarded by the caller
            raise Infeasible("no clique of the requested size")
    return chosen


def max_clique(adjacency) -> list[int]:
    """Exact maximum clique (branch and bound with colouring bounds).

    Among maximum cliques the lexicographically smallest sorted vertex list
    is returned.
    """
    adj = np.asarray(adjacency, dtype=bool)
    n = adj.shape[0]
    if adj.shape != (n, n) or not np.array_equal(adj, adj.T) or adj.diagonal().any():
        raise ValueError("adjacency must be square, symmetric, with a false diagonal")
    if n == 0:
        return []
    nbrs = _bits(adj)
    full = (1 << n) - 1
    return _first_clique(full, _max_clique_size(full, nbrs), nbrs)


def design_max_min(
    matrix: DistanceMatrix, size: int, peak_power: float = PEAK_POWER, fiber=None, node_limit=NODE_LIMIT
):
    """Largest threshold admitting ``size`` points pairwise at least that far apart.

    The threshold is bisected over the distinct positive distances.  Each
    level is tested by branch and bound; with ``node_limit`` set, a test
    that runs out of nodes counts as infeasible, so the returned threshold
    is still attained by the returned points but may not be the optimum
    (a RuntimeWarning says so).  Returns ``(Constellation, threshold)``.
    """
    D = np.asarray(matrix.values, dtype=float)
    n = D.shape[0]
    if size < 2 or size > n:
        raise ValueError(f"size must be in [2, {n}]")
    iu = np.triu_indices(n, 1)
    levels = np.unique(D[iu])
    levels = levels[levels > 0]
    full = (1 << n) - 1
    certified = True

    def clique_at(k, limit):
        nonlocal certified
        adj = D >= levels[k]
        np.fill_diagonal(adj, False)
        try:
            return _find_clique(full, size, _bits(adj), None if limit is None else [limit])
        except _NodeLimit:
            certified = False
            return None

    # the lowest level decides feasibility, so it is always searched to the end
    best = clique_at(0, None) if levels.size else None
    if best is None:
        raise Infeasible(f"no {size}-point set at any positive threshold")
    lo, hi = 0, levels.size - 1
    while lo < hi:
        # the clique found may already clear a higher level than the one tested
        attained = np.min(D[np.ix_(best, best)][np.triu_indices(size, 1)])
        lo = max(lo, int(np.searchsorted(levels, attained, side="right")) - 1)
        if lo >= hi:
            break
        mid = (lo + hi + 1) // 2
        found = clique_at(mid, node_limit)
        if found is not None:
            best, lo = found, mid
        else:
            hi = mid - 1
    if not certified:
        warnings.warn("clique search hit its node limit; the threshold is a lower bound", RuntimeWarning)
    chosen = sorted(best)
    c = Constellation(np.asarray(matrix.labels)[chosen], peak_power, fiber)
    c.min_distance = float(np.min(D[np.ix_(chosen, chosen)][np.triu_indices(size, 1)]))
    return c, c.min_distance


# -- metrics --------------------------------------------------------------------


def pairwise(points, fiber: FiberParams, source: str = "exact", table=None, tol=eulag.DEFAULT_TOL):
    pts = np.asarray(points, dtype=complex)
    n = pts.size
    if source == "approximation":
        D = apx.approx_distance_many(pts[:, None], pts[None, :], table)
        D = 0.5 * (D + D.T)
    elif source == "exact":
        D = np.zeros((n, n))
        for a in range(n):
            for b in range(a + 1, n):
                D[a, b] = D[b, a] = dist.exact_distance(pts[a], pts[b], fiber, tol, with_witness=False).value
    else:
        raise ValueError(f"unknown source {source!r}")
    np.fill_diagonal(D, 0.0)
    return D


def min_distance(c: Constellation, source: str = "exact", table=None, tol=eulag.DEFAULT_TOL) -> float:
    if len(c) < 2:
        raise ValueError("need at least 2 points")
    D = pairwise(c.points, c.fiber, source, table, tol)
    return float(np.min(D[np.triu_indices(len(c), 1)]))


def avg_power(c: Constellation) -> float:
    return float(np.mean(np.abs(c.points) ** 2))


def qam(size: int, peak_power: float, fiber: FiberParams) -> Constellation:
    """Square QAM scaled so the corner points sit at the peak power."""
    side = int(round(math.sqrt(size)))
    if side * side != size:
        raise ValueError("QAM size must be a perfect square")
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    lattice = (levels[None, :] + 1j * levels[:, None]).ravel()
    scale = math.sqrt(peak_power) / (abs(levels[-1]) * math.sqrt(2.0))
    return Constellation(lattice * scale, peak_power, fiber)


# -- greedy refinement ----------------------------------------------------------


def _moves(p: complex, step: float):
    r = abs(p)
    yield p + step * (p / r if r > 0 else 1.0)
    if r > step:
        yield p - step * p / r
    if r > 0:
        for s in (1.0, -1.0):
            yield p * np.exp(1j * s * step / r)


def _refine_points(pts: np.ndarray, dfun, peak_power: float, start_step: float, stop_step: float):
    pts = pts.copy()
    n = pts.size
    D = dfun(pts[:, None], pts[None, :])
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, np.inf)
    cap = math.sqrt(peak_power) * (1 + 1e-12)
    step = start_step
    while step >= stop_step:
        improved = True
        while improved:
            improved = False
            for k in range(n):
                current = D.min()
                # only points in a closest pair can raise the minimum
                if D[k].min() > current:
                    continue
                for cand in _moves(pts[k], step):
                    if abs(cand) > cap or np.any(cand == np.delete(pts, k)):
                        continue
                    row = 0.5 * (dfun(cand, pts) + dfun(pts, cand))
                    row[k] = np.inf
                    others = np.delete(np.delete(D, k, 0), k, 1)
                    new_min = min(row.min(), others.min() if others.size else np.inf)
                    if new_min > current:
                        pts[k] = cand
                        D[k, :] = D[:, k] = row
                        D[k, k] = np.inf
                        improved = True
                        break
        step *= 0.5
    return pts, float(D.min())


def greedy_refine(
    initial: Constellation,
    table: apx.ApproxTable,
    start_step: float = REFINE_START_STEP,
    stop_step: float = REFINE_STOP_STEP,
) -> Constellation:
    """Coordinate ascent on the minimum approximate distance.

    Points are moved one at a time by ``+-step`` radially or along the
    circle; a move is kept only if the minimum distance strictly increases
    and the peak constraint holds.  The step (relative to
    ``sqrt(peak_power)``) halves after a pass without improvement.
    """
    unit = math.sqrt(initial.peak_power)

    def dfun(a, b):
        return apx.approx_distance_many(a, b, table)

    pts, dmin = _refine_points(initial.points, dfun, initial.peak_power, start_step * unit, stop_step * unit)
    out = Constellation(pts, initial.peak_power, initial.fiber)
    out.min_distance = dmin
    return out


def random_constellation(size: int, peak_power: float, fiber: FiberParams, rng) -> Constellation:
    """Points uniform over the disk ``|x|^2 <= peak_power``."""
    r = math.sqrt(peak_power) * np.sqrt(rng.uniform(size=size))
    return Constellation(r * np.exp(1j * rng.uniform(-math.pi, math.pi, size)), peak_power, fiber)


def _refine_trial(args):
    size, peak_power, table, seed = args
    rng = np.random.default_rng(seed)
    return greedy_refine(random_constellation(size, peak_power, table.fiber, rng), table)


def best_of_refinements(
    size: int,
    table: apx.ApproxTable,
    trials: int,
    seed: int = 0,
    peak_power: float = PEAK_POWER,
    workers: int = 1,
) -> Constellation:
    """Greedy refinement from ``trials`` random starts; keeps the best (first on ties)."""
    seeds = np.random.SeedSequence(seed).spawn(trials)
    jobs = [(size, peak_power, table, s) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_refine_trial, jobs))
    else:
        results = [_refine_trial(j) for j in jobs]
    return max(results, key=lambda c: c.min_distance)


# -- file I/O -------------------------------------------------------------------


def save_constellation(c: Constellation, path) -> None:
    doc = {
        "fiber": {"L_km": c.fiber.length_km, "gamma": c.fiber.gamma},
        "peak_power": c.peak_power,
        "points": [{"re": float(p.real), "im": float(p.imag)} for p in c.points],
    }
    if c.min_distance is not None:
        doc["min_distance"] = c.min_distance
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_constellation(path) -> Constellation:
    with open(path) as fh:
        doc = json.load(fh)
    fiber = FiberParams(float(doc["fiber"]["L_km"]), float(doc["fiber"]["gamma"]))
    pts = [complex(p["re"], p["im"]) for p in doc["points"]]
    c = Constellation(pts, float(doc["peak_power"]), fiber)
    c.min_distance = doc.get("min_distance")
    return c
