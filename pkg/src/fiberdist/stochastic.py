"""Monte Carlo evaluation on the Gaussian-noise channel.

The fiber is cut into segments; each segment applies the exact Kerr
rotation and then adds a circular complex Gaussian of variance
``sigma2 * dz``.  Constellations are scored by symbol error rate (histogram
MAP or minimum-effort decoding) and by the plug-in mutual information of a
2-D output histogram.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.spatial import cKDTree

from . import eulag
from ._polar import spiral_effort
from .channel import FiberParams, propagate_noise_free
from .constellation import Constellation
from .errors import FiberDistError, NoConvergence, UntrainedDecoder

DEFAULT_BINS = 200
DEFAULT_TRIALS = 20_000
BOUNDS_MARGIN = 0.05
SEGMENT_BLOCK = 50
DECODERS = ("histogram_map", "adversarial_md")
SPIRAL_WINDINGS = (-1, 0, 1)


@dataclass(frozen=True)
class NoiseConfig:
    sigma2: float
    segment_km: float = 1.0

    def __post_init__(self):
        if not self.sigma2 >= 0:
            raise ValueError("sigma2 must be nonnegative")
        if not self.segment_km > 0:
            raise ValueError("segment_km must be positive")

    def segments(self, fiber: FiberParams) -> int:
        n = fiber.length_km / self.segment_km
        k = int(round(n))
        if k < 1 or abs(n - k) > 1e-9 * max(n, 1.0):
            raise ValueError(f"segment {self.segment_km} km does not divide L = {fiber.length_km} km")
        return k


def _streams(seed, n: int):
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.Philox(s)) for s in ss.spawn(n)]


@numba.njit(cache=True)
def _kerr_segments(q, w, gdz):
    """Rotate by ``exp(i gdz |q|^2)`` then add ``w[k]``, for each row ``k`` of ``w``."""
    for k in range(w.shape[0]):
        for t in range(q.size):
            a = q[t].real
            b = q[t].imag
            ph = gdz * (a * a + b * b)
            c = math.cos(ph)
            s = math.sin(ph)
            q[t] = complex(a * c - b * s + w[k, 0, t], a * s + b * c + w[k, 1, t])


def simulate(points, noise: NoiseConfig, fiber: FiberParams, trials: int, seed) -> np.ndarray:
    """Channel outputs, shape ``(len(points), trials)``.

    Point ``k`` draws its noise from its own Philox stream spawned from
    ``seed``, so results do not depend on how points are batched.
    """
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    nseg = noise.segments(fiber)
    dz = fiber.length_km / nseg
    gdz = fiber.gamma * dz
    out = np.repeat(pts[:, None], trials, axis=1)
    if noise.sigma2 == 0:
        return propagate_noise_free(out, fiber) if out.size else out
    std = math.sqrt(noise.sigma2 * dz / 2.0)
    for k, rng in enumerate(_streams(seed, pts.size)):
        q = out[k].copy()
        done = 0
        while done < nseg:
            blk = min(SEGMENT_BLOCK, nseg - done)
            w = rng.standard_normal((blk, 2, trials))
            w *= std
            _kerr_segments(q, w, gdz)
            done += blk
        out[k] = q
    return out


def simulate_once(x, noise: NoiseConfig, fiber: FiberParams, rng: np.random.Generator) -> complex:
    """One channel use, drawing from ``rng`` directly."""
    nseg = noise.segments(fiber)
    dz = fiber.length_km / nseg
    std = math.sqrt(noise.sigma2 * dz / 2.0)
    q = complex(x)
    for _ in range(nseg):
        q = q * complex(math.cos(fiber.gamma * dz * abs(q) ** 2), math.sin(fiber.gamma * dz * abs(q) ** 2))
        if std > 0:
            a, b = rng.standard_normal(2)
            q += std * complex(a, b)
    return q


# -- histogram decoder -------------------------------------------------------------


@dataclass
class Histogram2D:
    """Per-point output counts on an ``n x n`` grid over ``bounds``."""

    bounds: tuple  # (re_min, re_max, im_min, im_max)
    counts: np.ndarray  # (M, n, n)
    trials: int

    @property
    def bins(self) -> int:
        return self.counts.shape[1]

    def cell_of(self, y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Bin indices of ``y`` and a mask of samples inside the bounds."""
        y = np.asarray(y, dtype=complex)
        x0, x1, y0, y1 = self.bounds
        n = self.bins
        i = np.floor((y.real - x0) / (x1 - x0) * n).astype(np.int64)
        j = np.floor((y.imag - y0) / (y1 - y0) * n).astype(np.int64)
        inside = (i >= 0) & (i < n) & (j >= 0) & (j < n)
        return np.clip(i, 0, n - 1), np.clip(j, 0, n - 1), inside

    def centres(self):
        x0, x1, y0, y1 = self.bounds
        n = self.bins
        cx = x0 + (np.arange(n) + 0.5) * (x1 - x0) / n
        cy = y0 + (np.arange(n) + 0.5) * (y1 - y0) / n
        return cx[:, None] + 1j * cy[None, :]


def _bounds(samples: np.ndarray, margin: float = BOUNDS_MARGIN):
    re, im = samples.real, samples.imag
    lo_r, hi_r, lo_i, hi_i = re.min(), re.max(), im.min(), im.max()
    span = max(hi_r - lo_r, hi_i - lo_i, 1e-12)
    pad = margin * span
    return (lo_r - pad, hi_r + pad, lo_i - pad, hi_i + pad)


def histogram_from_samples(outputs: np.ndarray, bins: int = DEFAULT_BINS, bounds=None) -> Histogram2D:
    outputs = np.asarray(outputs, dtype=complex)
    M, trials = outputs.shape
    bounds = _bounds(outputs) if bounds is None else tuple(bounds)
    h = Histogram2D(bounds, np.zeros((M, bins, bins), dtype=np.int64), trials)
    for k in range(M):
        i, j, inside = h.cell_of(outputs[k])
        np.add.at(h.counts[k], (i[inside], j[inside]), 1)
    return h


def train_histogram(
    c: Constellation, noise: NoiseConfig, fiber: FiberParams, trials: int,
    bins: int = DEFAULT_BINS, rng_seed=0,
) -> Histogram2D:
    if trials < 1000:
        raise ValueError("training needs at least 1000 trials per point")
    return histogram_from_samples(simulate(c.points, noise, fiber, trials, rng_seed), bins)


class MapDecoder:
    """Label of each bin = point with the largest count there (lowest index on ties).

    Samples landing in empty bins or outside the grid take the label of the
    nearest populated bin centre.
    """

    def __init__(self, hist: Histogram2D):
        self.hist = hist
        total = hist.counts.sum(axis=0)
        self.labels = np.argmax(hist.counts, axis=0)
        populated = total > 0
        if not populated.any():
            raise UntrainedDecoder("histogram is empty")
        self.populated = populated
        centres = hist.centres()[populated]
        self._tree = cKDTree(np.column_stack([centres.real, centres.imag]))
        self._fallback = self.labels[populated]

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=complex)
        i, j, inside = self.hist.cell_of(y)
        ok = inside & self.populated[i, j]
        out = np.where(ok, self.labels[i, j], -1)
        miss = ~ok
        if miss.any():
            _, idx = self._tree.query(np.column_stack([y[miss].real, y[miss].imag]))
            out[miss] = self._fallback[idx]
        return out


def mutual_information(hist: Histogram2D, with_error: bool = False):
    """Plug-in mutual information (bits) for equiprobable inputs.

    With ``with_error`` also returns a delta-method standard error from the
    spread of the information density over all samples.
    """
    counts = hist.counts.reshape(hist.counts.shape[0], -1).astype(float)
    M = counts.shape[0]
    cond = counts / counts.sum(axis=1, keepdims=True)
    marg = cond.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = np.where(cond > 0, np.log2(cond / marg[None, :]), 0.0)
    mi = float(np.sum(cond * dens) / M)
    mi = max(mi, 0.0)
    if not with_error:
        return mi
    second = float(np.sum(cond * dens * dens) / M)
    n = counts.sum()
    return mi, math.sqrt(max(second - mi * mi, 0.0) / n)


# -- minimum-effort decoder ----------------------------------------------------------


@dataclass
class DecoderTable:
    """Nearest-point labels on a uniform grid of cell centres."""

    bounds: tuple
    labels: np.ndarray  # (n_re, n_im)

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=complex)
        x0, x1, y0, y1 = self.bounds
        nr, ni = self.labels.shape
        i = np.clip(np.floor((y.real - x0) / (x1 - x0) * nr).astype(np.int64), 0, nr - 1)
        j = np.clip(np.floor((y.imag - y0) / (y1 - y0) * ni).astype(np.int64), 0, ni - 1)
        return self.labels[i, j]

    def centres(self):
        x0, x1, y0, y1 = self.bounds
        nr, ni = self.labels.shape
        cx = x0 + (np.arange(nr) + 0.5) * (x1 - x0) / nr
        cy = y0 + (np.arange(ni) + 0.5) * (y1 - y0) / ni
        return cx[:, None] + 1j * cy[None, :]


def _effort_grid(x: complex, centres: np.ndarray, fiber: FiberParams, tol: float) -> np.ndarray:
    """Minimum effort from ``x`` to every cell centre.

    Cells are visited row by row with warm starts from the left and upper
    neighbours.  A warm result above the constant-modulus bound is on the
    wrong branch, so a cold solve is made there (and where no warm start
    converges).
    """
    nr, ni = centres.shape
    E = np.full((nr, ni), np.inf)
    slope = np.full((nr, ni), np.nan, dtype=complex)
    bound = np.min([spiral_effort(x, centres, fiber.gamma, fiber.length_km, w) for w in SPIRAL_WINDINGS], axis=0)
    for a in range(nr):
        for b in range(ni):
            warm = [slope[a, b - 1] if b else np.nan, slope[a - 1, b] if a else np.nan]
            warm = [w for w in warm if not np.isnan(w)]
            best = None
            for seeds, cold in ((warm, False), (None, True)):
                if cold is False and not warm:
                    continue
                try:
                    sol = eulag.solve_effort(
                        x, centres[a, b], fiber, seeds=seeds, tol=tol, with_trajectory=False, spiral_seeds=cold
                    )
                except NoConvergence:
                    continue
                if best is None or sol.effort < best.effort:
                    best = sol
                if best.effort <= bound[a, b] * (1 + 1e-9):
                    break
            if best is None:
                raise FiberDistError(f"decoder cell ({a}, {b}) failed for point {x}")
            E[a, b], slope[a, b] = best.effort, best.slope
    return E


def decoder_table(
    c: Constellation, fiber: FiberParams, bounds=None, resolution: int = 48,
    source: str = "exact", tol: float = 1e-8,
) -> DecoderTable:
    """Label every cell with the point of least effort to reach its centre.

    ``source="spiral"`` uses the closed-form constant-modulus effort instead
    of the exact single-trajectory solve (fast, an upper bound).  Default
    bounds cover the noise-free outputs with a 25% margin.
    """
    if bounds is None:
        out = propagate_noise_free(c.points, fiber)
        r = 1.25 * float(np.max(np.abs(out)))
        bounds = (-r, r, -r, r)
    x0, x1, y0, y1 = bounds
    cx = x0 + (np.arange(resolution) + 0.5) * (x1 - x0) / resolution
    cy = y0 + (np.arange(resolution) + 0.5) * (y1 - y0) / resolution
    centres = cx[:, None] + 1j * cy[None, :]
    if source == "spiral":
        E = np.stack([spiral_effort(x, centres, fiber.gamma, fiber.length_km) for x in c.points])
    elif source == "exact":
        E = np.stack([_effort_grid(x, centres, fiber, tol) for x in c.points])
    else:
        raise ValueError(f"unknown source {source!r}")
    return DecoderTable(tuple(bounds), np.argmin(E, axis=0))


def save_decoder_table(t: DecoderTable, path) -> None:
    nr, ni = t.labels.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re_min", "re_max", "im_min", "im_max", "n_re", "n_im"])
        w.writerow([f"{v:.12g}" for v in t.bounds] + [nr, ni])
        for row in t.labels:
            w.writerow([int(v) for v in row])


def load_decoder_table(path) -> DecoderTable:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head = rows[1]
    bounds = tuple(float(v) for v in head[:4])
    nr, ni = int(head[4]), int(head[5])
    labels = np.array([[int(v) for v in r] for r in rows[2:2 + nr]], dtype=np.int64)
    if labels.shape != (nr, ni):
        raise ValueError(f"{path}: expected {nr}x{ni} labels")
    return DecoderTable(bounds, labels)


# -- evaluation -------------------------------------------------------------------


def ser(
    c: Constellation, decoder: str, noise: NoiseConfig, fiber: FiberParams, trials: int, rng_seed,
    hist: Histogram2D | None = None, table: DecoderTable | None = None, with_error: bool = False,
):
    """Monte Carlo symbol error rate with equiprobable points.

    ``histogram_map`` needs a histogram trained on an independent seed;
    ``adversarial_md`` needs a :class:`DecoderTable`.
    """
    if decoder == "histogram_map":
        if hist is None:
            raise UntrainedDecoder("histogram_map needs a trained histogram")
        dec = MapDecoder(hist)
    elif decoder == "adversarial_md":
        if table is None:
            raise UntrainedDecoder("adversarial_md needs a decoder table")
        dec = table
    else:
        raise ValueError(f"unknown decoder {decoder!r}")
    out = simulate(c.points, noise, fiber, trials, rng_seed)
    truth = np.repeat(np.arange(len(c))[:, None], trials, axis=1)
    p = float(np.mean(dec(out.ravel()) != truth.ravel()))
    if with_error:
        return p, math.sqrt(p * (1 - p) / out.size)
    return p


def psnr_db(peak_power: float, sigma2: float, fiber: FiberParams) -> float:
    """``peak_power / (sigma2 L)`` in dB."""
    return 10.0 * math.log10(peak_power / (sigma2 * fiber.length_km)) if sigma2 > 0 else math.inf


@dataclass
class EvalRow:
    sigma2: float
    psnr_db: float
    ser_map: float
    ser_map_se: float
    ser_md: float
    mi_bits: float
    mi_se: float


def evaluate(
    c: Constellation, sigma2_values, fiber: FiberParams, trials: int = DEFAULT_TRIALS, rng_seed: int = 0,
    bins: int = DEFAULT_BINS, table: DecoderTable | None = None, segment_km: float = 1.0,
) -> list[EvalRow]:
    """SER and MI over a sweep of noise levels.

    Training and test runs use independent child seeds of ``rng_seed`` for
    every noise level.  ``ser_md`` is NaN without a decoder table.
    """
    rows = []
    for k, s2 in enumerate(sigma2_values):
        train_seed, test_seed = np.random.SeedSequence([rng_seed, k]).spawn(2)
        noise = NoiseConfig(float(s2), segment_km)
        hist = train_histogram(c, noise, fiber, trials, bins, train_seed)
        p_map, se_map = ser(c, "histogram_map", noise, fiber, trials, test_seed, hist=hist, with_error=True)
        p_md = ser(c, "adversarial_md", noise, fiber, trials, test_seed, table=table) if table is not None else math.nan
        mi, mi_se = mutual_information(hist, with_error=True)
        rows.append(EvalRow(float(s2), psnr_db(c.peak_power, float(s2), fiber), p_map, se_map, p_md, mi, mi_se))
    return rows


def save_report(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sigma2", "psnr_db", "ser_map", "ser_md", "mi_bits"])
        for r in rows:
            w.writerow([f"{r.sigma2:.12g}", f"{r.psnr_db:.12g}", f"{r.ser_map:.12g}", f"{r.ser_md:.12g}", f"{r.mi_bits:.12g}"])
