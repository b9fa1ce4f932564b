import itertools
import math

import numpy as np
import pytest
from scipy.stats import spearmanr

from fiberdist import approx as apx
from fiberdist import constellation as cons
from fiberdist import distance as dist
from fiberdist.channel import FiberParams
from fiberdist.errors import Infeasible


def brute_max_clique(adj):
    n = adj.shape[0]
    for k in range(n, 0, -1):
        for sub in itertools.combinations(range(n), k):
            if all(adj[a, b] for a, b in itertools.combinations(sub, 2)):
                return list(sub)
    return []


def brute_max_min(D, size):
    best = -1.0
    for sub in itertools.combinations(range(D.shape[0]), size):
        best = max(best, min(D[a, b] for a, b in itertools.combinations(sub, 2)))
    return best


def random_graph(rng, n, p):
    upper = np.triu(rng.uniform(size=(n, n)) < p, 1)
    return upper | upper.T


def test_polar_grid():
    g = cons.polar_grid(20, 0.05, 40)
    pts = g.points
    assert pts.size == 800
    assert np.max(np.abs(pts)) == pytest.approx(0.05)
    assert np.all(np.abs(pts) ** 2 <= 0.0025 * (1 + 1e-12))
    one = cons.polar_grid(1, 0.05, 1).points
    assert one.size == 1 and abs(one[0]) == pytest.approx(0.05)
    assert cons.polar_grid(2, 0.05, 3, include_origin=True).points[0] == 0


def test_max_clique_small_cases():
    assert cons.max_clique(~np.eye(4, dtype=bool)) == [0, 1, 2, 3]
    assert cons.max_clique(np.zeros((5, 5), dtype=bool)) == [0]
    with pytest.raises(ValueError):
        cons.max_clique(np.ones((3, 3), dtype=bool))


def test_max_clique_matches_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(10):
        adj = random_graph(rng, 16, 0.5)
        assert cons.max_clique(adj) == brute_max_clique(adj)
    for _ in range(5):
        adj = random_graph(rng, 30, 0.3)
        got = cons.max_clique(adj)
        assert all(adj[a, b] for a, b in itertools.combinations(got, 2))
        size = len(got)
        assert size <= 6
        assert not any(
            all(adj[a, b] for a, b in itertools.combinations(sub, 2))
            for sub in itertools.combinations(range(30), size + 1)
        )


def matrix_from(D):
    return cons.DistanceMatrix(np.arange(D.shape[0]) * 1e-3 + 0j, D, "exact")


def test_design_all_points_and_line():
    rng = np.random.default_rng(1)
    D = rng.uniform(1, 2, (6, 6))
    D = np.triu(D, 1) + np.triu(D, 1).T
    c, th = cons.design_max_min(matrix_from(D), 6, peak_power=1.0)
    assert th == pytest.approx(D[np.triu_indices(6, 1)].min())
    assert len(c) == 6
    pos = np.arange(4.0)
    line = np.abs(pos[:, None] - pos[None, :])
    c, th = cons.design_max_min(matrix_from(line), 2, peak_power=1.0)
    assert th == 3.0
    assert list(c.points) == [0, 3e-3]


def test_design_matches_exhaustive():
    rng = np.random.default_rng(8)
    for _ in range(10):
        D = rng.uniform(size=(14, 14))
        D = np.triu(D, 1) + np.triu(D, 1).T
        size = int(rng.integers(2, 6))
        c, th = cons.design_max_min(matrix_from(D), size, peak_power=1.0, node_limit=None)
        assert th == brute_max_min(D, size)


def test_design_infeasible():
    with pytest.raises(Infeasible):
        cons.design_max_min(matrix_from(np.zeros((4, 4))), 2, peak_power=1.0)


def test_design_node_limit_keeps_a_valid_design():
    rng = np.random.default_rng(3)
    D = rng.uniform(size=(60, 60))
    D = np.triu(D, 1) + np.triu(D, 1).T
    with pytest.warns(RuntimeWarning):
        c, th = cons.design_max_min(matrix_from(D), 8, peak_power=1.0, node_limit=20)
    idx = np.rint(c.points.real * 1e3).astype(int)
    assert th == pytest.approx(D[np.ix_(idx, idx)][np.triu_indices(8, 1)].min())
    _, best = cons.design_max_min(matrix_from(D), 8, peak_power=1.0, node_limit=None)
    assert th <= best


def test_qam_and_power(fiber):
    q = cons.qam(16, 0.0025, fiber)
    assert np.max(np.abs(q.points)) == pytest.approx(0.05)
    assert cons.avg_power(q) == pytest.approx(0.0025 * 5 / 9)
    assert cons.avg_power(cons.Constellation([0.05, -0.05], 0.0025, fiber)) == pytest.approx(0.0025)
    with pytest.raises(ValueError):
        cons.qam(8, 0.0025, fiber)
    with pytest.raises(ValueError):
        cons.Constellation([0.06], 0.0025, fiber)


def test_distance_matrix_uses_rotational_symmetry(fiber):
    g = cons.polar_grid(2, 0.04, 4)
    m = cons.distance_matrix(g, fiber, "exact", tol=1e-9)
    pts = g.points
    assert np.array_equal(m.values, m.values.T)
    for a, b in ((0, 1), (0, 6), (3, 5), (2, 7)):
        d = dist.exact_distance(pts[a], pts[b], fiber, 1e-9, with_witness=False).value
        assert m.values[a, b] == pytest.approx(d, rel=1e-4)


@pytest.fixture(scope="module")
def table():
    return apx.build_table(FiberParams(2000.0, 1.27), np.linspace(0, 0.05, 11), tol=1e-9)


@pytest.mark.xfail(
    strict=True,
    reason="the sin^2 phase profile overestimates near-equal radii at high power; rank correlation is about 0.78",
)
def test_exact_and_approximate_matrices_agree_on_small_entries(table):
    fiber = table.fiber
    g = cons.polar_grid(10, 0.05, 8)
    exact = cons.distance_matrix(g, fiber, "exact", tol=1e-8).values
    approx = cons.distance_matrix(g, fiber, "approximation", table).values
    iu = np.triu_indices(exact.shape[0], 1)
    e, a = exact[iu], approx[iu]
    small = e <= np.quantile(e, 0.1)
    assert spearmanr(e[small], a[small]).statistic >= 0.9


def test_greedy_keeps_euclidean_optimum(linear_fiber):
    tab = apx.build_table(linear_fiber, np.linspace(0, 0.05, 3), tol=1e-10)
    start = cons.Constellation([0.05, -0.05], 0.0025, linear_fiber)
    out = cons.greedy_refine(start, tab)
    assert np.array_equal(out.points, start.points)


def test_greedy_improves_and_respects_peak(table):
    rng = np.random.default_rng(0)
    start = cons.random_constellation(16, 0.0025, table.fiber, rng)
    before = cons.min_distance(start, "approximation", table)
    out = cons.greedy_refine(start, table)
    assert out.min_distance >= before
    assert out.min_distance == pytest.approx(cons.min_distance(out, "approximation", table), rel=1e-12)
    assert np.all(np.abs(out.points) <= 0.05 * (1 + 1e-12))


def test_best_of_refinements_is_deterministic(table):
    a = cons.best_of_refinements(8, table, 4, seed=3)
    b = cons.best_of_refinements(8, table, 4, seed=3)
    assert np.array_equal(a.points, b.points)


def test_constellation_roundtrip(fiber, tmp_path):
    c = cons.qam(4, 0.0025, fiber)
    c.min_distance = 1.5e-8
    cons.save_constellation(c, tmp_path / "c.json")
    back = cons.load_constellation(tmp_path / "c.json")
    assert np.array_equal(back.points, c.points)
    assert back.fiber == fiber and back.min_distance == 1.5e-8
