"""Acceptance criteria, one test each, at the stated tolerances.

Each test records a one-line PASS/FAIL summary that pytest prints in the
"acceptance criteria" section at the end of the run.  Run directly with
``python3 tests/test_acceptance.py`` for the same output.
"""

import cmath
import itertools
import math
import sys
import time
import warnings

import numpy as np
import pytest

from fiberdist import approx as apx
from fiberdist import constellation as cons
from fiberdist import distance as dist
from fiberdist import eulag
from fiberdist import linear as lin
from fiberdist import stochastic as sto
from fiberdist.channel import FiberParams
from fiberdist.errors import NoConvergence

FIBER = FiberParams(2000.0, 1.27)
LINEAR = FiberParams(2000.0, 0.0)
TOL = 1e-10
PEAK = 0.05**2
SLACK = dist.SANDWICH_SLACK


def record(log, k, ok, detail):
    line = f"CRITERION {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    log[k] = line
    print(line)
    assert ok, line


def random_pairs(n, seed, r_max=0.05):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        r = r_max * np.sqrt(rng.uniform(size=2))
        x1, x2 = r * np.exp(1j * rng.uniform(-np.pi, np.pi, 2))
        out.append((complex(x1), complex(x2)))
    return out


@pytest.fixture(scope="session")
def solved():
    """(x1, x2, d, lower, upper, label) for every distance computed here."""
    return []


@pytest.fixture(scope="session")
def joints():
    """(JointSolution, tol, label) for every accepted joint solution."""
    return []


def keep(solved, joints, x1, x2, res, label, tol=TOL):
    solved.append((x1, x2, res.value, res.lower_bound, res.upper_bound, label))
    if res.witness is not None:
        joints.append((res.witness, tol, label))


@pytest.fixture(scope="session")
def table_build():
    t = time.perf_counter()
    table = apx.build_table(FIBER)
    return table, time.perf_counter() - t


# -- 1 --------------------------------------------------------------------------


def test_criterion_01_origin_closed_form(acceptance_log, solved, joints):
    eulag.solve_joint(0.02, 0.0, FIBER, tol=TOL, with_trajectory=False)  # compile the kernels
    xs = np.arange(0.005, 0.05 + 1e-12, 0.0025)
    worst_err, worst_time = 0.0, 0.0
    for x in xs:
        t = time.perf_counter()
        sol = eulag.solve_joint(x, 0.0, FIBER, tol=TOL)
        worst_time = max(worst_time, time.perf_counter() - t)
        closed = dist.distance_from_origin(x, FIBER)
        worst_err = max(worst_err, abs(sol.effort - closed) / closed)
        joints.append((sol, TOL, f"origin {x:g}"))
        solved.append((x, 0j, sol.effort, dist.radial_distance(x, 0, FIBER), dist.upper_bound(x, 0, FIBER), "c1"))
    ok = worst_err <= 0.02 and worst_time <= 2.0
    record(acceptance_log, 1, ok, f"{xs.size} points, max rel err {worst_err:.2e} (<= 2%), max time {worst_time:.2f} s (<= 2 s)")


# -- 2 --------------------------------------------------------------------------


def test_criterion_02_linear_limit(acceptance_log, solved, joints):
    worst = 0.0
    for x1, x2 in random_pairs(20, 2):
        sol = eulag.solve_joint(x1, x2, LINEAR, tol=TOL)
        ref = abs(x1 - x2) ** 2 / (4 * LINEAR.L)
        worst = max(worst, abs(sol.effort - ref) / ref)
        joints.append((sol, TOL, "linear"))
        solved.append((x1, x2, sol.effort, dist.radial_distance(x1, x2, LINEAR), dist.upper_bound(x1, x2, LINEAR), "c2"))
    record(acceptance_log, 2, worst <= 1e-6, f"20 pairs at gamma=0, max rel err {worst:.2e} (<= 1e-6)")


# -- 3 --------------------------------------------------------------------------


def test_criterion_03_cross_oracle(acceptance_log, solved, joints):
    worst, methods = 0.0, set()
    for x1, x2 in random_pairs(10, 3):
        joint = dist.exact_distance(x1, x2, FIBER, TOL)
        dec = dist.decompose_distance(x1, x2, FIBER, 1e-9)
        methods.add(joint.method)
        keep(solved, joints, x1, x2, joint, "c3 joint")
        solved.append((x1, x2, dec.value, dec.lower_bound, dec.upper_bound, "c3 decomposition"))
        worst = max(worst, abs(dec.value - joint.value) / joint.value)
    ok = worst <= 0.01 and methods == {"joint_bvp"}
    record(acceptance_log, 3, ok, f"10 pairs, max rel diff joint vs decomposition {worst:.2e} (<= 1%), joint methods {sorted(methods)}")


# -- 5 --------------------------------------------------------------------------


def test_criterion_05_phase_transition(acceptance_log, solved, joints):
    low = [0.005, 0.01, 0.015, 0.02]
    high = [round(0.04 + 0.005 * k, 3) for k in range(13)]
    d = {}
    for x in low + high:
        res = dist.exact_distance(x, -x, FIBER, TOL)
        keep(solved, joints, x, -x, res, f"c5 antipodal {x}")
        d[x] = res.value
    near_bound = {x: abs(d[x] - dist.upper_bound(x, -x, FIBER)) / dist.upper_bound(x, -x, FIBER) for x in low}
    below_ook = {x: d[x] < dist.distance_from_origin(x, FIBER) for x in high}
    tail = [x for x in high if x >= 0.05]
    decreasing = all(d[a] > d[b] for a, b in zip(tail, tail[1:]))
    ok = max(near_bound.values()) <= 0.05 and all(below_ook.values()) and decreasing
    misses = [x for x, v in below_ook.items() if not v]
    detail = (
        f"max gap to bound for x<=0.02 {max(near_bound.values()):.2e} (<= 5%); "
        f"d(x,-x) >= d(x,0) at x={misses or 'none'} "
        f"(d(0.04,-0.04)={d[0.04]:.4e}, d(0.04,0)={dist.distance_from_origin(0.04, FIBER):.4e}); "
        f"decreasing on [0.05,0.1]: {decreasing}"
    )
    record(acceptance_log, 5, ok, detail)


# -- 6 --------------------------------------------------------------------------


def _phase_minimum(r1, r2):
    """Minimizing relative phase over the whole circle, then a fine independent scan."""
    coarse = -np.pi + 2 * np.pi * np.arange(64) / 64
    pts = dist.phase_sweep(r1, r2, coarse, FIBER, 1e-9)
    vals = np.array([np.inf if p is None else p.effort for p in pts])
    centre = coarse[int(np.argmin(vals))]
    base = dist.phi_star(r1, r2, FIBER)
    best = (np.inf, None)
    for off in centre + np.arange(-0.1, 0.1 + 1e-12, 0.01):
        theta = base + off
        x2 = r2 * cmath.exp(1j * theta)
        try:
            e = eulag.solve_joint(r1, x2, FIBER, tol=TOL, with_trajectory=False).effort
        except NoConvergence:
            e = dist.exact_distance(r1, x2, FIBER, TOL, with_witness=False).value
        if e < best[0]:
            best = (e, theta)
    return best


def test_criterion_06_radial_minimum(acceptance_log):
    pairs = [(0.03, 0.01), (0.05, 0.02), (0.04, 0.035), (0.045, 0.005), (0.025, 0.015)]
    worst_angle, worst_val = 0.0, 0.0
    for r1, r2 in pairs:
        val, theta = _phase_minimum(r1, r2)
        off = abs(float(dist.wrap_angle(theta - dist.phi_star(r1, r2, FIBER))))
        dr = dist.radial_distance(r1, r2, FIBER)
        worst_angle = max(worst_angle, off)
        worst_val = max(worst_val, abs(val - dr) / dr)
    ok = worst_angle <= 0.05 and worst_val <= 0.01
    record(acceptance_log, 6, ok, f"5 radius pairs, max |argmin - phi*| {worst_angle:.3f} rad (<= 0.05), max rel gap to radial {worst_val:.2e} (<= 1%)")


# -- 8 --------------------------------------------------------------------------


def _exhaustive_max_min(D, size):
    subsets = np.array(list(itertools.combinations(range(D.shape[0]), size)))
    pairs = list(itertools.combinations(range(size), 2))
    mins = np.min(np.stack([D[subsets[:, a], subsets[:, b]] for a, b in pairs]), axis=0)
    return float(mins.max())


def test_criterion_08_clique_exactness(acceptance_log):
    rng = np.random.default_rng(8)
    mismatches = 0
    for _ in range(50):
        D = rng.uniform(size=(30, 30))
        D = np.triu(D, 1) + np.triu(D, 1).T
        size = int(rng.integers(2, 6))
        m = cons.DistanceMatrix(np.arange(30) * 1e-3 + 0j, D, "exact")
        _, th = cons.design_max_min(m, size, peak_power=1.0)
        mismatches += th != _exhaustive_max_min(D, size)
    record(acceptance_log, 8, mismatches == 0, f"50 random 30-point instances, sizes 2..5, mismatches {mismatches}")


# -- 9 --------------------------------------------------------------------------

SIGMA2_SWEEP = [5e-9, 7e-9, 1e-8, 1.3e-8]
MC_TRIALS = 20_000


def test_criterion_09_sixteen_point_design(acceptance_log):
    grid = cons.polar_grid(20, 0.05, 40)
    matrix = cons.distance_matrix(grid, FIBER, "exact", tol=1e-8)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        design, _ = cons.design_max_min(matrix, 16, PEAK, FIBER)
    bounded = any(issubclass(w.category, RuntimeWarning) for w in caught)
    q = cons.qam(16, PEAK, FIBER)
    d_design = design.min_distance
    d_qam = cons.min_distance(q, "exact", tol=1e-8)

    rows_d = sto.evaluate(design, SIGMA2_SWEEP, FIBER, trials=MC_TRIALS, rng_seed=90)
    rows_q = sto.evaluate(q, SIGMA2_SWEEP, FIBER, trials=MC_TRIALS, rng_seed=91)
    checked, ser_ok, mi_ok = [], True, True
    for a, b in zip(rows_d, rows_q):
        if not (1e-3 <= a.ser_map <= 1e-1 and 1e-3 <= b.ser_map <= 1e-1):
            continue
        checked.append(a.sigma2)
        ser_ok &= a.ser_map < b.ser_map
        mi_ok &= a.mi_bits >= b.mi_bits - 2 * math.hypot(a.mi_se, b.mi_se)
    ok = d_design > d_qam and bool(checked) and ser_ok and mi_ok
    sers = ", ".join(f"{a.sigma2:.1e}: {a.ser_map:.2e} vs {b.ser_map:.2e}" for a, b in zip(rows_d, rows_q))
    detail = (
        f"d(C) design {d_design:.4e} vs 16-QAM {d_qam:.4e}"
        f"{' (clique search bounded)' if bounded else ''}; SER design vs QAM [{sers}]; "
        f"compared at sigma2 {checked}; SER lower: {ser_ok}; MI within 2 SE: {mi_ok}"
    )
    record(acceptance_log, 9, ok, detail)


# -- 10 -------------------------------------------------------------------------


def test_criterion_10_sixty_four_point_pipeline(acceptance_log, table_build):
    table, build_time = table_build
    t = time.perf_counter()
    best = cons.best_of_refinements(64, table, trials=100, seed=10, peak_power=PEAK)
    elapsed = build_time + time.perf_counter() - t
    d_qam = cons.min_distance(cons.qam(64, PEAK, FIBER), "approximation", table)
    ok = best.min_distance >= d_qam and elapsed <= 1800
    record(acceptance_log, 10, ok, f"d(C) refined {best.min_distance:.4e} vs 64-QAM {d_qam:.4e} (approximate distance), table+100 restarts {elapsed:.0f} s (<= 1800 s)")


# -- 11 -------------------------------------------------------------------------


def test_criterion_11_approximation_quality(acceptance_log, table_build, solved, joints):
    table, _ = table_build
    step = table.radii[1] - table.radii[0]
    rng = np.random.default_rng(11)
    errs = []
    while len(errs) < 50:
        r = rng.uniform(0, table.radii[-1], 2)
        if np.any(np.abs(r / step - np.round(r / step)) < 0.05):
            continue  # held out: keep clear of the table radii
        x1, x2 = r * np.exp(1j * rng.uniform(-np.pi, np.pi, 2))
        res = dist.exact_distance(x1, x2, FIBER, 1e-9)
        keep(solved, joints, complex(x1), complex(x2), res, "c11", 1e-9)
        errs.append(abs(apx.approx_distance(x1, x2, table) - res.value) / res.value)
    med = float(np.median(errs))
    record(acceptance_log, 11, med <= 0.15, f"50 held-out pairs, median rel err {med:.3f} (<= 0.15), max {max(errs):.3f}")


# -- 12 -------------------------------------------------------------------------


def test_criterion_12_linear_channel(acceptance_log):
    poly = lin.ChannelPolynomial.dispersion(-21.7)
    rng = np.random.default_rng(12)
    worst_d, worst_mu = 0.0, 0.0
    for _ in range(10):
        x1 = lin.FourierSignal.random(16, 1.0, 0.02, rng)
        x2 = lin.FourierSignal.random(16, 1.0, 0.02, rng)
        d, mu = lin.linear_distance(x1, x2, poly, FIBER.L, with_mu=True)
        ref = lin.euclidean_form(x1, x2, FIBER.L)
        worst_d = max(worst_d, abs(d - ref) / ref)
        worst_mu = max(worst_mu, abs(mu - 0.5))
    ok = worst_d <= 1e-8 and worst_mu <= 1e-10
    record(acceptance_log, 12, ok, f"10 random M=16 pairs, max rel diff to Euclidean form {worst_d:.1e} (<= 1e-8), max |mu - 1/2| {worst_mu:.1e} (<= 1e-10)")


# -- 13 -------------------------------------------------------------------------


def test_criterion_13_stochastic_bookkeeping(acceptance_log):
    s2, x = 2e-9, 0.02 - 0.01j
    out = sto.simulate([x], sto.NoiseConfig(s2), LINEAR, 100_000, seed=13)[0]
    n = out - x
    total = s2 * LINEAR.L
    cov = np.cov(np.vstack([n.real, n.imag]))
    power_err = abs(np.mean(np.abs(n) ** 2) - total) / total
    cov_err = float(np.max(np.abs(cov - 0.5 * total * np.eye(2)))) / (0.5 * total)
    c = cons.qam(16, PEAK, FIBER)
    hist = sto.train_histogram(c, sto.NoiseConfig(0.0), FIBER, 1000, rng_seed=13)
    mi = sto.mutual_information(hist)
    ok = power_err <= 0.03 and cov_err <= 0.03 and mi == math.log2(16)
    record(acceptance_log, 13, ok, f"gamma=0, 1e5 samples: E|n|^2 err {power_err:.3f}, 2x2 covariance err {cov_err:.3f} (<= 0.03); noiseless MI {mi} (= 4)")


# -- 14 -------------------------------------------------------------------------


def test_criterion_14_normalization(acceptance_log, solved, joints):
    worst = 0.0
    for x1, x2 in random_pairs(5, 14):
        res = dist.exact_distance(x1, x2, FIBER, TOL)
        keep(solved, joints, x1, x2, res, "c14")
        worst = max(worst, abs(dist.normalized_distance(x1, x2, FIBER, tol=TOL) - res.value) / res.value)
    record(acceptance_log, 14, worst <= 0.01, f"5 pairs, max rel diff physical vs dimensionless {worst:.2e} (<= 1%)")


# -- 4 and 7 run last so they see every solution computed above ---------------------


def test_criterion_04_bound_sandwich(acceptance_log, solved, joints):
    for x1, x2 in random_pairs(20, 4):
        keep(solved, joints, x1, x2, dist.exact_distance(x1, x2, FIBER, TOL), "c4")
    violations = [
        (label, d, lo, hi) for _, _, d, lo, hi, label in solved
        if not (lo * (1 - SLACK) <= d <= hi * (1 + SLACK))
    ]
    detail = f"{len(solved)} solved pairs, violations {len(violations)}"
    if violations:
        detail += f" (first: {violations[0]})"
    record(acceptance_log, 4, not violations, detail)


def test_criterion_07_energy_and_transversality(acceptance_log, joints):
    for x1, x2 in random_pairs(10, 7):
        res = dist.exact_distance(x1, x2, FIBER, TOL)
        if res.witness is not None:
            joints.append((res.witness, TOL, "c7"))
    bad_energy = [lab for s, _, lab in joints if abs(s.c_end) > 1e-6 * s.effort]
    bad_trans = [lab for s, tol, lab in joints if np.max(np.abs(s.residuals[3:5])) > tol]
    worst_c = max(abs(s.c_end) / s.effort for s, _, _ in joints)
    worst_t = max(np.max(np.abs(s.residuals[3:5])) / tol for s, tol, _ in joints)
    ok = not bad_energy and not bad_trans
    record(acceptance_log, 7, ok, f"{len(joints)} joint solutions, max |c(L)|/E {worst_c:.1e} (<= 1e-6), max transversality/tol {worst_t:.2f} (<= 1)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
