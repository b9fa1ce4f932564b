import cmath

import numpy as np
import pytest

from fiberdist import distance as dist
from fiberdist import eulag
from fiberdist.channel import FiberParams, control_energy, integrate, propagate_noise_free
from fiberdist.errors import NoConvergence


def test_rhs_linear_limit(linear_fiber):
    s = eulag.JointState(0.01, 0.02, -0.03, 0.0, 1e-5, -2e-5, 3e-6, 4e-6, 0.0, 0.5)
    d = eulag.eulag_rhs(s, linear_fiber)
    assert (d.da1, d.db1, d.da2, d.db2) == (0, 0, 0, 0)
    assert d.c == pytest.approx((3e-6**2 + 4e-6**2) - (1e-5**2 + 2e-5**2), rel=1e-14)


def test_running_cost_matches_direct_formula(fiber):
    rng = np.random.default_rng(0)
    for _ in range(20):
        a1, b1, a2, b2 = 0.05 * rng.standard_normal(4)
        da1, db1, da2, db2 = 1e-4 * rng.standard_normal(4)
        s = eulag.JointState(a1, b1, a2, b2, da1, db1, da2, db2, 0.0, 0.5)
        g = fiber.gamma
        q1, q2 = complex(a1, b1), complex(a2, b2)
        g1 = abs(complex(da1, db1) - 1j * g * abs(q1) ** 2 * q1) ** 2
        g2 = abs(complex(da2, db2) - 1j * g * abs(q2) ** 2 * q2) ** 2
        assert eulag.eulag_rhs(s, fiber).c == pytest.approx(g2 - g1, rel=1e-12, abs=1e-24)
        assert float(eulag.running_cost(q1, complex(da1, db1), g)) == pytest.approx(g1, rel=1e-12)


def test_running_cost_zero_on_noise_free_path(fiber):
    q = 0.03 * cmath.exp(0.4j)
    assert float(eulag.running_cost(q, 1j * fiber.gamma * abs(q) ** 2 * q, fiber.gamma)) < 1e-36


def test_linear_joint_solution(linear_fiber):
    sol = eulag.solve_joint(0.02, -0.02, linear_fiber, tol=1e-10)
    assert sol.effort == pytest.approx(2.0e-7, rel=1e-9)
    assert sol.lam == pytest.approx(0.5, abs=1e-9)
    assert abs(sol.meeting_point) < 1e-10
    # straight lines
    z = sol.traj1.z
    assert np.allclose(sol.traj1.q, 0.02 * (1 - z / linear_fiber.L), atol=1e-10)


def test_linear_seed_is_already_a_solution(linear_fiber):
    seed = eulag.make_seeds(0.02, -0.01j, linear_fiber, "linear")[0]
    sol = eulag.joint_from_seed(0.02, -0.01j, linear_fiber, seed, 1e-10)
    assert sol.residual_norm < 1e-12
    assert sol.effort == pytest.approx(abs(0.02 + 0.01j) ** 2 / 8000, rel=1e-12)


def test_origin_pair_closed_form(fiber):
    sol = eulag.solve_joint(0.04, 0.0, fiber, tol=1e-10)
    assert sol.effort == pytest.approx(2.0e-7, rel=0.02)


def test_joint_witness_is_consistent(fiber):
    x1, x2 = 0.03 + 0.01j, -0.02j
    sol = eulag.solve_joint(x1, x2, fiber, tol=1e-10)
    for traj, start in ((sol.traj1, x1), (sol.traj2, x2)):
        assert traj.start == pytest.approx(start, abs=1e-14)
        assert traj.end == pytest.approx(sol.meeting_point, abs=1e-8)
        assert control_energy(traj.control) == pytest.approx(sol.effort, rel=1e-4)
        again = integrate(start, traj.control, fiber, tol=1e-11)
        assert abs(again.end - sol.meeting_point) < 1e-6 * abs(start)
    assert abs(sol.c_end) <= 1e-6 * sol.effort
    assert 0 < sol.lam < 1


def test_swapping_inputs_swaps_multiplier(fiber):
    a = eulag.solve_joint(0.03, 0.01j, fiber, tol=1e-10)
    b = eulag.solve_joint(0.01j, 0.03, fiber, tol=1e-10)
    assert a.effort == pytest.approx(b.effort, rel=1e-6)
    assert a.lam == pytest.approx(1 - b.lam, abs=1e-6)


def test_distinct_points_required(fiber):
    with pytest.raises(ValueError):
        eulag.solve_joint(0.01, 0.01, fiber)


def test_radial_seed_small_antipodal_meets_at_origin(fiber):
    seed = eulag.make_seeds(0.01, -0.01, fiber, "radial")[0]
    sol = eulag.joint_from_seed(0.01, -0.01, fiber, seed, 1e-10)
    assert abs(sol.meeting_point) < 1e-6
    assert sol.effort == pytest.approx(0.01**2 / (4 * 500), rel=1e-6)


def test_phase_branch_beats_radial_branch_at_high_power(fiber):
    x = 0.05
    seed = eulag.make_seeds(x, -x, fiber, "radial")[0]
    radial = eulag.joint_from_seed(x, -x, fiber, seed, 1e-9, with_trajectory=False).effort
    phase = dist.exact_distance(x, -x, fiber, 1e-9, with_witness=False).value
    assert phase < 0.5 * radial


def test_single_effort_from_origin(fiber):
    y = 0.02 * cmath.exp(1.1j)
    sol = eulag.solve_effort(0j, y, fiber, tol=1e-10)
    assert sol.effort == pytest.approx(2.0e-7, rel=0.01)


def test_single_effort_zero_at_noise_free_output(fiber):
    x = 0.03 - 0.02j
    sol = eulag.solve_effort(x, propagate_noise_free(x, fiber), fiber, tol=1e-10)
    assert sol.effort == pytest.approx(0.0, abs=1e-18)


@pytest.mark.parametrize("theta", [0.0, 1.0, 2.5, -2.0])
def test_single_effort_lower_bound(fiber, theta):
    y = 0.03 * cmath.exp(1j * theta)
    sol = eulag.solve_effort(0.01, y, fiber, tol=1e-10)
    assert sol.effort >= 2.0e-7 * (1 - 1e-9)
    again = integrate(0.01, sol.traj.control, fiber, tol=1e-11)
    assert abs(again.end - y) < 1e-6 * abs(y)
    assert control_energy(sol.traj.control) == pytest.approx(sol.effort, rel=1e-4)


def test_single_effort_linear(linear_fiber):
    sol = eulag.solve_effort(0.01, -0.02j, linear_fiber, tol=1e-10)
    assert sol.effort == pytest.approx(abs(0.01 + 0.02j) ** 2 / 2000, rel=1e-9)
