import numpy as np
import pytest

from conftest import constructed_instance
from effapprox.sdp import SdpProblem, SdpStatus, residuals, solve


def scalar_lower_bound_problem():
    # minimize t subject to X11 >= 1 (slack block), t tied to X11; t* = 1
    prob = SdpProblem(block_dims=[1, 1], n_free=1)
    r0 = prob.add_row(0.0)
    prob.set_entry(r0, 0, 0, 0, 1.0)
    prob.set_free_entry(r0, 0, -1.0)
    r1 = prob.add_row(1.0)
    prob.set_entry(r1, 0, 0, 0, 1.0)
    prob.set_entry(r1, 1, 0, 0, -1.0)
    prob.obj_free = [1.0]
    return prob


def correlation_extreme_problem():
    # maximize lam with [[1, lam], [lam, 1]] PSD; lam* = 1
    prob = SdpProblem(block_dims=[2], n_free=1)
    r0 = prob.add_row(1.0)
    prob.set_entry(r0, 0, 0, 0, 1.0)
    r1 = prob.add_row(1.0)
    prob.set_entry(r1, 0, 1, 1, 1.0)
    r2 = prob.add_row(0.0)
    prob.set_entry(r2, 0, 0, 1, 0.5)
    prob.set_free_entry(r2, 0, -1.0)
    prob.obj_free = [-1.0]
    return prob


def test_tied_scalar_variable():
    sol = solve(scalar_lower_bound_problem())
    assert sol.status == SdpStatus.OPTIMAL
    assert abs(sol.free_values[0] - 1.0) <= 1e-6
    assert sol.residuals.max() <= 1e-6


def test_correlation_matrix_extreme():
    sol = solve(correlation_extreme_problem())
    assert sol.status == SdpStatus.OPTIMAL
    assert abs(sol.free_values[0] - 1.0) <= 1e-6


def test_single_constructed_three_by_three():
    rng = np.random.default_rng(33)
    # retry draws until the single block is 3x3 for a fixed-size regression
    while True:
        prob, value = constructed_instance(rng)
        if prob.block_dims == [3]:
            break
    sol = solve(prob)
    assert sol.status == SdpStatus.OPTIMAL
    assert abs(sol.primal_obj - value) <= 1e-6 * (1 + abs(value))


def test_constructed_instances_batch():
    rng = np.random.default_rng(101)
    for _ in range(15):
        prob, value = constructed_instance(rng)
        sol = solve(prob)
        assert sol.status == SdpStatus.OPTIMAL
        assert sol.residuals.max() <= 1e-6
        assert abs(sol.primal_obj - value) <= 1e-6 * (1 + abs(value))
        # weak duality at the returned iterate
        assert sol.dual_obj <= sol.primal_obj + 1e-6 * (1 + abs(sol.primal_obj))


def test_residuals_recomputation_matches():
    prob = scalar_lower_bound_problem()
    sol = solve(prob)
    rep = residuals(prob, sol)
    assert rep.primal_feas <= 1e-7
    assert rep.dual_feas <= 1e-7
    assert rep.gap <= 1e-6
    assert rep.max() == max(rep.primal_feas, rep.dual_feas, rep.gap)


def test_residuals_detect_perturbation():
    prob = scalar_lower_bound_problem()
    sol = solve(prob)
    clean = residuals(prob, sol).primal_feas
    sol.block_values[0][0, 0] += 1e-3
    assert residuals(prob, sol).primal_feas > clean + 1e-4


def test_infeasible_detected():
    # trace(X) = -1 has no PSD solution
    prob = SdpProblem(block_dims=[3], n_free=0)
    prob.add_row(-1.0)
    for i in range(3):
        prob.set_entry(0, 0, i, i, 1.0)
    sol = solve(prob)
    assert sol.status == SdpStatus.INFEASIBLE


def test_unbounded_detected():
    # minimize -X00 with only the off-diagonal pinned
    prob = SdpProblem(block_dims=[2], n_free=0)
    prob.add_row(0.0)
    prob.set_entry(0, 0, 0, 1, 1.0)
    prob.set_obj_entry(0, 0, 0, -1.0)
    prob.set_obj_entry(0, 1, 1, 1.0)
    sol = solve(prob)
    assert sol.status == SdpStatus.UNBOUNDED


def test_linearly_dependent_rows_do_not_crash():
    # five rows on a 2x2 block exceed the three symmetric degrees of freedom;
    # the system stays consistent because the rhs comes from an actual X
    rng = np.random.default_rng(1)
    prob = SdpProblem(block_dims=[2], n_free=0)
    X0 = np.array([[2.0, 0.3], [0.3, 1.0]])
    for i in range(5):
        M = rng.normal(size=(2, 2))
        M = (M + M.T) / 2
        prob.add_row(float(np.vdot(M, X0)))
        for r in range(2):
            for c in range(r, 2):
                prob.set_entry(i, 0, r, c, float(M[r, c]))
    prob.set_obj_entry(0, 0, 0, 1.0)
    prob.set_obj_entry(0, 1, 1, 1.0)
    sol = solve(prob)  # must return, not raise
    assert sol.status in (SdpStatus.OPTIMAL, SdpStatus.NUMERICAL_FAILURE)


def test_max_iterations_exit():
    prob = correlation_extreme_problem()
    sol = solve(prob, max_iterations=2)
    assert sol.iterations <= 2
    assert sol.status in (SdpStatus.MAX_ITERATIONS, SdpStatus.OPTIMAL)


def test_validate_rejects_bad_shapes():
    prob = SdpProblem(block_dims=[2], n_free=1)
    prob.add_row(1.0)
    prob.set_entry(0, 0, 0, 0, 1.0)
    prob.obj_free = [1.0, 2.0]  # wrong length
    with pytest.raises(ValueError):
        prob.validate()


def test_entry_bounds_checked():
    prob = SdpProblem(block_dims=[2], n_free=0)
    prob.add_row(0.0)
    prob.set_entry(0, 1, 0, 0, 1.0)  # no block 1
    with pytest.raises(ValueError, match="block"):
        prob.validate()

    prob2 = SdpProblem(block_dims=[2], n_free=0)
    prob2.add_row(0.0)
    prob2.set_entry(0, 0, 2, 0, 1.0)  # index beyond dim
    with pytest.raises(ValueError, match="outside block"):
        prob2.validate()


def test_dump_mentions_all_sections():
    prob = scalar_lower_bound_problem()
    text = prob.dump()
    assert "blocks" in text
    assert "rows" in text
