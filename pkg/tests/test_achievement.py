import numpy as np
import pytest

from effapprox.achievement import approximate_psi, assemble, build_joint, moments
from effapprox.certificates import OrderTooLowError, compute_bounds
from effapprox.poly import Polynomial
from effapprox.problem import from_dict, omega_generators


def test_box_moments_small_cases():
    table = moments(2, 4)
    assert table[(0, 0)] == 1.0
    assert table[(2, 0)] == pytest.approx(1.0 / 3.0, abs=0)
    assert table[(2, 2)] == pytest.approx(1.0 / 9.0, abs=0)
    assert table[(4, 0)] == pytest.approx(1.0 / 5.0, abs=0)
    assert table[(1, 0)] == 0.0
    assert table[(1, 2)] == 0.0
    assert table[(3, 1)] == 0.0


def test_joint_system_group_structure(problems):
    _, scaled, _ = problems["disk"]
    bounds = compute_bounds(scaled.objectives, omega_generators(scaled))
    joint = build_joint(scaled, bounds, "dense")
    assert joint.dim == 5
    assert joint.z_index == 4
    assert joint.group_counts == {"h1": 3, "h2": 3, "h3": 2, "h4": 1}
    assert len(joint.generators.generators) == 9
    labels = joint.generators.labels()
    assert labels[:3] == ["h1_1", "h1_2", "h1_3"]
    assert labels[-1] == "h4_1"


def test_first_comparison_row_for_polynomial_objective(problems):
    # with q = 1 the cleared comparison collapses to p(x) - p(y) - z
    _, scaled, _ = problems["disk"]
    bounds = compute_bounds(scaled.objectives, omega_generators(scaled))
    joint = build_joint(scaled, bounds, "dense")
    h11 = dict(joint.generators.generators)["h1_1"]
    expected = Polynomial(5, {(1, 0, 0, 0, 0): 1.0, (0, 0, 1, 0, 0): -1.0,
                             (0, 0, 0, 0, 1): -1.0})
    assert h11.max_coeff_diff(expected) == 0.0


def test_rational_comparison_row_cross_checked(problems):
    _, scaled, _ = problems["rational"]
    bounds = compute_bounds(scaled.objectives, omega_generators(scaled))
    joint = build_joint(scaled, bounds, "dense")
    h12 = dict(joint.generators.generators)["h1_2"]
    # x4-type terms cancel between the two products but the z term does not
    assert h12.degree == 5
    p, q = scaled.objectives[1]
    rng = np.random.default_rng(21)
    for _ in range(100):
        u = rng.uniform(-1, 1, size=5)
        x, y, z = u[:2], u[2:4], u[4]
        direct = p(x) * q(y) - p(y) * q(x) - z * q(x) * q(y)
        assert abs(h12(u) - direct) <= 1e-10 * (1 + abs(direct))


def test_sparse_joint_adds_ball_and_cliques(problems):
    _, scaled, _ = problems["disk"]
    bounds = compute_bounds(scaled.objectives, omega_generators(scaled))
    joint = build_joint(scaled, bounds, "sparse")
    labels = joint.generators.labels()
    assert "h1_ball" in labels
    cliques = joint.generators.cliques
    assert len(cliques) == 4
    assert cliques[0].variables == (0, 1, 2, 3, 4)
    assert cliques[1].variables == (2, 3)
    assert cliques[2].variables == (0, 1)
    assert cliques[3].variables == (4,)
    width = bounds.overall_upper - bounds.overall_lower
    ball = dict(joint.generators.generators)["h1_ball"]
    assert ball((0, 0, 0, 0, 0)) == pytest.approx(4.0 + width**2)


def test_assemble_sizes_at_low_order(problems):
    _, scaled, _ = problems["disk"]
    bounds = compute_bounds(scaled.objectives, omega_generators(scaled))
    joint = build_joint(scaled, bounds, "dense")
    program = assemble(joint, 2)
    assert len(program.coefficient_basis) == 15  # degree-4 coefficients in 2 vars
    assert program.membership.problem.n_rows == 126  # binomial(5 + 4, 4)
    assert program.membership.problem.n_free == 15
    assert len(program.moment_vector) == 15


def test_assemble_rejects_too_low_order(problems):
    _, scaled, _ = problems["rational"]
    bounds = compute_bounds(scaled.objectives, omega_generators(scaled))
    joint = build_joint(scaled, bounds, "dense")
    assert joint.min_order() == 3  # the degree-5 comparison row needs 2k >= 5
    with pytest.raises(OrderTooLowError):
        assemble(joint, 2)


def test_unit_box_required():
    spec = from_dict(
        {
            "n": 1,
            "objectives": [{"p": [[1.0, [1]]]}],
            "constraints": [],
            "box": [[0.0, 2.0]],
        }
    )
    with pytest.raises(ValueError, match="unit box|rescaled"):
        approximate_psi(spec, 2)


def test_low_order_run_on_disk(psi_cache):
    run = psi_cache.get("disk", 2)
    assert run.verified
    assert run.solver_status.value == "optimal"
    assert run.psi.dim == 2
    assert run.psi.degree <= 4
    # interior weakly efficient point: the true value is 0, the estimator
    # must stay above up to certificate tolerance
    assert run.psi(np.array([-0.5, -0.5])) >= -1e-5
    assert run.psi(np.array([0.0, 0.0])) >= -1e-5
    # the reported objective equals the box average of the coefficients
    table = moments(2, 4)
    acc = sum(c * table[a] for a, c in run.psi.sorted_terms())
    assert run.rho == pytest.approx(acc, abs=1e-9)


def test_low_order_rho_value_frozen(psi_cache):
    # pinned from an independent run of the same pipeline; guards against
    # silent assembly regressions
    run = psi_cache.get("disk", 2)
    assert run.rho == pytest.approx(0.2475, abs=5e-4)


def test_region_membership_flags(psi_cache, problems):
    run = psi_cache.get("disk", 2)
    pts = np.array([[-0.5, -0.5], [1.0, 1.0]])
    flags = run.region_membership(pts, 0.3)
    assert flags.dtype == bool
    assert flags[0]


def test_invalid_mode_rejected(problems):
    _, scaled, _ = problems["disk"]
    with pytest.raises(ValueError, match="mode"):
        approximate_psi(scaled, 2, "block")
