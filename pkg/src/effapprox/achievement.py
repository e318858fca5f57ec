"""Polynomial over-estimators of the achievement function.

For a vector problem with objectives f_i = p_i/q_i on a feasible set Omega
inside the unit box, the achievement function

    psi(x) = sup_{y in Omega} min_i (f_i(x) - f_i(y))

vanishes exactly on the weakly efficient points.  Clearing denominators turns
"phi(x) - z >= 0 on the graph set K" into polynomial constraints on a joint
ring in (x, y, z); restricting to order-k certificates and minimizing the
integral of phi over the box yields a decreasing family of polynomial
over-estimators psi_k whose sublevel sets approximate the weakly efficient
set from inside an epsilon-relaxation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .certificates import (
    Clique,
    CertificateReport,
    GeneratorSet,
    GramCertificate,
    MembershipSystem,
    OrderTooLowError,
    ParamTarget,
    SolverError,
    assemble_membership,
    compute_bounds,
    verify_certificate,
    Bounds,
)
from .poly import Exponent, MonomialBasis, Polynomial, basis, monomials_up_to
from .problem import ProblemSpec, omega_generators
from .sdp import SdpResiduals, SdpStatus, solve


@dataclass
class MomentTable:
    """Monomial averages over the unit box under the scaled Lebesgue measure
    (total mass 1 per axis): odd exponents vanish, even give prod 1/(a_i+1)."""

    dim: int
    degree: int
    values: dict

    def __getitem__(self, alpha) -> float:
        return self.values[tuple(alpha)]


def moments(dim: int, degree: int) -> MomentTable:
    values = {}
    for alpha in monomials_up_to(dim, degree):
        if any(a % 2 for a in alpha):
            values[alpha] = 0.0
        else:
            v = 1.0
            for a in alpha:
                v /= a + 1
            values[alpha] = v
    return MomentTable(dim=dim, degree=degree, values=values)


@dataclass
class JointSystem:
    """Generators of the graph set K in the joint ring (x_1..x_n, y_1..y_n, z)."""

    n: int
    m: int
    dim: int
    mode: str
    generators: GeneratorSet
    bounds: Bounds
    z_index: int
    group_counts: dict

    def min_order(self) -> int:
        return max(
            math.ceil(g.degree / 2) for _, g in self.generators.generators
        )


def build_joint(spec: ProblemSpec, bounds: Bounds, mode: str = "dense") -> JointSystem:
    """Assemble the joint-ring inequality system defining K.

    Groups: the cleared-denominator objective comparisons h1 (plus a redundant
    ball in sparse mode), feasibility of y including its box rows (h2), the x
    box rows (h3), and the interval constraint on z (h4).  In sparse mode the
    generators are organized into cliques {x,y,z}, {y}, {x}, {z}.
    """
    if mode not in ("dense", "sparse"):
        raise ValueError(f"mode must be 'dense' or 'sparse', got {mode!r}")
    if not spec.is_unit_box():
        raise ValueError("build_joint expects the problem rescaled to [-1,1]^n")
    n = spec.n
    dim = 2 * n + 1
    x_map = list(range(n))
    y_map = list(range(n, 2 * n))
    z_index = 2 * n
    z = Polynomial.variable(dim, z_index)
    one = Polynomial.constant(dim, 1.0)

    flo = bounds.overall_lower
    fhi = bounds.overall_upper
    width = fhi - flo

    gens = []
    for i, (p, q) in enumerate(spec.objectives):
        px, qx = p.embed(x_map, dim), q.embed(x_map, dim)
        py, qy = p.embed(y_map, dim), q.embed(y_map, dim)
        h = px * qy - py * qx - z * (qx * qy)
        gens.append((f"h1_{i + 1}", h))
    if mode == "sparse":
        ball = Polynomial.constant(dim, 2.0 * n + width**2)
        for j in range(2 * n):
            v = Polynomial.variable(dim, j)
            ball = ball - v * v
        ball = ball - z * z
        gens.append(("h1_ball", ball))
    n_h1 = len(gens)

    for j, g in enumerate(spec.constraints):
        gens.append((f"h2_{j + 1}", g.embed(y_map, dim)))
    for j in range(n):
        yj = Polynomial.variable(dim, y_map[j])
        gens.append((f"h2_{len(spec.constraints) + j + 1}", one - yj * yj))
    n_h2 = len(spec.constraints) + n

    for j in range(n):
        xj = Polynomial.variable(dim, x_map[j])
        gens.append((f"h3_{j + 1}", one - xj * xj))
    gens.append(("h4_1", Polynomial.constant(dim, width**2) - z * z))

    cliques = None
    if mode == "sparse":
        i0 = 0
        idx_h1 = tuple(range(i0, i0 + n_h1))
        idx_h2 = tuple(range(i0 + n_h1, i0 + n_h1 + n_h2))
        idx_h3 = tuple(range(i0 + n_h1 + n_h2, i0 + n_h1 + n_h2 + n))
        idx_h4 = (i0 + n_h1 + n_h2 + n,)
        cliques = [
            Clique(variables=tuple(range(dim)), generators=idx_h1),
            Clique(variables=tuple(y_map), generators=idx_h2),
            Clique(variables=tuple(x_map), generators=idx_h3),
            Clique(variables=(z_index,), generators=idx_h4),
        ]

    gset = GeneratorSet(dim=dim, generators=gens, cliques=cliques)
    return JointSystem(
        n=n,
        m=spec.m,
        dim=dim,
        mode=mode,
        generators=gset,
        bounds=bounds,
        z_index=z_index,
        group_counts={"h1": n_h1, "h2": n_h2, "h3": n, "h4": 1},
    )


@dataclass
class AssembledProgram:
    """Order-k program: find phi of degree <= 2k minimizing its box average
    subject to phi(x) - z lying in the truncated quadratic module of K."""

    membership: MembershipSystem
    coefficient_basis: MonomialBasis
    moment_vector: np.ndarray
    joint: JointSystem
    order: int


def assemble(
    joint: JointSystem, k: int, table: MomentTable | None = None
) -> AssembledProgram:
    if k < joint.min_order():
        raise OrderTooLowError(
            f"order {k} below the generator degree floor {joint.min_order()}"
        )
    n = joint.n
    coeff_basis = basis(n, 2 * k)
    if table is None:
        table = moments(n, 2 * k)
    if table.dim != n or table.degree < 2 * k:
        raise ValueError("moment table does not cover the coefficient basis")

    x_map = list(range(n))
    z = Polynomial.variable(joint.dim, joint.z_index)
    coeff_polys = [
        Polynomial.monomial(n, alpha).embed(x_map, joint.dim)
        for alpha in coeff_basis
    ]
    target = ParamTarget(dim=joint.dim, const=-1.0 * z, coeffs=coeff_polys)
    system = assemble_membership(target, joint.generators, k)
    gamma = np.array([table[alpha] for alpha in coeff_basis])
    system.problem.obj_free = [float(v) for v in gamma]
    return AssembledProgram(
        membership=system,
        coefficient_basis=coeff_basis,
        moment_vector=gamma,
        joint=joint,
        order=k,
    )


@dataclass
class ApproximationResult:
    """Outcome of one order-k run: the over-estimator and its certificate."""

    psi: Polynomial
    rho: float
    order: int
    mode: str
    bounds: Bounds
    certificate: GramCertificate
    report: CertificateReport
    solver_status: SdpStatus
    solver_residuals: SdpResiduals
    iterations: int
    verified: bool

    def region_membership(self, points: np.ndarray, delta: float) -> np.ndarray:
        return self.psi.eval_many(points) <= delta


def approximate_psi(
    spec: ProblemSpec,
    k: int,
    mode: str = "dense",
    tol: float = 1e-8,
    bounds: Bounds | None = None,
    bound_order: int | None = None,
) -> ApproximationResult:
    """Compute the order-k polynomial over-estimator of the achievement function.

    The problem must already be rescaled to the unit box.  Bounds on the
    objectives are certified first (unless supplied), the joint program is
    assembled in the requested mode and handed to the interior-point solver,
    and the resulting certificate is re-verified by direct expansion; a failed
    verification is reported via ``verified=False``.
    """
    if not spec.is_unit_box():
        raise ValueError("approximate_psi expects the problem rescaled to [-1,1]^n")
    if bounds is None:
        gens_x = omega_generators(spec)
        bounds = compute_bounds(spec.objectives, gens_x, k=bound_order, tol=tol)
    joint = build_joint(spec, bounds, mode)
    program = assemble(joint, k)
    solution = solve(program.membership.problem, tol=tol)
    if solution.status not in (SdpStatus.OPTIMAL,):
        raise SolverError(
            f"order-{k} {mode} solve ended with status {solution.status.value} "
            f"(residuals {solution.residuals})"
        )
    coeffs = {
        alpha: float(c)
        for alpha, c in zip(program.coefficient_basis, solution.free_values)
    }
    psi = Polynomial(spec.n, coeffs).cleanup(1e-12)
    rho = float(program.moment_vector @ solution.free_values)
    certificate = program.membership.certificate(solution)
    z = Polynomial.variable(joint.dim, joint.z_index)
    check_target = psi.embed(list(range(spec.n)), joint.dim) - z
    report = verify_certificate(check_target, certificate)
    return ApproximationResult(
        psi=psi,
        rho=rho,
        order=k,
        mode=mode,
        bounds=bounds,
        certificate=certificate,
        report=report,
        solver_status=solution.status,
        solver_residuals=solution.residuals,
        iterations=solution.iterations,
        verified=report.passed,
    )
