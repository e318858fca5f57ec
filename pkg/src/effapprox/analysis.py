"""Queries on the approximating region A(delta, k) = {x feasible : psi_k <= delta}.

Includes grid-backed containment checks against the oracle, image sampling
for plots and CSV export, and constrained minimization over the region via a
moment relaxation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .certificates import GeneratorSet, SolverError
from .oracle import Grid, grid_volume, lipschitz_slack, weakly_eps_member_many
from .poly import Polynomial, basis, monomials_up_to
from .problem import ProblemSpec
from .sdp import SdpProblem, SdpStatus, solve


@dataclass
class RegionQuery:
    """A problem together with one computed over-estimator and a threshold."""

    spec: ProblemSpec
    psi: Polynomial
    delta: float
    order: int
    mode: str


def in_region_many(query: RegionQuery, points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    feas = query.spec.feasibility_mask(points)
    return feas & (query.psi.eval_many(points) <= query.delta)


def in_region(query: RegionQuery, x) -> bool:
    return bool(in_region_many(query, np.asarray(x, dtype=float)[None, :])[0])


@dataclass
class ImageSample:
    """Grid points mapped through the objectives, with membership flags.

    CSV column order is fixed: x1..xn, f1..fm, in_omega, in_A.
    """

    points: np.ndarray
    values: np.ndarray  # (N, m)
    in_omega: np.ndarray
    in_region: np.ndarray

    def to_csv(self) -> str:
        n = self.points.shape[1]
        m = self.values.shape[1]
        header = (
            [f"x{i + 1}" for i in range(n)]
            + [f"f{i + 1}" for i in range(m)]
            + ["in_omega", "in_A"]
        )
        lines = [",".join(header)]
        for row in range(self.points.shape[0]):
            cells = [f"{v:.17g}" for v in self.points[row]]
            cells += [f"{v:.17g}" for v in self.values[row]]
            cells.append(str(int(self.in_omega[row])))
            cells.append(str(int(self.in_region[row])))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def sample_image(query: RegionQuery, grid: Grid) -> ImageSample:
    """Evaluate objectives and membership over the whole lattice."""
    pts = grid.points
    values = query.spec.objective_values(pts).T
    in_omega = grid.feasible_mask
    region = in_omega & (query.psi.eval_many(pts) <= query.delta)
    return ImageSample(
        points=pts, values=values, in_omega=in_omega, in_region=region
    )


@dataclass
class ContainmentReport:
    violations: int
    region_count: int
    reference_count: int
    region_volume: float
    reference_volume: float
    ratio: float
    slack: float
    delta: float
    order: int
    mode: str


def containment_report(
    query: RegionQuery, grid: Grid, slack: float | None = None
) -> ContainmentReport:
    """Check A(delta, k) against the grid estimate of the relaxed efficient set.

    Every region point must pass the oracle membership test at eps = delta
    plus a small slack covering certificate tolerance and grid spacing; the
    reference set uses eps = delta exactly.
    """
    if slack is None:
        slack = max(lipschitz_slack(query.spec, grid), 1e-6)
    feas = grid.feasible
    region_mask = query.psi.eval_many(feas) <= query.delta
    region_pts = feas[region_mask]
    member = weakly_eps_member_many(
        query.spec, region_pts, query.delta + slack, grid
    )
    violations = int(np.count_nonzero(~member))
    reference_mask = weakly_eps_member_many(query.spec, feas, query.delta, grid)
    region_volume = grid_volume(region_mask, grid)
    reference_volume = grid_volume(reference_mask, grid)
    ratio = region_volume / reference_volume if reference_volume > 0 else 0.0
    return ContainmentReport(
        violations=violations,
        region_count=int(np.count_nonzero(region_mask)),
        reference_count=int(np.count_nonzero(reference_mask)),
        region_volume=region_volume,
        reference_volume=reference_volume,
        ratio=ratio,
        slack=slack,
        delta=query.delta,
        order=query.order,
        mode=query.mode,
    )


@dataclass
class MinimizationResult:
    bound: float
    candidate: np.ndarray
    candidate_value: float
    candidate_feasible: bool
    gap: float
    order: int
    iterations: int


def minimize_over(
    objective: Polynomial,
    gens: GeneratorSet,
    order: int | None = None,
    tol: float = 1e-8,
    feas_tol: float = 1e-6,
) -> MinimizationResult:
    """Moment relaxation of  min objective(x)  over  {x : h_j(x) >= 0}.

    Pseudo-moments up to degree 2*order are tied to a PSD moment matrix and
    one localizing block per generator; the optimal value is a lower bound on
    the true minimum and the degree-one moments give a candidate minimizer
    (exact when the relaxation has a representing measure).
    """
    n = gens.dim
    floor = max(
        [math.ceil(objective.degree / 2)]
        + [math.ceil(g.degree / 2) for _, g in gens.generators]
    )
    if order is None:
        order = floor
    if order < floor:
        raise ValueError(f"order {order} below the degree floor {floor}")

    y_exponents = monomials_up_to(n, 2 * order)
    y_index = {a: i for i, a in enumerate(y_exponents)}
    problem = SdpProblem(block_dims=[], n_free=len(y_exponents))

    def tie_block(block_index: int, half_basis, generator: Polynomial | None):
        exps = half_basis.exponents
        for i1 in range(len(exps)):
            for i2 in range(i1, len(exps)):
                row = problem.add_row(0.0)
                problem.set_entry(
                    row, block_index, i1, i2, 1.0 if i1 == i2 else 0.5
                )
                pair = tuple(a + b for a, b in zip(exps[i1], exps[i2]))
                if generator is None:
                    problem.set_free_entry(row, y_index[pair], -1.0)
                else:
                    for tau, c in generator.sorted_terms():
                        mono = tuple(a + b for a, b in zip(pair, tau))
                        problem.set_free_entry(row, y_index[mono], -c)

    moment_basis = basis(n, order)
    problem.block_dims.append(len(moment_basis))
    tie_block(0, moment_basis, None)
    for label, g in gens.generators:
        half = order - math.ceil(g.degree / 2)
        loc_basis = basis(n, half)
        problem.block_dims.append(len(loc_basis))
        tie_block(len(problem.block_dims) - 1, loc_basis, g)

    row = problem.add_row(1.0)  # normalization <1> = 1
    problem.set_free_entry(row, y_index[(0,) * n], 1.0)

    obj = [0.0] * len(y_exponents)
    for alpha, c in objective.sorted_terms():
        if alpha not in y_index:
            raise ValueError(
                f"objective degree {objective.degree} exceeds 2*order = {2 * order}"
            )
        obj[y_index[alpha]] = c
    problem.obj_free = obj

    solution = solve(problem, tol=tol)
    if solution.status == SdpStatus.INFEASIBLE:
        raise SolverError(
            f"moment relaxation infeasible at order {order}; "
            "the feasible region may be empty"
        )
    if solution.status != SdpStatus.OPTIMAL:
        raise SolverError(
            f"minimization solve ended with status {solution.status.value}"
        )

    y = solution.free_values
    candidate = np.array(
        [y[y_index[tuple(1 if j == i else 0 for j in range(n))]] for i in range(n)]
    )
    cand_value = float(objective(candidate))
    feasible = all(g(candidate) >= -feas_tol for _, g in gens.generators)
    bound = float(solution.primal_obj)
    return MinimizationResult(
        bound=bound,
        candidate=candidate,
        candidate_value=cand_value,
        candidate_feasible=feasible,
        gap=cand_value - bound,
        order=order,
        iterations=solution.iterations,
    )
