"""Brute-force grid oracle for the achievement function and membership tests.

Everything here is independent of the certificate machinery: values come from
enumerating a lattice over the box, so they are lower bounds on suprema and
one-sided membership witnesses.  Used for cross-checking and for volume
estimates.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field

import numpy as np

from .problem import ProblemSpec

FEAS_TOL = 1e-12


@dataclass
class Grid:
    """Uniform lattice over a box with the feasible sublattice cached."""

    box: list
    resolution: int
    points: np.ndarray
    feasible: np.ndarray
    spacing: np.ndarray
    feasible_mask: np.ndarray
    _tables: "weakref.WeakKeyDictionary" = field(
        default_factory=weakref.WeakKeyDictionary, repr=False
    )

    @classmethod
    def on_box(cls, box, resolution: int, spec: ProblemSpec | None = None) -> "Grid":
        if resolution < 2:
            raise ValueError("resolution must be at least 2")
        box = [(float(lo), float(hi)) for lo, hi in box]
        axes = [np.linspace(lo, hi, resolution) for lo, hi in box]
        mesh = np.meshgrid(*axes, indexing="ij")
        points = np.stack([m.ravel() for m in mesh], axis=-1)
        if spec is not None:
            mask = spec.feasibility_mask(points, tol=FEAS_TOL)
        else:
            mask = np.ones(points.shape[0], dtype=bool)
        spacing = np.array([(hi - lo) / (resolution - 1) for lo, hi in box])
        return cls(
            box=box,
            resolution=resolution,
            points=points,
            feasible=points[mask],
            spacing=spacing,
            feasible_mask=mask,
        )

    @classmethod
    def for_problem(cls, spec: ProblemSpec, resolution: int) -> "Grid":
        return cls.on_box(spec.box, resolution, spec=spec)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def objective_table(self, spec: ProblemSpec) -> np.ndarray:
        """Objective values on the feasible sublattice, shape (m, N_feasible)."""
        table = self._tables.get(spec)
        if table is None:
            table = spec.objective_values(self.feasible)
            self._tables[spec] = table
        return table


@dataclass(frozen=True)
class OracleValue:
    point: tuple
    value: float


def psi_oracle_many(
    spec: ProblemSpec,
    points: np.ndarray,
    grid: Grid,
    z_interval: tuple | None = None,
    chunk: int = 256,
) -> np.ndarray:
    """Lower bounds on the achievement function at each point.

    Maximizes min_i (f_i(x) - f_i(y)) over feasible lattice points y, plus x
    itself when feasible (so the value is >= 0, and exact 0 is attainable, on
    the feasible set).  With ``z_interval`` the comparison value is clamped
    into [lo, hi], matching the graph-set formulation: fibers below lo are
    discarded and the result caps at hi.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != spec.n:
        raise ValueError(f"points must have shape (N, {spec.n})")
    F = grid.objective_table(spec)  # (m, Ny)
    if F.shape[1] == 0:
        raise ValueError("grid has no feasible points")
    fx_all = spec.objective_values(points)  # (m, N)
    feas = spec.feasibility_mask(points, tol=FEAS_TOL)
    out = np.empty(points.shape[0])
    for s in range(0, points.shape[0], chunk):
        e = min(s + chunk, points.shape[0])
        fx = fx_all[:, s:e]  # (m, c)
        zy = fx[0][:, None] - F[0][None, :]  # (c, Ny)
        for i in range(1, spec.m):
            np.minimum(zy, fx[i][:, None] - F[i][None, :], out=zy)
        if z_interval is not None:
            lo, hi = z_interval
            zy = np.where(zy >= lo, np.minimum(zy, hi), -np.inf)
        best = zy.max(axis=1)
        # a feasible x competes as its own comparison point with value 0
        best = np.where(feas[s:e], np.maximum(best, 0.0), best)
        out[s:e] = best
    return out


def psi_oracle(
    spec: ProblemSpec, x, grid: Grid, z_interval: tuple | None = None
) -> OracleValue:
    value = psi_oracle_many(spec, np.asarray(x, dtype=float)[None, :], grid, z_interval)
    return OracleValue(point=tuple(float(v) for v in np.asarray(x)), value=float(value[0]))


def weakly_eps_member_many(
    spec: ProblemSpec,
    points: np.ndarray,
    eps,
    grid: Grid,
    chunk: int = 256,
) -> np.ndarray:
    """Grid test for membership in the epsilon-relaxed weakly efficient set.

    A point fails when it is infeasible or some feasible lattice point
    improves every objective by more than the corresponding eps.  Because only
    lattice competitors are examined, failure is a sound witness while success
    is up to grid resolution.
    """
    points = np.asarray(points, dtype=float)
    eps = np.broadcast_to(np.asarray(eps, dtype=float), (spec.m,))
    F = grid.objective_table(spec)  # (m, Ny)
    fx_all = spec.objective_values(points)
    feas = spec.feasibility_mask(points, tol=FEAS_TOL)
    out = np.zeros(points.shape[0], dtype=bool)
    for s in range(0, points.shape[0], chunk):
        e = min(s + chunk, points.shape[0])
        fx = fx_all[:, s:e]
        # dominated: exists y with f(y) < f(x) - eps in every objective
        better = F[0][None, :] < (fx[0] - eps[0])[:, None]
        for i in range(1, spec.m):
            better &= F[i][None, :] < (fx[i] - eps[i])[:, None]
        dominated = better.any(axis=1)
        out[s:e] = feas[s:e] & ~dominated
    return out


def weakly_eps_member(spec: ProblemSpec, x, eps, grid: Grid) -> bool:
    res = weakly_eps_member_many(spec, np.asarray(x, dtype=float)[None, :], eps, grid)
    return bool(res[0])


def grid_volume(mask: np.ndarray, grid: Grid) -> float:
    """Counting-measure volume estimate: satisfied points times cell volume."""
    mask = np.asarray(mask)
    if mask.dtype != bool:
        raise ValueError("grid_volume expects a boolean mask")
    return float(np.count_nonzero(mask)) * grid.cell_volume


def lipschitz_slack(spec: ProblemSpec, grid: Grid) -> float:
    """Crude tolerance L*h for grid tests: max objective gradient norm on the
    feasible lattice times the largest spacing."""
    pts = grid.feasible
    if pts.shape[0] == 0:
        return 0.0
    worst = 0.0
    for p, q in spec.objectives:
        pv = p.eval_many(pts)
        qv = q.eval_many(pts)
        grads = np.empty((spec.n, pts.shape[0]))
        for j in range(spec.n):
            dp = p.partial(j).eval_many(pts)
            dq = q.partial(j).eval_many(pts)
            grads[j] = (dp * qv - pv * dq) / (qv * qv)
        worst = max(worst, float(np.max(np.linalg.norm(grads, axis=0))))
    return worst * float(np.max(grid.spacing))
