"""Problem descriptions: rational objectives over a basic closed feasible set.

The canonical instance is

    minimize (p_1/q_1, ..., p_m/q_m)  over  {x : g_j(x) >= 0} inside a box,

with every q_i positive on the feasible set.  Internally all computation runs
on the box rescaled to [-1, 1]^n; :func:`rescale` produces that form together
with the affine map back to the user's coordinates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .certificates import GeneratorSet
from .poly import Polynomial


class ProblemFormatError(Exception):
    """The problem description failed structural validation."""


class AssumptionError(Exception):
    """A standing assumption (nonempty feasible set, positive denominators)
    could not be confirmed."""


@dataclass(eq=False)
class ProblemSpec:
    """A vector optimization instance.

    objectives: list of (p, q) pairs of Polynomials, meaning p/q
    constraints: polynomial inequalities g >= 0
    box: per-variable (lo, hi) bounds defining the ambient box
    """

    n: int
    objectives: list
    constraints: list
    box: list

    @property
    def m(self) -> int:
        return len(self.objectives)

    def is_unit_box(self, tol: float = 1e-12) -> bool:
        return all(
            abs(lo + 1.0) <= tol and abs(hi - 1.0) <= tol for lo, hi in self.box
        )

    def feasibility_mask(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        """Boolean mask of points satisfying every constraint up to tol."""
        points = np.asarray(points, dtype=float)
        mask = np.ones(points.shape[0], dtype=bool)
        for g in self.constraints:
            mask &= g.eval_many(points) >= -tol
        return mask

    def objective_values(self, points: np.ndarray) -> np.ndarray:
        """Objective values at an (N, n) array, returned with shape (m, N)."""
        points = np.asarray(points, dtype=float)
        out = np.empty((self.m, points.shape[0]))
        for i, (p, q) in enumerate(self.objectives):
            out[i] = p.eval_many(points) / q.eval_many(points)
        return out


def _parse_terms(raw, n: int, where: str) -> Polynomial:
    if not isinstance(raw, list) or not raw:
        raise ProblemFormatError(f"{where}: expected a nonempty list of terms")
    pairs = []
    for t, item in enumerate(raw):
        if (
            not isinstance(item, list)
            or len(item) != 2
            or not isinstance(item[1], list)
        ):
            raise ProblemFormatError(
                f"{where}, term {t}: expected [coefficient, [exponents]]"
            )
        coef, expo = item
        if not isinstance(coef, (int, float)) or isinstance(coef, bool):
            raise ProblemFormatError(f"{where}, term {t}: coefficient must be a number")
        if len(expo) != n:
            raise ProblemFormatError(
                f"{where}, term {t}: exponent vector has length {len(expo)}, "
                f"expected {n}"
            )
        if any(not isinstance(a, int) or isinstance(a, bool) or a < 0 for a in expo):
            raise ProblemFormatError(
                f"{where}, term {t}: exponents must be nonnegative integers"
            )
        pairs.append([coef, expo])
    return Polynomial.from_terms(n, pairs)


def loads(text: str) -> ProblemSpec:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"invalid JSON: {exc}") from exc
    return from_dict(data)


def load(path) -> ProblemSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())


def from_dict(data) -> ProblemSpec:
    if not isinstance(data, dict):
        raise ProblemFormatError("top level must be a JSON object")
    unknown = set(data) - {"n", "objectives", "constraints", "box"}
    if unknown:
        raise ProblemFormatError(f"unknown fields: {sorted(unknown)}")
    n = data.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ProblemFormatError("'n' must be a positive integer")

    raw_obj = data.get("objectives")
    if not isinstance(raw_obj, list) or not raw_obj:
        raise ProblemFormatError("'objectives' must be a nonempty list")
    objectives = []
    for i, item in enumerate(raw_obj):
        if not isinstance(item, dict) or "p" not in item:
            raise ProblemFormatError(f"objective {i}: expected an object with 'p'")
        extra = set(item) - {"p", "q"}
        if extra:
            raise ProblemFormatError(f"objective {i}: unknown fields {sorted(extra)}")
        p = _parse_terms(item["p"], n, f"objective {i}, numerator")
        if "q" in item:
            q = _parse_terms(item["q"], n, f"objective {i}, denominator")
        else:
            q = Polynomial.constant(n, 1.0)
        objectives.append((p, q))

    raw_con = data.get("constraints", [])
    if not isinstance(raw_con, list):
        raise ProblemFormatError("'constraints' must be a list")
    constraints = [
        _parse_terms(item, n, f"constraint {j}") for j, item in enumerate(raw_con)
    ]

    raw_box = data.get("box")
    if not isinstance(raw_box, list) or len(raw_box) != n:
        raise ProblemFormatError(f"'box' must list {n} [lo, hi] pairs")
    box = []
    for j, pair in enumerate(raw_box):
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in pair)
        ):
            raise ProblemFormatError(f"box entry {j}: expected [lo, hi]")
        lo, hi = float(pair[0]), float(pair[1])
        if not lo < hi:
            raise ProblemFormatError(f"box entry {j}: need lo < hi, got [{lo}, {hi}]")
        box.append((lo, hi))

    return ProblemSpec(n=n, objectives=objectives, constraints=constraints, box=box)


def to_dict(spec: ProblemSpec) -> dict:
    return {
        "n": spec.n,
        "objectives": [
            {"p": p.to_terms(), "q": q.to_terms()} for p, q in spec.objectives
        ],
        "constraints": [g.to_terms() for g in spec.constraints],
        "box": [[lo, hi] for lo, hi in spec.box],
    }


def check_assumptions(spec: ProblemSpec, resolution: int = 51):
    """Coarse grid screen for a nonempty feasible set and positive denominators.

    This is a heuristic safety net, not a proof: it evaluates on a lattice
    with ``resolution`` points per axis over the box.
    """
    axes = [np.linspace(lo, hi, resolution) for lo, hi in spec.box]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    mask = spec.feasibility_mask(pts)
    if not mask.any():
        raise AssumptionError(
            f"no feasible point found on a {resolution}^{spec.n} grid over the box"
        )
    feas = pts[mask]
    for i, (_, q) in enumerate(spec.objectives):
        qv = q.eval_many(feas)
        j = int(np.argmin(qv))
        if qv[j] <= 1e-12:
            raise AssumptionError(
                f"denominator of objective {i + 1} is not positive near "
                f"{feas[j].tolist()} (value {qv[j]:.3e})"
            )


@dataclass(frozen=True)
class AffineMap:
    """Coordinate change  original = center + halfwidth * scaled."""

    center: tuple
    halfwidth: tuple

    def to_original(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts * np.asarray(self.halfwidth) + np.asarray(self.center)

    def to_scaled(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return (pts - np.asarray(self.center)) / np.asarray(self.halfwidth)

    @property
    def volume_factor(self) -> float:
        return float(np.prod(self.halfwidth))

    def is_identity(self, tol: float = 1e-12) -> bool:
        return all(abs(c) <= tol for c in self.center) and all(
            abs(h - 1.0) <= tol for h in self.halfwidth
        )


def rescale(spec: ProblemSpec):
    """Map the box onto [-1, 1]^n.  Returns (scaled spec, AffineMap back)."""
    center = tuple((lo + hi) / 2.0 for lo, hi in spec.box)
    halfwidth = tuple((hi - lo) / 2.0 for lo, hi in spec.box)
    amap = AffineMap(center=center, halfwidth=halfwidth)
    shift = np.array(center)
    scale = np.array(halfwidth)
    objectives = [
        (p.compose_affine(shift, scale), q.compose_affine(shift, scale))
        for p, q in spec.objectives
    ]
    constraints = [g.compose_affine(shift, scale) for g in spec.constraints]
    scaled = ProblemSpec(
        n=spec.n,
        objectives=objectives,
        constraints=constraints,
        box=[(-1.0, 1.0)] * spec.n,
    )
    return scaled, amap


def omega_generators(spec: ProblemSpec) -> GeneratorSet:
    """Constraint polynomials plus the box inequalities 1 - x_j^2.

    Only meaningful for a spec already rescaled to the unit box; the box rows
    make the generator set Archimedean.
    """
    if not spec.is_unit_box():
        raise ValueError("omega_generators expects the problem rescaled to [-1,1]^n")
    gens = [(f"g{j + 1}", g) for j, g in enumerate(spec.constraints)]
    one = Polynomial.constant(spec.n, 1.0)
    for j in range(spec.n):
        xj = Polynomial.variable(spec.n, j)
        gens.append((f"box{j + 1}", one - xj * xj))
    return GeneratorSet(spec.n, gens)
