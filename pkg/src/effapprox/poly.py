"""Sparse multivariate polynomials with float coefficients.

Terms are keyed by exponent tuples.  Coefficients that are exactly zero are
never stored; approximate cleanup is a separate explicit operation so that
solver round-off can be stripped without surprising exact arithmetic.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

Exponent = tuple[int, ...]


def _check_exponent(alpha, dim: int) -> Exponent:
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != dim:
        raise ValueError(f"exponent {alpha} has length {len(alpha)}, expected {dim}")
    if any(a < 0 for a in alpha):
        raise ValueError(f"exponent {alpha} has a negative entry")
    return alpha


class Polynomial:
    """Polynomial in ``dim`` variables stored as {exponent: coefficient}."""

    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms=None):
        if dim < 0:
            raise ValueError("dimension must be nonnegative")
        self.dim = int(dim)
        clean: dict[Exponent, float] = {}
        if terms:
            for alpha, c in terms.items() if isinstance(terms, dict) else terms:
                alpha = _check_exponent(alpha, self.dim)
                c = float(c)
                if c != 0.0:
                    acc = clean.get(alpha, 0.0) + c
                    if acc != 0.0:
                        clean[alpha] = acc
                    elif alpha in clean:
                        del clean[alpha]
        self.terms = clean

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, dim: int) -> "Polynomial":
        return cls(dim)

    @classmethod
    def constant(cls, dim: int, value: float) -> "Polynomial":
        return cls(dim, {(0,) * dim: float(value)})

    @classmethod
    def variable(cls, dim: int, index: int) -> "Polynomial":
        if not 0 <= index < dim:
            raise ValueError(f"variable index {index} out of range for dimension {dim}")
        alpha = tuple(1 if i == index else 0 for i in range(dim))
        return cls(dim, {alpha: 1.0})

    @classmethod
    def monomial(cls, dim: int, alpha, coefficient: float = 1.0) -> "Polynomial":
        return cls(dim, {tuple(alpha): float(coefficient)})

    @classmethod
    def from_terms(cls, dim: int, term_list) -> "Polynomial":
        """Build from ``[[coefficient, [a_1, ..., a_dim]], ...]``."""
        return cls(dim, [(tuple(alpha), c) for c, alpha in term_list])

    def to_terms(self) -> list:
        """Inverse of :meth:`from_terms`; terms in graded lex order."""
        return [[self.terms[a], list(a)] for a in sorted(self.terms, key=grlex_key)]

    # -- queries -----------------------------------------------------------

    @property
    def degree(self) -> int:
        """Total degree; the zero polynomial reports degree 0."""
        if not self.terms:
            return 0
        return max(sum(a) for a in self.terms)

    def coeff(self, alpha) -> float:
        return self.terms.get(tuple(alpha), 0.0)

    def is_zero(self) -> bool:
        return not self.terms

    def sorted_terms(self) -> list[tuple[Exponent, float]]:
        return [(a, self.terms[a]) for a in sorted(self.terms, key=grlex_key)]

    def support_variables(self) -> tuple[int, ...]:
        """Indices of variables that actually appear."""
        used = set()
        for alpha in self.terms:
            for i, a in enumerate(alpha):
                if a:
                    used.add(i)
        return tuple(sorted(used))

    # -- arithmetic --------------------------------------------------------

    def _require_same_space(self, other: "Polynomial"):
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.dim, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._require_same_space(other)
        out = dict(self.terms)
        for alpha, c in other.terms.items():
            acc = out.get(alpha, 0.0) + c
            if acc != 0.0:
                out[alpha] = acc
            elif alpha in out:
                del out[alpha]
        res = Polynomial(self.dim)
        res.terms = out
        return res

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self):
        res = Polynomial(self.dim)
        res.terms = {a: -c for a, c in self.terms.items()}
        return res

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.dim, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.__add__(other.__neg__())

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            other = float(other)
            if other == 0.0:
                return Polynomial.zero(self.dim)
            res = Polynomial(self.dim)
            res.terms = {a: c * other for a, c in self.terms.items()}
            return res
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._require_same_space(other)
        out: dict[Exponent, float] = {}
        for a, ca in self.terms.items():
            for b, cb in other.terms.items():
                key = tuple(x + y for x, y in zip(a, b))
                acc = out.get(key, 0.0) + ca * cb
                if acc != 0.0:
                    out[key] = acc
                elif key in out:
                    del out[key]
        res = Polynomial(self.dim)
        res.terms = out
        return res

    def __rmul__(self, other):
        return self.__mul__(other)

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("only nonnegative integer powers are supported")
        res = Polynomial.constant(self.dim, 1.0)
        for _ in range(exponent):
            res = res * self
        return res

    # -- evaluation --------------------------------------------------------

    def __call__(self, point) -> float:
        point = np.asarray(point, dtype=float)
        if point.shape != (self.dim,):
            raise ValueError(f"point has shape {point.shape}, expected ({self.dim},)")
        total = 0.0
        for alpha, c in self.sorted_terms():
            v = c
            for x, a in zip(point, alpha):
                if a:
                    v *= x**a
            total += v
        return total

    def eval_many(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at an (N, dim) array of points, returning shape (N,)."""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != self.dim:
            raise ValueError(f"points must have shape (N, {self.dim})")
        if not self.terms:
            return np.zeros(points.shape[0])
        items = self.sorted_terms()
        expo = np.array([a for a, _ in items], dtype=np.int64)
        coef = np.array([c for _, c in items])
        # points[:, None, :] ** expo -> (N, n_terms, dim); reduce over dim.
        mono = np.prod(points[:, None, :] ** expo[None, :, :], axis=2)
        return mono @ coef

    # -- structural maps ---------------------------------------------------

    def embed(self, variable_map, target_dim: int) -> "Polynomial":
        """Reinterpret in a larger ring, sending variable i to variable_map[i]."""
        variable_map = tuple(int(j) for j in variable_map)
        if len(variable_map) != self.dim:
            raise ValueError("variable_map must list a target index per variable")
        if len(set(variable_map)) != len(variable_map):
            raise ValueError("variable_map must be injective")
        if any(not 0 <= j < target_dim for j in variable_map):
            raise ValueError("variable_map entry out of range for target dimension")
        out: dict[Exponent, float] = {}
        for alpha, c in self.terms.items():
            beta = [0] * target_dim
            for i, a in enumerate(alpha):
                beta[variable_map[i]] = a
            out[tuple(beta)] = c
        res = Polynomial(target_dim)
        res.terms = out
        return res

    def compose_affine(self, shift, scale) -> "Polynomial":
        """Substitute x_i -> shift_i + scale_i * x_i."""
        shift = np.asarray(shift, dtype=float)
        scale = np.asarray(scale, dtype=float)
        if shift.shape != (self.dim,) or scale.shape != (self.dim,):
            raise ValueError("shift and scale must each have one entry per variable")
        out = Polynomial.zero(self.dim)
        for alpha, c in self.sorted_terms():
            # Expand prod_i (shift_i + scale_i x_i)^alpha_i by binomials.
            per_var = []
            for i, a in enumerate(alpha):
                opts = [
                    (j, math.comb(a, j) * shift[i] ** (a - j) * scale[i] ** j)
                    for j in range(a + 1)
                ]
                per_var.append(opts)
            expanded: dict[Exponent, float] = {}
            for combo in itertools.product(*per_var):
                beta = tuple(j for j, _ in combo)
                w = c
                for _, factor in combo:
                    w *= factor
                expanded[beta] = expanded.get(beta, 0.0) + w
            out = out + Polynomial(self.dim, expanded)
        return out

    def cleanup(self, tol: float = 1e-12) -> "Polynomial":
        """Drop coefficients with absolute value at most ``tol``."""
        res = Polynomial(self.dim)
        res.terms = {a: c for a, c in self.terms.items() if abs(c) > tol}
        return res

    def partial(self, index: int) -> "Polynomial":
        """Partial derivative with respect to variable ``index``."""
        if not 0 <= index < self.dim:
            raise ValueError(f"variable index {index} out of range")
        out: dict[Exponent, float] = {}
        for alpha, c in self.terms.items():
            a = alpha[index]
            if a == 0:
                continue
            beta = alpha[:index] + (a - 1,) + alpha[index + 1 :]
            out[beta] = out.get(beta, 0.0) + c * a
        res = Polynomial(self.dim)
        res.terms = {k: v for k, v in out.items() if v != 0.0}
        return res

    # -- misc ----------------------------------------------------------------

    def max_coeff_diff(self, other: "Polynomial") -> float:
        self._require_same_space(other)
        keys = set(self.terms) | set(other.terms)
        if not keys:
            return 0.0
        return max(abs(self.coeff(a) - other.coeff(a)) for a in keys)

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.dim == other.dim and self.terms == other.terms

    def __repr__(self):
        if not self.terms:
            return f"Polynomial({self.dim}, 0)"
        bits = []
        for alpha, c in self.sorted_terms():
            mono = "*".join(
                f"x{i + 1}" + (f"^{a}" if a > 1 else "")
                for i, a in enumerate(alpha)
                if a
            )
            bits.append(f"{c:g}" + (f"*{mono}" if mono else ""))
        return f"Polynomial({self.dim}, {' + '.join(bits)})"


def grlex_key(alpha: Exponent):
    """Sort key for graded lexicographic monomial order."""
    return (sum(alpha), alpha)


class MonomialBasis:
    """All monomials of dimension ``dim`` up to ``degree``, graded lex ordered.

    ``exponents`` may live in a larger ambient ring (see ``restricted``): the
    attribute ``dim`` always refers to the ambient dimension.
    """

    __slots__ = ("dim", "degree", "exponents", "index")

    def __init__(self, dim: int, degree: int, exponents):
        self.dim = dim
        self.degree = degree
        self.exponents: tuple[Exponent, ...] = tuple(exponents)
        self.index = {a: i for i, a in enumerate(self.exponents)}

    def __len__(self):
        return len(self.exponents)

    def __iter__(self):
        return iter(self.exponents)

    def __getitem__(self, i):
        return self.exponents[i]

    def __repr__(self):
        return f"MonomialBasis(dim={self.dim}, degree={self.degree}, size={len(self)})"


def monomials_up_to(dim: int, degree: int) -> list[Exponent]:
    """Exponents of all monomials of total degree <= degree, graded lex order."""
    if dim < 0 or degree < 0:
        raise ValueError("dimension and degree must be nonnegative")
    if dim == 0:
        return [()]
    out: list[Exponent] = []
    for total in range(degree + 1):
        out.extend(_compositions(total, dim))
    return out


def _compositions(total: int, dim: int) -> list[Exponent]:
    """All exponents with given total degree, lexicographically increasing."""
    if dim == 1:
        return [(total,)]
    out = []
    for first in range(total + 1):
        for rest in _compositions(total - first, dim - 1):
            out.append((first,) + rest)
    return out


def basis(dim: int, degree: int) -> MonomialBasis:
    """Monomial basis of the polynomials of degree <= degree in dim variables.

    Size is binomial(dim + degree, degree).
    """
    return MonomialBasis(dim, degree, monomials_up_to(dim, degree))


def restricted_basis(dim: int, degree: int, variables) -> MonomialBasis:
    """Basis of monomials supported on a subset of the ambient variables."""
    variables = tuple(int(v) for v in variables)
    if any(not 0 <= v < dim for v in variables):
        raise ValueError("restricted variable index out of range")
    if len(set(variables)) != len(variables):
        raise ValueError("restricted variables must be distinct")
    small = monomials_up_to(len(variables), degree)
    embedded = []
    for alpha in small:
        beta = [0] * dim
        for v, a in zip(variables, alpha):
            beta[v] = a
        embedded.append(tuple(beta))
    return MonomialBasis(dim, degree, embedded)
