"""Sum-of-squares certificates of membership in a truncated quadratic module.

A target polynomial t (possibly affine in scalar parameters) is matched
coefficientwise against

    t = sigma_0 + sum_j sigma_j * h_j,      deg(sigma_j h_j) <= 2k,

with every sigma a Gram-matrix quadratic form.  The match is one equality row
per monomial, which makes the whole thing a semidefinite feasibility problem.
An optional clique structure restricts each multiplier to a subset of the
variables and shrinks the Gram blocks accordingly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .poly import (
    Exponent,
    MonomialBasis,
    Polynomial,
    basis,
    grlex_key,
    monomials_up_to,
    restricted_basis,
)
from .sdp import SdpProblem, SdpSolution, SdpStatus, solve


class OrderTooLowError(Exception):
    """The requested relaxation order admits no certificate."""


class SolverError(Exception):
    """The semidefinite solver failed to return a usable solution."""


@dataclass(frozen=True)
class Clique:
    """Variable subset I together with the generators assigned to it."""

    variables: tuple[int, ...]
    generators: tuple[int, ...]


@dataclass
class GeneratorSet:
    """Inequality generators h_j >= 0 describing a basic closed set.

    ``cliques`` switches on the sparse certificate: each multiplier (and the
    per-clique SOS part) only involves that clique's variables.  The cliques
    must satisfy the running-intersection property and partition the
    generator list.
    """

    dim: int
    generators: list  # of (label: str, Polynomial)
    cliques: list | None = None

    def __post_init__(self):
        for label, g in self.generators:
            if g.dim != self.dim:
                raise ValueError(f"generator {label} lives in dimension {g.dim}")
        if self.cliques is not None:
            self._check_cliques()

    def _check_cliques(self):
        seen = []
        for c in self.cliques:
            if any(not 0 <= v < self.dim for v in c.variables):
                raise ValueError("clique variable index out of range")
            if len(set(c.variables)) != len(c.variables):
                raise ValueError("clique variables must be distinct")
            seen.extend(c.generators)
        if sorted(seen) != list(range(len(self.generators))):
            raise ValueError("cliques must partition the generator indices")
        for c in self.cliques:
            for gi in c.generators:
                label, g = self.generators[gi]
                if not set(g.support_variables()) <= set(c.variables):
                    raise ValueError(
                        f"generator {label} uses variables outside its clique"
                    )
        # running intersection: each clique's overlap with the union of the
        # earlier ones is contained in a single earlier clique
        union: set[int] = set()
        for i, c in enumerate(self.cliques):
            cur = set(c.variables)
            if i > 0:
                overlap = cur & union
                if overlap and not any(
                    overlap <= set(k.variables) for k in self.cliques[:i]
                ):
                    raise ValueError("cliques violate the running intersection property")
            union |= cur

    def labels(self) -> list[str]:
        return [label for label, _ in self.generators]


def gram_basis(
    generator: Polynomial, k: int, dim: int, clique_variables=None
) -> MonomialBasis:
    """Monomial basis for the Gram matrix multiplying ``generator`` at order k.

    The multiplier degree is floor((2k - deg h) / 2) so the product stays
    within degree 2k.
    """
    d = 2 * k - generator.degree
    if d < 0:
        raise OrderTooLowError(
            f"order {k} too low for a generator of degree {generator.degree}"
        )
    if clique_variables is None:
        return basis(dim, d // 2)
    return restricted_basis(dim, d // 2, clique_variables)


@dataclass
class ParamTarget:
    """Polynomial depending affinely on scalar parameters.

    Represents const + sum_j theta_j * coeffs[j].
    """

    dim: int
    const: Polynomial
    coeffs: list = field(default_factory=list)

    @classmethod
    def fixed(cls, p: Polynomial) -> "ParamTarget":
        return cls(dim=p.dim, const=p, coeffs=[])

    def degree_bound(self) -> int:
        degs = [self.const.degree] + [c.degree for c in self.coeffs]
        return max(degs)


@dataclass
class GramSlot:
    label: str
    generator: Polynomial
    basis: MonomialBasis


@dataclass
class GramBlock:
    label: str
    generator: Polynomial
    basis: MonomialBasis
    matrix: np.ndarray


@dataclass
class GramCertificate:
    """Numeric Gram matrices witnessing a quadratic-module membership."""

    dim: int
    order: int
    blocks: list  # of GramBlock

    def reconstruction(self) -> Polynomial:
        """Expand sigma_0 + sum_j sigma_j h_j back into a polynomial."""
        total = Polynomial.zero(self.dim)
        for blk in self.blocks:
            expanded: dict[Exponent, float] = {}
            exps = blk.basis.exponents
            G = blk.matrix
            for i1 in range(len(exps)):
                for i2 in range(i1, len(exps)):
                    c = G[i1, i2] if i1 == i2 else 2.0 * G[i1, i2]
                    if c == 0.0:
                        continue
                    m = tuple(a + b for a, b in zip(exps[i1], exps[i2]))
                    expanded[m] = expanded.get(m, 0.0) + c
            total = total + Polynomial(self.dim, expanded) * blk.generator
        return total

    def min_eigenvalue(self) -> float:
        return min(float(sla.eigvalsh(blk.matrix)[0]) for blk in self.blocks)


@dataclass
class CertificateReport:
    max_mismatch: float
    min_eigenvalue: float
    coeff_tol: float
    eig_tol: float
    passed: bool


def verify_certificate(
    target: Polynomial,
    certificate: GramCertificate,
    coeff_tol: float | None = None,
    eig_tol: float = 1e-8,
) -> CertificateReport:
    """Check a certificate against its target by direct expansion.

    The coefficient tolerance defaults to 1e-6 * (1 + max |target coeff|).
    """
    recon = certificate.reconstruction()
    mismatch = recon.max_coeff_diff(target)
    scale = 1.0 + max((abs(c) for c in target.terms.values()), default=0.0)
    tol = coeff_tol if coeff_tol is not None else 1e-6 * scale
    min_eig = certificate.min_eigenvalue()
    return CertificateReport(
        max_mismatch=mismatch,
        min_eigenvalue=min_eig,
        coeff_tol=tol,
        eig_tol=eig_tol,
        passed=(mismatch <= tol and min_eig >= -eig_tol),
    )


@dataclass
class MembershipSystem:
    """Compiled coefficient-matching SDP plus the layout needed to read it back."""

    problem: SdpProblem
    monomials: list
    slots: list  # of GramSlot
    n_params: int
    order: int
    dim: int

    def certificate(self, solution: SdpSolution) -> GramCertificate:
        blocks = [
            GramBlock(s.label, s.generator, s.basis, np.asarray(X))
            for s, X in zip(self.slots, solution.block_values)
        ]
        return GramCertificate(dim=self.dim, order=self.order, blocks=blocks)


def _slot_layout(gens: GeneratorSet, k: int) -> list[GramSlot]:
    one = Polynomial.constant(gens.dim, 1.0)
    slots: list[GramSlot] = []
    if gens.cliques is None:
        slots.append(GramSlot("sigma0", one, gram_basis(one, k, gens.dim)))
        for label, g in gens.generators:
            slots.append(GramSlot(label, g, gram_basis(g, k, gens.dim)))
    else:
        for ci, cl in enumerate(gens.cliques):
            slots.append(
                GramSlot(
                    f"sigma0[c{ci}]",
                    one,
                    gram_basis(one, k, gens.dim, cl.variables),
                )
            )
            for gi in cl.generators:
                label, g = gens.generators[gi]
                slots.append(
                    GramSlot(label, g, gram_basis(g, k, gens.dim, cl.variables))
                )
    return slots


def _row_monomials(gens: GeneratorSet, k: int) -> list[Exponent]:
    if gens.cliques is None:
        return monomials_up_to(gens.dim, 2 * k)
    seen: set[Exponent] = set()
    for cl in gens.cliques:
        for m in restricted_basis(gens.dim, 2 * k, cl.variables):
            seen.add(m)
    return sorted(seen, key=grlex_key)


def assemble_membership(
    target: ParamTarget | Polynomial, gens: GeneratorSet, k: int
) -> MembershipSystem:
    """Build the order-k membership SDP for ``target`` over ``gens``.

    One equality row per monomial of degree <= 2k (restricted to the clique
    monomials in sparse mode); Gram entries enter with the generator's
    coefficients, parameters enter the free-variable side.
    """
    if isinstance(target, Polynomial):
        target = ParamTarget.fixed(target)
    if target.dim != gens.dim:
        raise ValueError("target and generators disagree on dimension")
    if target.degree_bound() > 2 * k:
        raise OrderTooLowError(
            f"target degree {target.degree_bound()} exceeds 2k = {2 * k}"
        )

    slots = _slot_layout(gens, k)
    monos = _row_monomials(gens, k)
    row_of = {m: r for r, m in enumerate(monos)}

    problem = SdpProblem(
        block_dims=[len(s.basis) for s in slots], n_free=len(target.coeffs)
    )
    for m in monos:
        problem.add_row(target.const.coeff(m))
    for m in target.const.terms:
        if m not in row_of:
            raise ValueError(
                f"target monomial {m} is not reachable at order {k} "
                "with the given clique structure"
            )

    for bi, slot in enumerate(slots):
        exps = slot.basis.exponents
        gterms = slot.generator.sorted_terms()
        for i1 in range(len(exps)):
            e1 = exps[i1]
            for i2 in range(i1, len(exps)):
                pair = tuple(a + b for a, b in zip(e1, exps[i2]))
                for tau, c in gterms:
                    m = tuple(a + b for a, b in zip(pair, tau))
                    row = row_of.get(m)
                    if row is None:
                        raise ValueError(
                            f"generator {slot.label} produces monomial outside "
                            f"the degree-{2 * k} row set"
                        )
                    problem.set_entry(row, bi, i1, i2, c)

    for j, cpoly in enumerate(target.coeffs):
        for m, c in cpoly.sorted_terms():
            row = row_of.get(m)
            if row is None:
                raise ValueError(
                    f"parameter {j} carries monomial {m} outside the row set"
                )
            problem.set_free_entry(row, j, -c)

    problem.obj_free = [0.0] * len(target.coeffs)
    return MembershipSystem(
        problem=problem,
        monomials=monos,
        slots=slots,
        n_params=len(target.coeffs),
        order=k,
        dim=gens.dim,
    )


@dataclass
class ObjectiveBound:
    side: str
    value: float
    order: int
    certificate: GramCertificate
    report: CertificateReport
    solver_iterations: int


def objective_bound(
    p: Polynomial,
    q: Polynomial,
    gens: GeneratorSet,
    k: int,
    side: str,
    tol: float = 1e-8,
) -> ObjectiveBound:
    """Certified one-sided bound on p/q over the set described by ``gens``.

    side "lower": the largest lam with p - lam q in the order-k module,
    so lam <= inf p/q.  side "upper" mirrors it.  Requires q > 0 on the set.
    """
    if side not in ("lower", "upper"):
        raise ValueError("side must be 'lower' or 'upper'")
    if side == "lower":
        target = ParamTarget(dim=p.dim, const=p, coeffs=[-1.0 * q])
        sense = -1.0  # maximize lam
    else:
        target = ParamTarget(dim=p.dim, const=-1.0 * p, coeffs=[q])
        sense = 1.0  # minimize lam
    system = assemble_membership(target, gens, k)
    system.problem.obj_free = [sense]
    solution = solve(system.problem, tol=tol)
    if solution.status == SdpStatus.INFEASIBLE:
        raise OrderTooLowError(
            f"no order-{k} certificate for the {side} bound; raise the order"
        )
    if solution.status not in (SdpStatus.OPTIMAL,):
        raise SolverError(
            f"bound solve ended with status {solution.status.value} "
            f"(residuals {solution.residuals})"
        )
    lam = float(solution.free_values[0])
    cert = system.certificate(solution)
    if side == "lower":
        check_target = p - lam * q
    else:
        check_target = lam * q - p
    report = verify_certificate(check_target, cert)
    return ObjectiveBound(
        side=side,
        value=lam,
        order=k,
        certificate=cert,
        report=report,
        solver_iterations=solution.iterations,
    )


@dataclass
class Bounds:
    """Certified ranges for each objective over the feasible set."""

    lower: list
    upper: list
    orders: list
    lower_details: list
    upper_details: list

    @property
    def overall_lower(self) -> float:
        return min(self.lower)

    @property
    def overall_upper(self) -> float:
        return max(self.upper)


def default_bound_order(p: Polynomial, q: Polynomial, gens: GeneratorSet) -> int:
    """Smallest workable order plus one, for a little slack."""
    dmax = max(p.degree, q.degree)
    need = max(
        [math.ceil(dmax / 2)] + [math.ceil(g.degree / 2) for _, g in gens.generators]
    )
    return need + 1


def compute_bounds(
    objectives: list,
    gens: GeneratorSet,
    k: int | None = None,
    tol: float = 1e-8,
) -> Bounds:
    """Certified lower/upper bounds for a list of (p, q) rational objectives."""
    lower, upper, orders, ldet, udet = [], [], [], [], []
    for p, q in objectives:
        ki = k if k is not None else default_bound_order(p, q, gens)
        lo = objective_bound(p, q, gens, ki, "lower", tol=tol)
        hi = objective_bound(p, q, gens, ki, "upper", tol=tol)
        if not (lo.report.passed and hi.report.passed):
            raise SolverError(
                "bound certificate failed verification "
                f"(lower mismatch {lo.report.max_mismatch:.3e}, "
                f"upper mismatch {hi.report.max_mismatch:.3e})"
            )
        lower.append(lo.value)
        upper.append(hi.value)
        orders.append(ki)
        ldet.append(lo)
        udet.append(hi)
    return Bounds(
        lower=lower, upper=upper, orders=orders, lower_details=ldet, upper_details=udet
    )
