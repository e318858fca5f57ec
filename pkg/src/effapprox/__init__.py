"""Sublevel-set approximation of weakly efficient sets via SOS certificates."""

from .poly import Polynomial, MonomialBasis, basis, restricted_basis
from .sdp import SdpProblem, SdpSolution, SdpStatus, solve, residuals

__all__ = [
    "Polynomial",
    "MonomialBasis",
    "basis",
    "restricted_basis",
    "SdpProblem",
    "SdpSolution",
    "SdpStatus",
    "solve",
    "residuals",
]

__version__ = "0.1.0"
