"""Symbolic and numeric engine for k-harmonic curves in constant curvature."""

__version__ = "0.1.0"

from .diffpoly import K, CurvatureSymbol, DiffPoly, Monomial, kappa, parse_poly, format_poly
from .frenet import FrameField, tension, covariant_derivative, rough_laplacian, curvature_operator, tau_k
from .equations import (
    EquationSystem,
    ConstraintSet,
    VerificationReport,
    kharmonic_system,
    canonicalize_system,
    systems_equivalent,
    apply_constraints,
    verify_proposition,
    verify_biharmonic_implies_kharmonic,
)

__all__ = [
    "__version__",
    "K",
    "CurvatureSymbol",
    "DiffPoly",
    "Monomial",
    "kappa",
    "parse_poly",
    "format_poly",
    "FrameField",
    "tension",
    "covariant_derivative",
    "rough_laplacian",
    "curvature_operator",
    "tau_k",
    "EquationSystem",
    "ConstraintSet",
    "VerificationReport",
    "kharmonic_system",
    "canonicalize_system",
    "systems_equivalent",
    "apply_constraints",
    "verify_proposition",
    "verify_biharmonic_implies_kharmonic",
]
