"""Integrable Riccati equations: constructions, closed-form families and checks."""

from .calculus import CumulativeIntegral, ScalarFunction, antiderivative, from_expr
from .cases import CaseSpec, ConstructedCase, construct, seed_relation_check, theorem_family, validate_condition
from .riccati import RiccatiProblem, SolutionFamily, detect_classical, family_from_bc, integrate_numeric

__version__ = "0.1.0"

__all__ = [
    "CaseSpec",
    "ConstructedCase",
    "CumulativeIntegral",
    "RiccatiProblem",
    "ScalarFunction",
    "SolutionFamily",
    "antiderivative",
    "construct",
    "detect_classical",
    "family_from_bc",
    "from_expr",
    "integrate_numeric",
    "seed_relation_check",
    "theorem_family",
    "validate_condition",
]
