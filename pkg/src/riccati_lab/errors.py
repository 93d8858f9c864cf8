"""Exception types shared across the package.

Every error the library raises on bad input or failed numerics derives from
:class:`RiccatiLabError`, so callers (the CLI in particular) can map them to
exit codes in one place.
"""

from __future__ import annotations


class RiccatiLabError(Exception):
    """Base class for all library errors."""

    code = "Error"


# exprlang ---------------------------------------------------------------------


class ExprSyntaxError(RiccatiLabError, ValueError):
    code = "SyntaxError"

    def __init__(self, offset: int, message: str, expected: frozenset[str] = frozenset()):
        self.offset = offset
        self.message = message
        self.expected = frozenset(expected)
        detail = f"at byte {offset}: {message}"
        if self.expected:
            detail += f" (expected one of: {', '.join(sorted(self.expected))})"
        super().__init__(detail)


class UnknownIdentifier(RiccatiLabError, ValueError):
    code = "UnknownIdentifier"

    def __init__(self, name: str, offset: int = -1):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier {name!r}")


class DomainError(RiccatiLabError, ArithmeticError):
    code = "DomainError"

    def __init__(self, subexpr: str, x: float, reason: str):
        self.subexpr = subexpr
        self.x = x
        self.reason = reason
        super().__init__(f"{reason} in {subexpr} at x={x!r}")


# calculus ---------------------------------------------------------------------


class OutOfDomain(RiccatiLabError, ValueError):
    code = "OutOfDomain"

    def __init__(self, x: float, domain: tuple[float, float]):
        self.x = x
        self.domain = domain
        super().__init__(f"x={x!r} outside [{domain[0]!r}, {domain[1]!r}]")


class NonFiniteIntegrand(RiccatiLabError, ArithmeticError):
    code = "NonFiniteIntegrand"

    def __init__(self, x: float):
        self.x = x
        super().__init__(f"integrand not finite at x={x!r}")


class ToleranceNotMet(RiccatiLabError, ArithmeticError):
    code = "ToleranceNotMet"

    def __init__(self, panel: tuple[float, float], achieved: float):
        self.panel = panel
        self.achieved = achieved
        super().__init__(f"quadrature error {achieved:.3g} on panel [{panel[0]!r}, {panel[1]!r}]")


# riccati core -----------------------------------------------------------------


class ParticularNotASolution(RiccatiLabError, ValueError):
    code = "ParticularNotASolution"

    def __init__(self, residual: float, x: float):
        self.residual = residual
        self.x = x
        super().__init__(f"particular solution residual {residual:.3g} at x={x!r}")


class ParticularVanishes(RiccatiLabError, ValueError):
    code = "ParticularVanishes"

    def __init__(self, x: float):
        self.x = x
        super().__init__(f"particular solution vanishes near x={x!r}")


class DegenerateQuadruple(RiccatiLabError, ValueError):
    code = "DegenerateQuadruple"


class CoefficientEvaluationError(RiccatiLabError, ArithmeticError):
    code = "CoefficientEvaluationError"

    def __init__(self, x: float, cause: str = ""):
        self.x = x
        super().__init__(f"coefficient evaluation failed at x={x!r}" + (f": {cause}" if cause else ""))


# cases ------------------------------------------------------------------------


class GuardViolation(RiccatiLabError, ValueError):
    code = "GuardViolation"

    def __init__(self, guard: str, x: float):
        self.guard = guard
        self.x = x
        super().__init__(f"guard '{guard}' violated at x={x!r}")


class RadicandNegative(RiccatiLabError, ValueError):
    code = "RadicandNegative"

    def __init__(self, x: float, which: str = "radicand"):
        self.x = x
        self.which = which
        super().__init__(f"{which} negative at x={x!r}")


class ConditionResidualTooLarge(RiccatiLabError, ArithmeticError):
    code = "ConditionResidualTooLarge"

    def __init__(self, residual: float, tol: float):
        self.residual = residual
        self.tol = tol
        super().__init__(f"condition residual {residual:.3g} exceeds {tol:.3g}")


class SpecError(RiccatiLabError, ValueError):
    """Case spec does not match the case manifest."""

    code = "SpecError"


# astro ------------------------------------------------------------------------


class MetricSignatureViolation(RiccatiLabError, ValueError):
    code = "MetricSignatureViolation"

    def __init__(self, x: float):
        self.x = x
        super().__init__(f"1 - 2*x*eta(x) <= 0 at x={x!r}")


class NotASolution(RiccatiLabError, ValueError):
    code = "NotASolution"

    def __init__(self, residual: float, x: float = float("nan")):
        self.residual = residual
        self.x = x
        super().__init__(f"u is not a solution: residual {residual:.3g} at x={x!r}")
