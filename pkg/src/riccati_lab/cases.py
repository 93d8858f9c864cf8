"""Ten integrable Riccati constructions.

Each case takes two of the coefficients (a, b, c), a generating function and
a few constants, and solves a defining condition for the remaining
coefficient.  The result is a :class:`ConstructedCase` carrying the completed
problem, an exact particular solution and the closed-form general solution.

Which inputs a case consumes is recorded in ``case_manifest.json``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from types import MappingProxyType
from typing import Callable, Mapping, Optional

import numpy as np
from scipy.optimize import brentq

from .calculus import (
    Interval,
    ScalarFunction,
    antiderivative,
    from_expr,
    reference_antiderivative,
    sf_exp,
    sf_sqrt,
)
from .errors import (
    ConditionResidualTooLarge,
    GuardViolation,
    RadicandNegative,
    SpecError,
)
from .riccati import (
    TOL_COND,
    TOL_RES,
    RiccatiProblem,
    SolutionFamily,
    _derivative_of,
    family_from_bc,
)

GUARD_GRID = 257
GUARD_EPS = 1e-12


def _load_manifest() -> Mapping[int, Mapping]:
    raw = json.loads(resources.files(__package__).joinpath("case_manifest.json").read_text())
    return MappingProxyType({int(k): MappingProxyType(v) for k, v in raw.items()})


CASE_MANIFEST = _load_manifest()
CONSTANT_NAMES = ("C1", "C3", "C5", "C7", "C12")


def manifest_json() -> str:
    """The case schema as canonical JSON text."""
    return json.dumps({str(k): dict(v) for k, v in CASE_MANIFEST.items()}, indent=2, sort_keys=True)


# specs ------------------------------------------------------------------------------

@dataclass(frozen=True)
class CaseSpec:
    """Inputs of one construction.

    ``coefficients`` holds the free coefficients by name ('a', 'b', 'c');
    ``f`` is the case's generating function.  ``sources`` optionally keeps
    the expression text of each input for reporting and hashing.
    """

    case: int
    coefficients: Mapping[str, ScalarFunction]
    f: ScalarFunction
    interval: Interval
    constants: Mapping[str, float] = field(default_factory=dict)
    branch: Optional[int] = None
    x0: Optional[float] = None
    sources: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.case not in CASE_MANIFEST:
            raise SpecError(f"unknown case {self.case!r}; expected 1..10")
        entry = CASE_MANIFEST[self.case]
        free = set(entry["free"])
        given = set(self.coefficients)
        if given != free:
            missing = sorted(free - given)
            extra = sorted(given - free)
            parts = []
            if missing:
                parts.append("missing " + ",".join(missing))
            if extra:
                parts.append("unexpected " + ",".join(extra))
            raise SpecError(f"case {self.case} takes coefficients {','.join(sorted(free))}: " + "; ".join(parts))
        extra_c = sorted(set(self.constants) - set(entry["constants"]))
        if extra_c:
            raise SpecError(f"case {self.case} does not use constant(s) {','.join(extra_c)}")
        consts = {k: float(self.constants.get(k, 0.0)) for k in entry["constants"]}
        if not all(math.isfinite(v) for v in consts.values()):
            raise SpecError("constants must be finite")
        object.__setattr__(self, "constants", MappingProxyType(consts))
        object.__setattr__(self, "coefficients", MappingProxyType(dict(self.coefficients)))
        object.__setattr__(self, "sources", MappingProxyType(dict(self.sources)))
        if entry["branch"]:
            br = entry["default_branch"] if self.branch is None else self.branch
            if br not in (1, -1):
                raise SpecError(f"branch must be +1 or -1, got {self.branch!r}")
            object.__setattr__(self, "branch", int(br))
        elif self.branch is not None:
            raise SpecError(f"case {self.case} has no branch sign")
        lo, hi = (float(v) for v in self.interval)
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise SpecError(f"invalid interval [{lo}, {hi}]")
        object.__setattr__(self, "interval", (lo, hi))
        x0 = lo if self.x0 is None else float(self.x0)
        if not lo <= x0 <= hi:
            raise SpecError(f"base point {x0} outside [{lo}, {hi}]")
        object.__setattr__(self, "x0", x0)

    @classmethod
    def from_exprs(cls, case: int, interval: Interval, *, f: str, branch: Optional[int] = None,
                   x0: Optional[float] = None, constants: Optional[Mapping[str, float]] = None,
                   **coefficients: str) -> "CaseSpec":
        """Build a spec from expression strings, e.g. ``from_exprs(1, (0, 1), f="4", b="0", c="1")``."""
        interval = (float(interval[0]), float(interval[1]))
        coeffs = {k: from_expr(v, interval) for k, v in coefficients.items() if v is not None}
        sources = {k: v for k, v in coefficients.items() if v is not None}
        sources["f"] = f
        return cls(case, coeffs, from_expr(f, interval), interval, dict(constants or {}),
                   branch, x0, sources)

    @property
    def generator_name(self) -> str:
        return CASE_MANIFEST[self.case]["generator"]

    @property
    def completes(self) -> str:
        return CASE_MANIFEST[self.case]["completes"]

    @property
    def family_constant(self) -> str:
        return CASE_MANIFEST[self.case]["family_constant"]

    def canonical(self) -> str:
        """Stable text form of the spec (needs expression sources)."""
        if set(self.sources) != set(self.coefficients) | {"f"}:
            raise SpecError("canonical form needs the expression source of every input")
        body = {
            "case": self.case,
            "inputs": dict(sorted(self.sources.items())),
            "constants": {k: repr(v) for k, v in sorted(self.constants.items())},
            "branch": self.branch,
            "x0": repr(self.x0),
            "interval": [repr(v) for v in self.interval],
        }
        return json.dumps(body, sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ConstructedCase:
    """Completed problem with its particular solution and general family."""

    spec: CaseSpec
    problem: RiccatiProblem
    y_p: ScalarFunction
    general: SolutionFamily
    condition_residual: float
    parts: Mapping[str, ScalarFunction] = field(default_factory=dict, repr=False)
    guards: Mapping[str, tuple[ScalarFunction, int]] = field(default_factory=dict, repr=False)

    @property
    def case(self) -> int:
        return self.spec.case

    @property
    def sigma(self) -> Optional[int]:
        return self.spec.branch


# guards -----------------------------------------------------------------------------

def _first_bad(g: ScalarFunction, xs: np.ndarray, bad: np.ndarray, v: np.ndarray) -> float:
    """Left-most abscissa where ``bad`` starts, refined by bisection on ``v``."""
    i = int(np.flatnonzero(bad)[0])
    if i == 0:
        return float(xs[0])
    lo, hi = float(xs[i - 1]), float(xs[i])
    if np.sign(v[i - 1]) * np.sign(v[i]) < 0:
        return float(brentq(lambda t: float(g(t)), lo, hi, xtol=1e-12))
    return hi


def _guard(name: str, g: ScalarFunction, interval: Interval, sign: int = 0,
           error: Callable[[str, float], Exception] = GuardViolation) -> None:
    """Require ``g`` nonvanishing (sign 0) or of strict sign ``sign`` on the interval."""
    xs = np.linspace(interval[0], interval[1], GUARD_GRID)
    v = np.asarray(g(xs), dtype=float)
    tiny = np.abs(v) <= GUARD_EPS * (1.0 + np.max(np.abs(v)))
    if sign == 0:
        s = np.sign(v)
        flip = np.zeros_like(tiny)
        flip[1:] = s[:-1] * s[1:] < 0
        bad = tiny | flip
    else:
        bad = tiny | (sign * v < 0)
    if bad.any():
        raise error(name, _first_bad(g, xs, bad, v))


def _radicand(name: str, g: ScalarFunction, interval: Interval) -> None:
    xs = np.linspace(interval[0], interval[1], GUARD_GRID)
    v = np.asarray(g(xs), dtype=float)
    bad = v < -GUARD_EPS * (1.0 + np.max(np.abs(v)))
    if bad.any():
        raise RadicandNegative(_first_bad(g, xs, bad, v), name)


# construction -----------------------------------------------------------------------

class _Builder:
    def __init__(self, spec: CaseSpec, tol_quad: Optional[float]):
        self.spec = spec
        self.I = spec.interval
        self.x0 = spec.x0
        self.tol = tol_quad
        self.parts: dict[str, ScalarFunction] = {}
        self.guards: dict[str, tuple[ScalarFunction, int]] = {}

    def integral(self, g: ScalarFunction) -> ScalarFunction:
        return antiderivative(g, self.x0, self.I, self.tol)

    def guard(self, name: str, g: ScalarFunction, sign: int = 0) -> None:
        _guard(name, g, self.I, sign)
        self.guards[name] = (g, sign)

    def radicand(self, name: str, g: ScalarFunction) -> None:
        _radicand(name, g, self.I)
        self.guards[name] = (g, 1)


def _complete(spec: CaseSpec, bld: _Builder):
    """Return (a, b, c, y_p) for the spec."""
    k = spec.case
    co = spec.coefficients
    a, b, c = co.get("a"), co.get("b"), co.get("c")
    f = spec.f
    s = spec.branch
    C = spec.constants
    P = bld.parts

    if k in (1, 2, 3, 5, 6, 7, 8, 10):
        bld.guard("c nonvanishing", c)

    if k == 1:
        J = bld.integral((f - b * b) / (2.0 * c)) - C["C1"]
        P["J"] = J
        a = (f - (b + c * J) ** 2) / (4.0 * c)
        return a, b, c, 0.5 * J
    if k == 2:
        rad = f + b * b
        bld.radicand("f2 + b^2", rad)
        y_p = (-1.0 * b + s * sf_sqrt(rad)) / (2.0 * c)
        a = _derivative_of(y_p) - f / (4.0 * c)
        return a, b, c, y_p
    if k == 3:
        L = bld.integral(a + f / (4.0 * c)) - C["C3"]
        P["L"] = L
        bld.guard("integral term minus C3 nonvanishing", L)
        b = (f - 4.0 * c * c * L * L) / (4.0 * c * L)
        q = c * L + f / (4.0 * c * L)
        bld.guard("branch root matches integral term", s * q, sign=1)
        return a, b, c, (-1.0 * b + s * sf_sqrt(f + b * b)) / (2.0 * c)
    if k == 4:
        rad = f + b * b
        bld.radicand("f2 + b^2", rad)
        sq = -1.0 * b + s * sf_sqrt(rad)
        bld.guard("-b + branch root nonvanishing", sq)
        K = 0.5 * bld.integral(f / sq)
        M = C["C5"] + bld.integral(a * sf_exp(-1.0 * K))
        bld.guard("C5 + integral term nonvanishing", M)
        P.update(K=K, M=M, root=sq)
        c = sq * sf_exp(-1.0 * K) / (2.0 * M)
        return a, b, c, M * sf_exp(K)
    if k in (5, 6):
        J = bld.integral(f / (2.0 * c)) - C["C7"]
        P["J"] = J
        if k == 5:
            bld.guard("b + c*J positive", b + c * J, sign=1)
            a = 0.25 * (f / c - 2.0 * b * J - c * J * J)
            y_p = (-1.0 * b + sf_sqrt(b * b + c * J * (2.0 * b + c * J))) / (2.0 * c)
            return a, b, c, y_p
        bld.guard("integral term minus C7 nonvanishing", J)
        b = (f - 4.0 * a * c - c * c * J * J) / (2.0 * c * J)
        bld.guard("b + c*J negative", b + c * J, sign=-1)
        rad = b * b - 4.0 * a * c + f
        y_p = (-1.0 * sf_sqrt(rad) + (4.0 * a * c - f + c * c * J * J) / (2.0 * c * J)) / (2.0 * c)
        return a, b, c, y_p
    if k == 7:
        a = (2.0 * c * _derivative_of(f / c) - f * f - 2.0 * b * f) / (4.0 * c)
        return a, b, c, f / (2.0 * c)
    if k == 8:
        bld.guard("f4 nonvanishing", f)
        b = (c * _derivative_of(f / c) - 0.5 * f * f - 2.0 * a * c) / f
        return a, b, c, f / (2.0 * c)
    if k == 9:
        W = bld.integral(0.5 * f + b)
        N = C["C12"] + 2.0 * bld.integral(a * sf_exp(-1.0 * W))
        bld.guard("C12 + integral term nonvanishing", N)
        P.update(W=W, N=N)
        c = f * sf_exp(-1.0 * W) / N
        return a, b, c, 0.5 * N * sf_exp(W)
    # case 10
    y_p = -1.0 * b / (2.0 * c) + s * f
    a = (b * b - 4.0 * c * c * f * f) / (4.0 * c) + _derivative_of(y_p)
    return a, b, c, y_p


def construct(spec: CaseSpec, tol_quad: Optional[float] = None, tol_cond: float = TOL_COND,
              tol_res: float = TOL_RES) -> ConstructedCase:
    """Complete the missing coefficient, build y_p and the general family."""
    bld = _Builder(spec, tol_quad)
    a, b, c, y_p = _complete(spec, bld)
    problem = RiccatiProblem(a, b, c, spec.interval)
    general = family_from_bc(problem, y_p, spec.x0, tol_quad, tol_res)
    general = SolutionFamily(problem, y_p, general.numerator, general.denominator,
                             spec.family_constant, spec.x0)
    cc = ConstructedCase(spec, problem, y_p, general, math.nan,
                         MappingProxyType(bld.parts), MappingProxyType(bld.guards))
    res = validate_condition(cc)
    if not res <= tol_cond:
        raise ConditionResidualTooLarge(res, tol_cond)
    object.__setattr__(cc, "condition_residual", res)
    return cc


# independent checks -----------------------------------------------------------------

def _d(f: ScalarFunction, xs: np.ndarray) -> np.ndarray:
    return np.asarray(_derivative_of(f)(xs), dtype=float)


def condition_sides(cc: ConstructedCase, xs: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of the case's defining condition on ``xs``.

    The left side is the completed coefficient.  The right side is rebuilt
    from the completed triple with reference quadrature and explicit
    quotient-rule derivatives, sharing nothing with :func:`construct`.
    """
    spec = cc.spec
    I, x0, k, s = spec.interval, spec.x0, spec.case, spec.branch
    if xs is None:
        xs = np.linspace(I[0], I[1], GUARD_GRID)
    p = cc.problem
    av, bv, cv = (np.asarray(g(xs), dtype=float) for g in (p.a, p.b, p.c))
    fv = np.asarray(spec.f(xs), dtype=float)
    C = spec.constants

    def ref(g):
        return reference_antiderivative(g, x0, I)

    if k == 1:
        J = ref((spec.f - p.b * p.b) / (2.0 * p.c))(xs) - C["C1"]
        return av, (fv - (bv + cv * J) ** 2) / (4.0 * cv)
    if k == 2:
        db, dc, df = _d(p.b, xs), _d(p.c, xs), _d(spec.f, xs)
        root = np.sqrt(fv + bv * bv)
        num = -bv + s * root
        dnum = -db + s * (df + 2.0 * bv * db) / (2.0 * root)
        dy = (dnum * cv - num * dc) / (2.0 * cv * cv)
        return av, dy - fv / (4.0 * cv)
    if k == 3:
        L = ref(p.a + spec.f / (4.0 * p.c))(xs) - C["C3"]
        return bv, (fv - 4.0 * cv * cv * L * L) / (4.0 * cv * L)
    if k == 4:
        sq = -1.0 * p.b + s * sf_sqrt(spec.f + p.b * p.b)
        K = 0.5 * ref(spec.f / sq)
        M = C["C5"] + ref(p.a * sf_exp(-1.0 * K))
        return cv, np.asarray(sq(xs) * np.exp(-K(xs)) / (2.0 * M(xs)), dtype=float)
    if k == 5:
        J = ref(spec.f / (2.0 * p.c))(xs) - C["C7"]
        return av, 0.25 * (fv / cv - 2.0 * bv * J - cv * J * J)
    if k == 6:
        J = ref(spec.f / (2.0 * p.c))(xs) - C["C7"]
        return bv, (fv - 4.0 * av * cv - cv * cv * J * J) / (2.0 * cv * J)
    if k in (7, 8):
        dc, df = _d(p.c, xs), _d(spec.f, xs)
        dratio = (df * cv - fv * dc) / (cv * cv)
        if k == 7:
            return av, (2.0 * cv * dratio - fv * fv - 2.0 * bv * fv) / (4.0 * cv)
        return bv, (cv * dratio - 0.5 * fv * fv - 2.0 * av * cv) / fv
    if k == 9:
        W = ref(0.5 * spec.f + p.b)
        N = C["C12"] + 2.0 * ref(p.a * sf_exp(-1.0 * W))
        return cv, np.asarray(fv * np.exp(-W(xs)) / N(xs), dtype=float)
    db, dc, df = _d(p.b, xs), _d(p.c, xs), _d(spec.f, xs)
    return av, (bv * bv - 4.0 * cv * cv * fv * fv) / (4.0 * cv) - (db * cv - bv * dc) / (2.0 * cv * cv) + s * df


def validate_condition(cc: ConstructedCase) -> float:
    """Normalized sup difference between the two sides of the defining condition."""
    lhs, rhs = condition_sides(cc)
    return float(np.max(np.abs(lhs - rhs)) / (1.0 + np.max(np.abs(lhs))))


def seed_sign(cc: ConstructedCase, xs: np.ndarray) -> np.ndarray:
    """Root sign selecting y_p from the quadratic relation, per abscissa.

    For case 10 the root is sigma * sign(c * f), so it is read off pointwise
    like the cases without a branch input.
    """
    k = cc.case
    if k in (2, 3, 4):
        return np.full(xs.shape, float(cc.spec.branch))
    if k == 5:
        return np.ones(xs.shape)
    if k == 6:
        return -np.ones(xs.shape)
    p = cc.problem
    v = 2.0 * p.c(xs) * cc.y_p(xs) + p.b(xs)
    return np.where(v >= 0, 1.0, -1.0)


def seed_relation_check(cc: ConstructedCase, n: int = GUARD_GRID) -> float:
    """How far y_p is from the promised root of 2c*y + b = sigma*sqrt(b^2 - 4ac + 4c*y')."""
    p = cc.problem
    xs = np.linspace(*cc.spec.interval, n)
    av, bv, cv = (np.asarray(g(xs), dtype=float) for g in (p.a, p.b, p.c))
    yv = np.asarray(cc.y_p(xs), dtype=float)
    dy = _d(cc.y_p, xs)
    lin = 2.0 * cv * yv + bv
    rad = bv * bv - 4.0 * av * cv + 4.0 * cv * dy
    scale = 1.0 + np.max(np.abs(lin))
    bad = rad < -1e-8 * scale * scale
    if bad.any():
        raise RadicandNegative(float(xs[np.flatnonzero(bad)[0]]), "b^2 - 4ac + 4c y'")
    root = np.sqrt(np.clip(rad, 0.0, None))
    return float(np.max(np.abs(lin - seed_sign(cc, xs) * root)) / scale)


# displayed families -----------------------------------------------------------------

def _theorem_pieces(cc: ConstructedCase):
    """(additive term, exponent integrand, weight) of the displayed family."""
    spec, P = cc.spec, cc.parts
    p = cc.problem
    a, b, c, f, s, k = p.a, p.b, p.c, spec.f, spec.branch, spec.case
    if k == 1:
        J = P["J"]
        return 0.5 * J, b + c * J, c
    if k in (2, 4):
        root = s * sf_sqrt(f + b * b)
        T = (-1.0 * b + root) / (2.0 * c) if k == 2 else P["M"] * sf_exp(P["K"])
        return T, root, c
    if k == 3:
        if s != -1:
            raise SpecError("the displayed case 3 family uses the negative root only")
        root = sf_sqrt(f + b * b)
        return -1.0 * (root + b) / (2.0 * c), -1.0 * root, c
    if k == 5:
        J = P["J"]
        root = sf_sqrt(b * b + c * J * (2.0 * b + c * J))
        return (-1.0 * b + root) / (2.0 * c), root, c
    if k == 6:
        J = P["J"]
        bj = (f - 4.0 * a * c - c * c * J * J) / (2.0 * c * J)
        root = sf_sqrt(bj * bj - 4.0 * a * c + f)
        return (-1.0 * root + (4.0 * a * c - f + c * c * J * J) / (2.0 * c * J)) / (2.0 * c), -1.0 * root, c
    if k in (7, 8):
        return f / (2.0 * c), b + f, c
    if k == 9:
        return 0.5 * P["N"] * sf_exp(P["W"]), f + b, c
    return -1.0 * b / (2.0 * c) + s * f, 2.0 * s * c * f, c


def theorem_family(cc: ConstructedCase, tol_quad: Optional[float] = None) -> SolutionFamily:
    """The family in the displayed closed form T + e^{int h} / (K - int c e^{int h})."""
    T, h, w = _theorem_pieces(cc)
    x0, I = cc.spec.x0, cc.spec.interval
    E = sf_exp(antiderivative(h, x0, I, tol_quad))
    Q = antiderivative(w * E, x0, I, tol_quad)
    return SolutionFamily(cc.problem, T, E, Q, f"theorem {cc.case}", x0)


__all__ = [
    "CASE_MANIFEST",
    "CaseSpec",
    "ConstructedCase",
    "condition_sides",
    "construct",
    "manifest_json",
    "seed_relation_check",
    "seed_sign",
    "theorem_family",
    "validate_condition",
]
