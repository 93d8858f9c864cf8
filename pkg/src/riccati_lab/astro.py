"""Static anisotropic fluid spheres through the Riccati equation for u = A'/A.

Everything is written in the variable x = r^2 with 8*pi*G = c = 1.  A model is
fixed by the mass ratio eta(x) = m/r^3 and the anisotropy
delta(x) = p_perp - p_r; the metric function A then solves a Riccati
equation in u = d(ln A)/dx.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
from scipy.optimize import brentq

from .calculus import Interval, ScalarFunction, antiderivative, constant, from_expr, identity, sf_exp
from .cases import CASE_MANIFEST, CaseSpec, ConstructedCase, construct
from .errors import GuardViolation, MetricSignatureViolation, NotASolution, SpecError
from .riccati import TOL_RES, RiccatiProblem, _derivative_of, residual

CENTER_FRACTION = 1e-6
PROFILE_POINTS = 513
TOL_MATCH = 1e-6
TOL_BOUNDARY = 1e-6
PROFILE_COLUMNS = ("r", "x", "V", "A", "u", "rho", "p_r", "p_perp", "m")


@dataclass(frozen=True)
class StellarModel:
    """Mass ratio ``eta`` and anisotropy ``delta`` as functions of x = r^2."""

    eta: ScalarFunction
    delta: ScalarFunction
    R: float
    A0: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.R) and self.R > 0):
            raise SpecError(f"boundary radius must be positive, got {self.R}")
        if not (math.isfinite(self.A0) and self.A0 > 0):
            raise SpecError(f"A0 must be positive, got {self.A0}")

    @classmethod
    def from_exprs(cls, eta: str, delta: str, R: float, A0: float = 1.0) -> "StellarModel":
        dom = (0.0, float(R) ** 2)
        return cls(from_expr(eta, dom), from_expr(delta, dom), float(R), float(A0))

    @property
    def x_eps(self) -> float:
        return CENTER_FRACTION * self.R ** 2

    @property
    def domain(self) -> Interval:
        return (self.x_eps, self.R ** 2)

    def grid(self, n: int = PROFILE_POINTS) -> np.ndarray:
        return np.linspace(*self.domain, n)

    @property
    def V(self) -> ScalarFunction:
        return 1.0 - 2.0 * identity(self.domain) * self.eta

    def check(self, n: int = PROFILE_POINTS) -> None:
        """Metric signature (V > 0) and centre regularity of delta/x."""
        xs = self.grid(n)
        V = self.V
        v = V(xs)
        bad = v <= 0
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            x_star = float(xs[i])
            if i > 0:
                x_star = brentq(lambda t: V(t), xs[i - 1], xs[i], xtol=1e-14)
            raise MetricSignatureViolation(x_star)
        # delta/x must stay bounded as x -> 0: it may not grow tenfold over the inner four decades
        probe = np.geomspace(self.x_eps, self.R ** 2 * 1e-2, 9)
        ratio = np.abs(self.delta(probe) / probe)
        if not np.all(np.isfinite(ratio)) or ratio[0] > 10.0 * ratio[-1] + 1e-6:
            raise GuardViolation("anisotropy/x bounded at the centre", self.x_eps)


def riccati_from_physics(model: StellarModel) -> RiccatiProblem:
    """Coefficients of u' = a + b*u + c*u^2 for the model."""
    model.check()
    x = identity(model.domain)
    deta = _derivative_of(model.eta)
    V = model.V
    a = (0.5 * deta + model.delta / (4.0 * x)) / V
    b = (x * deta + model.eta) / V
    return RiccatiProblem(a, b, constant(-1.0, model.domain), model.domain)


def anisotropy_for(model_eta: ScalarFunction, a: ScalarFunction, domain: Interval) -> ScalarFunction:
    """The delta that makes the mapped ``a`` coefficient equal to ``a``."""
    x = identity(domain)
    V = 1.0 - 2.0 * x * model_eta
    return 4.0 * x * (V * a - 0.5 * _derivative_of(model_eta))


def metric_A(u: ScalarFunction, A0: float, x0: float, interval: Interval,
             tol_quad: Optional[float] = None) -> ScalarFunction:
    """A(x) = A0 * exp(int_{x0}^x u)."""
    if not A0 > 0:
        raise SpecError("A0 must be positive")
    return A0 * sf_exp(antiderivative(u, x0, interval, tol_quad))


# profiles ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StellarProfile:
    model: StellarModel
    x: np.ndarray
    V: np.ndarray
    A: np.ndarray
    u: np.ndarray
    rho: np.ndarray
    p_r: np.ndarray
    m: np.ndarray
    eta: np.ndarray
    delta: np.ndarray
    functions: Mapping[str, ScalarFunction] = field(repr=False, default_factory=dict)

    @property
    def r(self) -> np.ndarray:
        return np.sqrt(self.x)

    @property
    def p_perp(self) -> np.ndarray:
        return self.p_r + self.delta

    def columns(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PROFILE_COLUMNS}

    def mass_roundtrip(self) -> float:
        """max |m/r^3 - eta| / (1 + |eta|) over the grid."""
        return float(np.max(np.abs(self.m / self.r ** 3 - self.eta) / (1.0 + np.abs(self.eta))))


def _mass(model: StellarModel, rho: ScalarFunction, tol_quad: Optional[float]) -> ScalarFunction:
    # m(r) = 1/2 int_0^r s^2 rho(s^2) ds, density held at its x_eps value below the grid
    x_eps, R = model.x_eps, model.R

    def g(s):
        s = np.asarray(s, dtype=float)
        return s * s * rho(np.maximum(s * s, x_eps))

    integrand = ScalarFunction(g, None, (0.0, R), "r^2 rho")
    return 0.5 * antiderivative(integrand, 0.0, (0.0, R), tol_quad)


def profile(model: StellarModel, u: ScalarFunction, tol_res: float = TOL_RES,
            tol_quad: Optional[float] = None, n: int = PROFILE_POINTS) -> StellarProfile:
    """Sample metric, density, pressures and mass for a solution ``u``."""
    p = riccati_from_physics(model)
    xs = model.grid(n)
    uv = np.asarray(u(xs), dtype=float)
    res = np.abs(residual(p, u, xs)) / (1.0 + np.abs(uv))
    worst = int(np.argmax(res))
    if not res[worst] <= tol_res:
        raise NotASolution(float(res[worst]), float(xs[worst]))

    x = identity(model.domain)
    deta = _derivative_of(model.eta)
    rho = 6.0 * model.eta + 4.0 * x * deta
    p_r = 4.0 * model.V * u - 2.0 * model.eta
    p_perp = p_r + model.delta
    A = metric_A(u, model.A0, model.x_eps, model.domain, tol_quad)
    m = _mass(model, rho, tol_quad)
    return StellarProfile(
        model=model, x=xs, V=model.V(xs), A=A(xs), u=uv, rho=rho(xs), p_r=p_r(xs),
        m=m(np.sqrt(xs)), eta=model.eta(xs), delta=model.delta(xs),
        functions={"rho": rho, "p_r": p_r, "p_perp": p_perp, "u": u, "A": A, "m": m},
    )


def profile_csv(prof: StellarProfile) -> str:
    cols = prof.columns()
    lines = [",".join(PROFILE_COLUMNS)]
    for i in range(prof.x.size):
        lines.append(",".join(format(float(cols[k][i]), ".17g") for k in PROFILE_COLUMNS))
    return "\n".join(lines) + "\n"


# case constructions applied to a model ----------------------------------------------

@dataclass(frozen=True)
class StarSolution:
    model: StellarModel
    construction: ConstructedCase
    u: ScalarFunction
    mismatch: float


def solve_with_case(eta: str, R: float, case: int, f: str, *, delta: Optional[str] = None,
                    A0: float = 1.0, constants: Optional[Mapping[str, float]] = None,
                    branch: Optional[int] = None, C: Optional[float] = None,
                    tol_res: float = TOL_RES, tol_quad: Optional[float] = None) -> StarSolution:
    """Feed the mapped free coefficients of a model to one of the ten cases.

    When the case completes ``a`` and ``delta`` is omitted, the anisotropy is
    derived from the completed ``a``.  Otherwise the completed coefficient has
    to reproduce the mapped one.  ``C`` picks a family member; None means the
    particular solution.
    """
    dom = (CENTER_FRACTION * float(R) ** 2, float(R) ** 2)
    eta_fn = from_expr(eta, (0.0, float(R) ** 2))
    provisional = StellarModel(eta_fn, constant(0.0, (0.0, float(R) ** 2)) if delta is None
                               else from_expr(delta, (0.0, float(R) ** 2)), float(R), A0)
    mapped = riccati_from_physics(provisional)
    entry = CASE_MANIFEST[case]
    if delta is None and entry["completes"] != "a":
        raise SpecError(f"case {case} completes {entry['completes']}; the anisotropy must be given")
    coeffs = {name: getattr(mapped, name) for name in entry["free"]}
    spec = CaseSpec(case, coeffs, from_expr(f, dom), dom, dict(constants or {}), branch, dom[0])
    cc = construct(spec, tol_quad=tol_quad, tol_res=tol_res)
    done = entry["completes"]
    if delta is None:
        model = StellarModel(eta_fn, anisotropy_for(eta_fn, cc.problem.a, dom), float(R), A0)
        mismatch = 0.0
    else:
        model = provisional
        xs = model.grid()
        want = getattr(mapped, done)(xs)
        got = getattr(cc.problem, done)(xs)
        mismatch = float(np.max(np.abs(got - want)) / (1.0 + np.max(np.abs(want))))
        if not mismatch <= tol_res:
            worst = float(xs[int(np.argmax(np.abs(got - want)))])
            raise NotASolution(mismatch, worst)
    u = cc.y_p if C is None else cc.general.member(float(C))
    return StarSolution(model, cc, u, mismatch)


# physicality ------------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionResult:
    label: str
    holds: bool
    status: str  # PASS | NONSTRICT | FAIL | INDETERMINATE
    r_star: Optional[float] = None
    detail: str = ""

    def line(self) -> str:
        where = "" if self.r_star is None else f" r*={self.r_star:.12g}"
        extra = f" {self.detail}" if self.detail else ""
        return f"({self.label}) {self.status}{where}{extra}"


@dataclass(frozen=True)
class PhysicalityReport:
    conditions: tuple[ConditionResult, ...]
    required_A0: float

    def __getitem__(self, label: str) -> ConditionResult:
        for c in self.conditions:
            if c.label == label:
                return c
        raise KeyError(label)

    @property
    def flags(self) -> tuple[bool, ...]:
        return tuple(c.holds for c in self.conditions)

    def to_text(self) -> str:
        return "\n".join(c.line() for c in self.conditions) + "\n"


def _positivity(prof: StellarProfile) -> ConditionResult:
    status, r_star, notes = "PASS", None, []
    for name in ("rho", "p_r", "p_perp"):
        q = getattr(prof, name)
        tol = 1e-12 * max(1.0, float(np.max(np.abs(q))))
        neg = q < -tol
        if neg.any():
            i = int(np.flatnonzero(neg)[0])
            x_star = float(prof.x[i])
            if i > 0 and q[i - 1] > 0:
                fn = prof.functions[name]
                x_star = brentq(lambda t: fn(t), prof.x[i - 1], prof.x[i], xtol=1e-14)
            r = math.sqrt(x_star)
            notes.append(f"{name}<0")
            if r_star is None or r < r_star:
                r_star = r
            status = "FAIL"
        elif np.any(np.abs(q) <= tol) and status != "FAIL":
            status = "NONSTRICT"
            notes.append(f"{name}=0 somewhere")
    return ConditionResult("i", status != "FAIL", status, r_star, " ".join(notes))


def _decreasing(prof: StellarProfile) -> ConditionResult:
    r = prof.r
    status, r_star, notes = "PASS", None, []
    for name in ("rho", "p_r", "p_perp"):
        q = getattr(prof, name)
        g = np.gradient(q, r)
        tol = 1e-9 * max(1.0, float(np.max(np.abs(q)))) / prof.model.R
        up = g > tol
        if up.any():
            i = int(np.flatnonzero(up)[0])
            notes.append(f"d{name}/dr>0")
            r_star = float(r[i]) if r_star is None else min(r_star, float(r[i]))
            status = "FAIL"
        elif np.any(np.abs(g) <= tol) and status != "FAIL":
            status = "NONSTRICT"
            notes.append(f"d{name}/dr=0 somewhere")
    return ConditionResult("ii", status != "FAIL", status, r_star, " ".join(notes))


def _sound_speeds(prof: StellarProfile) -> ConditionResult:
    r = prof.r
    drho = np.gradient(prof.rho, r)
    eps = 1e-9 * max(1.0, float(np.max(np.abs(prof.rho)))) / prof.model.R
    ok = np.abs(drho) > eps
    if not ok.any():
        return ConditionResult("iii", True, "INDETERMINATE", None, "drho/dr vanishes on the whole grid")
    status, r_star, notes = "PASS", None, []
    for name in ("p_r", "p_perp"):
        ratio = np.gradient(getattr(prof, name), r)[ok] / drho[ok]
        bad = (ratio < -1e-9) | (ratio > 1.0 + 1e-9)
        if bad.any():
            status = "FAIL"
            rr = float(r[ok][np.flatnonzero(bad)[0]])
            r_star = rr if r_star is None else min(r_star, rr)
            notes.append(f"d{name}/drho outside [0,1]")
    skipped = int((~ok).sum())
    if skipped:
        notes.append(f"{skipped} indeterminate points")
    return ConditionResult("iii", status == "PASS", status, r_star, " ".join(notes))


def _matching(prof: StellarProfile) -> tuple[ConditionResult, float]:
    R = prof.model.R
    exterior = 1.0 - 2.0 * float(prof.m[-1]) / R
    A_R, V_R = float(prof.A[-1]), float(prof.V[-1])
    dA = abs(A_R ** 2 - exterior)
    dV = abs(V_R - exterior)
    required = prof.model.A0 * math.sqrt(exterior) / A_R if exterior > 0 and A_R > 0 else math.nan
    holds = dA <= TOL_MATCH and dV <= TOL_MATCH
    detail = (f"|A(R)^2-(1-2m/R)|={dA:.3e} |V(R)-(1-2m/R)|={dV:.3e} required_A0={required:.17g} "
              "(matching read as A(R)^2 = V(R) = 1-2m(R)/R)")
    return ConditionResult("iv", holds, "PASS" if holds else "FAIL", None if holds else math.sqrt(prof.x[-1]),
                           detail), required


def _boundary(prof: StellarProfile) -> ConditionResult:
    tol = TOL_BOUNDARY * max(1.0, float(np.max(np.abs(prof.p_r))))
    val = float(prof.p_r[-1])
    holds = abs(val) <= tol
    return ConditionResult("v", holds, "PASS" if holds else "FAIL", None if holds else prof.model.R,
                           f"p_r(R)={val:.17g}")


def physicality_report(prof: StellarProfile) -> PhysicalityReport:
    """Verdicts on the five standard conditions for an anisotropic fluid sphere."""
    iv, required = _matching(prof)
    return PhysicalityReport((_positivity(prof), _decreasing(prof), _sound_speeds(prof), iv, _boundary(prof)),
                             required)


__all__ = [
    "ConditionResult",
    "PhysicalityReport",
    "StarSolution",
    "StellarModel",
    "StellarProfile",
    "anisotropy_for",
    "metric_A",
    "physicality_report",
    "profile",
    "profile_csv",
    "riccati_from_physics",
    "solve_with_case",
]
