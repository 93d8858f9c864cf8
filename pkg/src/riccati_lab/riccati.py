"""Riccati problems y' = a + b*y + c*y^2 and their solution families.

Given one particular solution the whole family follows by quadrature in any
of three equivalent forms (``GS`` uses b, c; ``GS1`` uses a, c; ``GS2`` uses
a, b). All three share the shape ``y = y_p + N(x) / (C - Q(x))`` with
``Q(x0) = 0`` at the base point, which is what :class:`SolutionFamily`
stores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .calculus import (
    CumulativeIntegral, Interval, ScalarFunction, antiderivative, constant,
    differentiate, from_expr, sf_exp,
)
from .errors import (
    CoefficientEvaluationError, DegenerateQuadruple, ParticularNotASolution,
    ParticularVanishes, RiccatiLabError,
)

TOL_RES = 1e-6
TOL_COND = 1e-9
GUARD_RADIUS = 1e-2
EPS_DIV = 1e-10
Y_BLOWUP = 1e8


@dataclass(frozen=True)
class RiccatiProblem:
    a: ScalarFunction
    b: ScalarFunction
    c: ScalarFunction
    interval: Interval

    @classmethod
    def from_exprs(cls, a: str, b: str, c: str, interval: Interval) -> "RiccatiProblem":
        return cls(*(from_expr(s, interval) for s in (a, b, c)), tuple(map(float, interval)))

    def rhs(self, x, y):
        return self.a(x) + self.b(x) * y + self.c(x) * y * y

    def grid(self, n: int = 257) -> np.ndarray:
        return np.linspace(self.interval[0], self.interval[1], n)

    def validate(self, n: int = 257) -> None:
        """Raise CoefficientEvaluationError unless a, b, c are finite on a grid."""
        xs = self.grid(n)
        for name in "abc":
            try:
                vals = getattr(self, name)(xs)
            except RiccatiLabError as exc:
                raise CoefficientEvaluationError(getattr(exc, "x", math.nan), f"{name}: {exc}") from exc
            bad = ~np.isfinite(vals)
            if bad.any():
                raise CoefficientEvaluationError(float(xs[bad][0]), name)


def residual(p: RiccatiProblem, y: ScalarFunction, x):
    """y'(x) - (a + b*y + c*y^2); vectorised over ``x``."""
    xs = np.asarray(x, dtype=float)
    if y.has_derivative:
        dy = y.derivative(xs)
    else:
        dy = np.vectorize(lambda t: differentiate(y, t))(xs)
    yv = y(xs)
    out = dy - (p.a(xs) + p.b(xs) * yv + p.c(xs) * yv * yv)
    return float(out) if np.ndim(out) == 0 else out


def guarded_grid(interval: Interval, n: int, poles=(), radius: float = GUARD_RADIUS) -> np.ndarray:
    """``n``-point grid on ``interval`` with points near any pole removed."""
    xs = np.linspace(interval[0], interval[1], n)
    keep = np.ones(n, dtype=bool)
    for p in poles:
        keep &= np.abs(xs - p) > radius
    return xs[keep]


def sup_residual(p: RiccatiProblem, y: ScalarFunction, xs: np.ndarray) -> float:
    """sup |residual| / (1 + sup |y|) over ``xs``."""
    if len(xs) == 0:
        return 0.0
    r = residual(p, y, xs)
    return float(np.max(np.abs(r)) / (1.0 + np.max(np.abs(y(xs)))))


# families -------------------------------------------------------------------------


@dataclass(frozen=True)
class SolutionFamily:
    """y(x; C) = particular(x) + numerator(x) / (C - denominator(x))."""

    problem: RiccatiProblem
    particular: ScalarFunction
    numerator: ScalarFunction
    denominator: CumulativeIntegral
    formula: str
    x0: float
    _poles: dict = field(default_factory=dict, compare=False, repr=False)

    def member(self, C: float) -> ScalarFunction:
        if math.isinf(C):
            return self.particular
        return self.particular + self.numerator / (float(C) - self.denominator)

    def __call__(self, C: float, x):
        return self.member(C)(x)

    def match_constant(self, x: float, y: float) -> float:
        """Constant C for which the member passes through (x, y)."""
        dy = y - self.particular(x)
        if dy == 0:
            return math.inf
        return float(self.denominator(x) + self.numerator(x) / dy)

    def poles(self, C: float, n: int = 1025) -> list[float]:
        """Zeros of C - Q(x) on the interval, located by bisection to 1e-10."""
        if math.isinf(C):
            return []
        key = (float(C), n)
        if key in self._poles:
            return list(self._poles[key])
        xs = np.linspace(*self.problem.interval, n)
        d = float(C) - self.denominator(xs)
        found = [float(x) for x in xs[d == 0]]
        s = np.sign(d)
        idx = np.flatnonzero(s[:-1] * s[1:] < 0)

        def fn(t):
            return float(C) - self.denominator(t)

        for i in idx:
            found.append(brentq(fn, xs[i], xs[i + 1], xtol=1e-10, rtol=4 * np.finfo(float).eps))
        found.sort()
        self._poles[key] = tuple(found)
        return found

    def safe_grid(self, C: float, n: int = 257, radius: float = GUARD_RADIUS) -> np.ndarray:
        return guarded_grid(self.problem.interval, n, self.poles(C), radius)


def _base(p: RiccatiProblem, x0: Optional[float]) -> float:
    return p.interval[0] if x0 is None else float(x0)


def check_particular(p: RiccatiProblem, y_p: ScalarFunction, tol_res: float = TOL_RES,
                     probes: int = 16) -> None:
    xs = np.linspace(p.interval[0], p.interval[1], probes)
    r = np.abs(residual(p, y_p, xs)) / (1.0 + np.abs(y_p(xs)))
    i = int(np.argmax(r))
    if not r[i] <= tol_res:
        raise ParticularNotASolution(float(r[i]), float(xs[i]))


def family_from_bc(p: RiccatiProblem, y_p: ScalarFunction, x0: Optional[float] = None,
                   tol_quad: Optional[float] = None, tol_res: float = TOL_RES) -> SolutionFamily:
    """General solution from a particular one using b and c."""
    check_particular(p, y_p, tol_res)
    x0 = _base(p, x0)
    E = sf_exp(antiderivative(p.b + 2.0 * p.c * y_p, x0, p.interval, tol_quad))
    Q = antiderivative(p.c * E, x0, p.interval, tol_quad)
    return SolutionFamily(p, y_p, E, Q, "GS", x0)


def _check_nonvanishing(p: RiccatiProblem, y_p: ScalarFunction, n: int = 257) -> None:
    xs = p.grid(n)
    v = y_p(xs)
    scale = max(1.0, float(np.max(np.abs(v))))
    small = np.abs(v) < EPS_DIV * scale
    if small.any():
        raise ParticularVanishes(float(xs[small][0]))
    s = np.sign(v)
    flip = np.flatnonzero(s[:-1] * s[1:] < 0)
    if flip.size:
        i = flip[0]
        raise ParticularVanishes(brentq(lambda t: y_p(t), xs[i], xs[i + 1], xtol=1e-12))


def _derivative_of(f: ScalarFunction) -> ScalarFunction:
    if f.has_derivative:
        return f.derivative
    return ScalarFunction(np.vectorize(lambda t: differentiate(f, t)), None, f.domain, f"d({f.label})")


def family_from_ac(p: RiccatiProblem, y_p: ScalarFunction, x0: Optional[float] = None,
                   tol_quad: Optional[float] = None, tol_res: float = TOL_RES) -> SolutionFamily:
    """General solution from a particular one using a and c (divides by y_p)."""
    _check_nonvanishing(p, y_p)
    check_particular(p, y_p, tol_res)
    x0 = _base(p, x0)
    E = sf_exp(antiderivative(p.c * y_p - p.a / y_p, x0, p.interval, tol_quad))
    N = y_p * E
    Q = antiderivative(p.c * N, x0, p.interval, tol_quad)
    return SolutionFamily(p, y_p, N, Q, "GS1", x0)


def family_from_ab(p: RiccatiProblem, y_p: ScalarFunction, x0: Optional[float] = None,
                   tol_quad: Optional[float] = None, tol_res: float = TOL_RES) -> SolutionFamily:
    """General solution from a particular one using a and b (divides by y_p).

    The denominator integrand keeps the literal ``y_p' - a - b*y_p`` (which
    equals ``c*y_p**2`` for a true solution).
    """
    _check_nonvanishing(p, y_p)
    check_particular(p, y_p, tol_res)
    x0 = _base(p, x0)
    E = sf_exp(-1.0 * antiderivative(p.b + 2.0 * p.a / y_p, x0, p.interval, tol_quad))
    weight = _derivative_of(y_p) - p.a - p.b * y_p
    Q = antiderivative(weight * E, x0, p.interval, tol_quad)
    return SolutionFamily(p, y_p, y_p * y_p * E, Q, "GS2", x0)


# numerical oracle -----------------------------------------------------------------

# Dormand-Prince 5(4)
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)
_E = tuple(b5 - b4 for b5, b4 in zip(_B5, _B4))


@dataclass(frozen=True)
class Trajectory:
    x: np.ndarray
    y: np.ndarray
    reason: str  # "reached-end" | "pole-detected" | "step-failure"
    pole_x: Optional[float]
    rtol: float
    atol: float


def integrate_numeric(p: RiccatiProblem, x0: float, y0: float, direction: int, x_end: float,
                      rtol: float = 1e-9, atol: float = 1e-12, y_blowup: float = Y_BLOWUP,
                      max_steps: int = 200000) -> Trajectory:
    """Adaptive Dormand-Prince 5(4) integration with blow-up detection.

    Stops with ``pole-detected`` when |y| exceeds ``y_blowup`` or the step size
    collapses below ``1e-13 * |I|``; ``pole_x`` is then the last good abscissa.
    """
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    span = float(x_end) - float(x0)
    if span * direction < 0:
        raise ValueError("x_end lies on the wrong side of x0 for this direction")
    width = p.interval[1] - p.interval[0]
    h_min = 1e-13 * width
    h_max = abs(span) / 32.0 if span else 0.0

    a_fn, b_fn, c_fn = p.a, p.b, p.c

    def f(x, y):
        try:
            av, bv, cv = a_fn(x), b_fn(x), c_fn(x)
        except RiccatiLabError as exc:
            raise CoefficientEvaluationError(x, str(exc)) from exc
        if not (math.isfinite(av) and math.isfinite(bv) and math.isfinite(cv)):
            raise CoefficientEvaluationError(x)
        return av + y * (bv + cv * y)

    x, y = float(x0), float(y0)
    xs, ys = [x], [y]
    reason, pole_x = "reached-end", None
    if span == 0:
        return Trajectory(np.array(xs), np.array(ys), reason, None, rtol, atol)

    k1 = f(x, y)
    scale = atol + rtol * abs(y)
    d0, d1 = abs(y) / scale, abs(k1) / scale
    h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h = min(max(h, 10 * h_min), h_max)
    steps = 0
    while (x_end - x) * direction > 0:
        steps += 1
        if steps > max_steps:
            reason = "step-failure"
            break
        h = min(h, abs(x_end - x))
        hs = h * direction
        k = [k1]
        for s in range(1, 7):
            yi = y + hs * sum(aij * kj for aij, kj in zip(_A[s], k))
            k.append(f(x + _C[s] * hs, yi))
        y_new = y + hs * sum(bi * ki for bi, ki in zip(_B5, k))
        err_est = hs * sum(ei * ki for ei, ki in zip(_E, k))
        err = abs(err_est) / (atol + rtol * max(abs(y), abs(y_new)))
        if not math.isfinite(y_new) or not math.isfinite(err):
            err = math.inf
        if err <= 1.0:
            x_next = x_end if h >= abs(x_end - x) else x + hs
            if abs(y_new) > y_blowup:
                reason, pole_x = "pole-detected", x
                break
            x, y = x_next, y_new
            xs.append(x)
            ys.append(y)
            k1 = k[6]
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h = min(h * fac, h_max)
        else:
            h *= max(0.2, 0.9 * err ** -0.2) if math.isfinite(err) else 0.2
            if h < h_min:
                reason, pole_x = "pole-detected", x
                break
    xa, ya = np.array(xs), np.array(ys)
    if direction < 0:
        xa, ya = xa[::-1].copy(), ya[::-1].copy()
    return Trajectory(xa, ya, reason, pole_x, rtol, atol)


# cross-ratio ----------------------------------------------------------------------


def cross_ratio(y1: ScalarFunction, y2: ScalarFunction, y3: ScalarFunction,
                y4: ScalarFunction, x, eps_div: float = EPS_DIV):
    """((y1-y3)(y2-y4)) / ((y1-y4)(y2-y3)); constant in x for four solutions."""
    v1, v2, v3, v4 = (np.asarray(f(x), dtype=float) for f in (y1, y2, y3, y4))
    d1, d2 = v1 - v4, v2 - v3
    scale = 1.0 + np.maximum.reduce([np.abs(v1), np.abs(v2), np.abs(v3), np.abs(v4)])
    if np.any(np.abs(d1) < eps_div * scale) or np.any(np.abs(d2) < eps_div * scale):
        raise DegenerateQuadruple("cross-ratio denominator vanishes")
    out = (v1 - v3) * (v2 - v4) / (d1 * d2)
    return float(out) if np.ndim(out) == 0 else out


# classical integrability conditions -----------------------------------------------


@dataclass
class ClassicalReport:
    sum_zero: bool
    sum_zero_residual: float
    sum_zero_family: Optional[Callable[[float], ScalarFunction]]
    lambda_mu: bool
    lambda_mu_pair: Optional[tuple[float, float]]
    lambda_mu_residual: float
    lambda_mu_candidates: list = field(default_factory=list)
    c_is_one: bool = False
    constant_discriminant: bool = False
    discriminant: Optional[float] = None
    discriminant_roots: Optional[tuple[ScalarFunction, ScalarFunction]] = None
    complex_branch: bool = False
    polynomial_coefficients: bool = False

    def flags(self) -> tuple[bool, bool, bool]:
        return (self.sum_zero, self.lambda_mu, self.constant_discriminant)


def _sum_zero_family(p: RiccatiProblem, x0: float) -> Callable[[float], ScalarFunction]:
    E = sf_exp(antiderivative(p.c - p.a, x0, p.interval))
    S0 = antiderivative((p.c + p.a) * E, x0, p.interval)

    def member(K: float) -> ScalarFunction:
        if math.isinf(K):
            return constant(1.0, p.interval)
        S = S0 + float(K)
        return (S - E) / (S + E)

    return member


def _normalise_pair(lam: float, mu: float) -> tuple[float, float]:
    s = abs(lam) + abs(mu)
    lam, mu = lam / s, mu / s
    if lam < 0 or (lam == 0 and mu < 0):
        lam, mu = -lam, -mu
    return (lam + 0.0, mu + 0.0)


def _lambda_mu(av, bv, cv, tol_cond):
    M = np.column_stack([cv, bv, av])
    scale = 1.0 + float(np.max(np.abs(M)))
    _, s, vt = np.linalg.svd(M / scale, full_matrices=False)
    null = int(np.sum(s <= 1e-10 * max(s[0], 1e-300))) if s[0] > 0 else 3
    cands = []
    if null == 3:
        cands = [(1.0, 0.0)]
    elif null == 2:
        w1, w2, w3 = vt[0]
        if abs(w1) <= 1e-12:
            cands.append((1.0, 0.0))
            if abs(w2) > 1e-12:
                cands.append((-w3 / w2, 1.0))
        else:
            disc = w2 * w2 - 4 * w1 * w3
            if disc >= -1e-12:
                r = math.sqrt(max(disc, 0.0))
                for t in sorted({(-w2 + r) / (2 * w1), (-w2 - r) / (2 * w1)}, reverse=True):
                    cands.append((t, 1.0))
    elif null == 1:
        v1, v2, v3 = vt[-1]
        cands.append((v2, v3) if abs(v3) >= abs(v1) else (v1, v2))
    out = []
    for lam, mu in cands:
        if abs(lam) + abs(mu) == 0:
            continue
        lam, mu = _normalise_pair(lam, mu)
        res = float(np.max(np.abs(lam * lam * cv + lam * mu * bv + mu * mu * av))) / scale
        out.append(((lam, mu), res))
    out.sort(key=lambda t: t[1])
    return out


def _looks_polynomial(v: np.ndarray, xs: np.ndarray, deg: int = 10) -> bool:
    t = (2 * xs - xs[0] - xs[-1]) / (xs[-1] - xs[0])
    coef = np.polynomial.chebyshev.chebfit(t, v, deg)
    fit = np.polynomial.chebyshev.chebval(t, coef)
    return bool(np.max(np.abs(fit - v)) <= 1e-12 * (1.0 + np.max(np.abs(v))))


def detect_classical(p: RiccatiProblem, n: int = 129, tol_cond: float = TOL_COND,
                     x0: Optional[float] = None) -> ClassicalReport:
    """Check the classical integrability conditions on an ``n``-point grid."""
    xs = p.grid(n)
    av, bv, cv = p.a(xs), p.b(xs), p.c(xs)
    scale = 1.0 + max(np.max(np.abs(av)), np.max(np.abs(bv)), np.max(np.abs(cv)))
    x0 = _base(p, x0)

    sz_res = float(np.max(np.abs(av + bv + cv))) / scale
    sum_zero = bool(sz_res <= tol_cond)
    family = _sum_zero_family(p, x0) if sum_zero else None

    lm = _lambda_mu(av, bv, cv, tol_cond)
    lm_ok = [c for c in lm if c[1] <= tol_cond]
    lam_mu = bool(lm_ok)

    c_is_one = bool(float(np.max(np.abs(cv - 1.0))) <= tol_cond)
    report = ClassicalReport(
        sum_zero, sz_res, family, lam_mu,
        lm_ok[0][0] if lm_ok else None,
        lm[0][1] if lm else math.inf,
        [c[0] for c in lm_ok],
        c_is_one=c_is_one,
    )
    if not c_is_one:
        return report
    db = np.array([differentiate(p.b, t) for t in xs]) if not p.b.has_derivative else p.b.derivative(xs)
    disc = bv * bv - 2.0 * db - 4.0 * av
    d0 = float(np.mean(disc))
    report.constant_discriminant = bool(np.max(np.abs(disc - d0)) <= tol_cond * (1.0 + abs(d0)))
    report.polynomial_coefficients = _looks_polynomial(av, xs) and _looks_polynomial(bv, xs)
    if report.constant_discriminant:
        if abs(d0) <= tol_cond:
            d0 = 0.0
        report.discriminant = d0
        if d0 < 0:
            report.complex_branch = True
        else:
            root = math.sqrt(d0)
            report.discriminant_roots = (
                (p.b + root) * -0.5,
                (p.b - root) * -0.5,
            )
    return report


__all__ = [
    "RiccatiProblem", "SolutionFamily", "Trajectory", "ClassicalReport",
    "residual", "sup_residual", "guarded_grid", "check_particular",
    "family_from_bc", "family_from_ac", "family_from_ab", "integrate_numeric",
    "cross_ratio", "detect_classical", "TOL_RES", "TOL_COND", "GUARD_RADIUS",
    "EPS_DIV", "Y_BLOWUP",
]
