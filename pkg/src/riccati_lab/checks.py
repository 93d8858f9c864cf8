"""Random case specs and the per-spec verification battery.

A spec is drawn from smooth random inputs (cubic polynomial plus one
bounded trigonometric term) and rejected until every guard of its case
holds with a margin.  :func:`check_case` then measures the residuals of the
construction against independent references.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .cases import CASE_MANIFEST, CaseSpec, ConstructedCase, construct, seed_relation_check, theorem_family
from .errors import RiccatiLabError
from .riccati import (
    GUARD_RADIUS,
    TOL_COND,
    TOL_RES,
    cross_ratio,
    family_from_ab,
    family_from_ac,
    guarded_grid,
    integrate_numeric,
    sup_residual,
)

FUZZ_INTERVAL = (0.0, 1.0)
GUARD_MARGIN = 0.05
MAX_MAGNITUDE = 30.0
MAX_TRIES = 500

TOL_ORACLE = 1e-6
TOL_POLE = 1e-3
TOL_EQUIV = 1e-8
TOL_SEED = 1e-8


@dataclass(frozen=True)
class Tolerances:
    condition: float = TOL_COND
    seed: float = TOL_SEED
    particular: float = TOL_RES
    family: float = TOL_RES
    oracle: float = TOL_ORACLE
    pole: float = TOL_POLE
    theorem: float = TOL_EQUIV
    equivalent: float = TOL_EQUIV
    cross_ratio: float = TOL_EQUIV


# random inputs ----------------------------------------------------------------------

def _num(v: float) -> str:
    return f"{abs(v):.4f}"


def random_function(rng: np.random.Generator, offset: float = 0.0, spread: float = 1.0,
                    sign: Optional[float] = None) -> str:
    """Source text of ``p0 + p1 x + p2 x^2 + p3 x^3 + q trig(w x + phi)``.

    ``offset`` pushes the constant term away from zero, with sign ``sign``
    (random when None); ``spread`` scales the coefficients.
    """
    p0 = rng.uniform(-1.0, 1.0) * spread
    if offset:
        s = rng.choice([-1.0, 1.0]) if sign is None else sign
        p0 = math.copysign(offset + abs(p0), s)
    p = [p0] + list(rng.uniform(-0.5, 0.5, 3) * spread)
    q = rng.uniform(-0.3, 0.3) * spread
    w = rng.uniform(0.5, 3.0)
    phi = rng.uniform(0.0, math.pi)
    trig = "sin" if rng.random() < 0.5 else "cos"
    terms = [(p[0], ""), (p[1], "*x"), (p[2], "*x^2"), (p[3], "*x^3"),
             (q, f"*{trig}({_num(w)}*x + {_num(phi)})")]
    out = "-" if p[0] < 0 else ""
    out += _num(p[0]) + terms[0][1]
    for v, tail in terms[1:]:
        out += (" - " if v < 0 else " + ") + _num(v) + tail
    return out


def _draw(case: int, rng: np.random.Generator) -> CaseSpec:
    entry = CASE_MANIFEST[case]
    coeffs = {}
    for name in entry["free"]:
        coeffs[name] = random_function(rng, offset=1.0 if name == "c" else 0.0)
    if case in (2, 4):
        f = random_function(rng, offset=1.0, spread=0.5, sign=1.0)
    elif case == 8:
        f = random_function(rng, offset=1.0)
    else:
        f = random_function(rng)
    consts = {k: float(np.round(rng.uniform(-1.0, 1.0), 4)) for k in entry["constants"]}
    branch = None
    if entry["branch"]:
        branch = -1 if case == 3 else int(rng.choice([-1, 1]))
    return CaseSpec.from_exprs(case, FUZZ_INTERVAL, f=f, branch=branch, constants=consts, **coeffs)


def _acceptable(cc: ConstructedCase) -> bool:
    xs = np.linspace(*cc.spec.interval, 257)
    for g, sign in cc.guards.values():
        v = np.asarray(g(xs), dtype=float)
        if np.min(sign * v if sign else np.abs(v)) < GUARD_MARGIN:
            return False
    p = cc.problem
    for g in (p.a, p.b, p.c, cc.y_p):
        if not np.max(np.abs(g(xs))) <= MAX_MAGNITUDE:
            return False
    return True


def random_spec(case: int, rng: np.random.Generator) -> tuple[CaseSpec, ConstructedCase]:
    """Draw specs until one constructs with every guard held by a margin."""
    for _ in range(MAX_TRIES):
        spec = _draw(case, rng)
        try:
            cc = construct(spec)
        except RiccatiLabError:
            continue
        if _acceptable(cc):
            return spec, cc
    raise RuntimeError(f"no acceptable spec for case {case} after {MAX_TRIES} draws")


def case_rng(seed: int, case: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(case)])


# verification battery ---------------------------------------------------------------

@dataclass
class CaseCheck:
    """Residuals of one construction.  NaN marks a check that did not apply."""

    case: int
    digest: str
    condition: float = math.nan
    seed: float = math.nan
    particular: float = math.nan
    family: float = math.nan
    oracle: float = math.nan
    pole_gap: float = math.nan
    theorem: float = math.nan
    gs1: float = math.nan
    gs2: float = math.nan
    cross_ratio: float = math.nan
    error: str = ""

    METRICS = ("condition", "seed", "particular", "family", "oracle", "pole_gap", "theorem", "gs1", "gs2", "cross_ratio")

    def failures(self, tol: Tolerances = Tolerances()) -> list[str]:
        limits = {
            "condition": tol.condition, "seed": tol.seed, "particular": tol.particular, "family": tol.family,
            "oracle": tol.oracle, "pole_gap": tol.pole, "theorem": tol.theorem,
            "gs1": tol.equivalent, "gs2": tol.equivalent, "cross_ratio": tol.cross_ratio,
        }
        bad = [k for k, lim in limits.items() if not (math.isnan(getattr(self, k)) or getattr(self, k) <= lim)]
        if self.error:
            bad.append("error")
        return bad

    def passed(self, tol: Tolerances = Tolerances()) -> bool:
        return not self.failures(tol)

    def row(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _pointwise(y1: np.ndarray, y2: np.ndarray) -> float:
    return float(np.max(np.abs(y1 - y2) / (1.0 + np.abs(y2))))


def _oracle(cc: ConstructedCase, C: float) -> tuple[float, float]:
    fam = cc.general
    x0, (lo, hi) = cc.spec.x0, cc.spec.interval
    y0 = float(fam(C, x0))
    poles = fam.poles(C)
    errs, stops = [], []
    for direction, end in ((1, hi), (-1, lo)):
        if end == x0:
            continue
        tr = integrate_numeric(cc.problem, x0, y0, direction, end)
        ahead = [q for q in poles if (q - x0) * direction > 0]
        first = min(ahead, key=lambda q: abs(q - x0)) if ahead else None
        keep = np.ones(tr.x.shape, bool)
        for q in poles:
            keep &= np.abs(tr.x - q) > GUARD_RADIUS
        if keep.any():
            ycf = np.asarray(fam(C, tr.x[keep]), dtype=float)
            errs.append(float(np.max(np.abs(ycf - tr.y[keep]) / np.maximum(1.0, np.abs(tr.y[keep])))))
        if tr.reason == "pole-detected":
            stops.append(abs(first - tr.pole_x) if first is not None else math.inf)
        elif first is not None:
            stops.append(math.inf)
    return (max(errs) if errs else math.nan), (max(stops) if stops else math.nan)


def check_case(cc: ConstructedCase, rng: np.random.Generator, n_family: int = 8,
               n_oracle: int = 1, n_theorem: int = 3) -> CaseCheck:
    """Run the verification battery on one construction."""
    out = CaseCheck(cc.case, cc.spec.digest() if cc.spec.sources else "")
    try:
        _fill(out, cc, rng, n_family, n_oracle, n_theorem)
    except RiccatiLabError as exc:
        out.error = f"{type(exc).__name__}: {exc}"
    return out


def _fill(out: CaseCheck, cc: ConstructedCase, rng, n_family, n_oracle, n_theorem) -> None:
    p, fam, x0 = cc.problem, cc.general, cc.spec.x0
    out.condition = cc.condition_residual
    out.seed = seed_relation_check(cc)
    out.particular = sup_residual(p, cc.y_p, p.grid())

    # offsets 1/C at the base point, kept away from zero
    u = rng.uniform(0.1, 2.0, n_family) * rng.choice([-1.0, 1.0], n_family)
    Cs = [fam.match_constant(x0, float(cc.y_p(x0)) + v) for v in u]
    out.family = max(sup_residual(p, fam.member(C), fam.safe_grid(C)) for C in Cs)

    oracle = [_oracle(cc, C) for C in Cs[:n_oracle]]
    if oracle:
        out.oracle = max(o[0] for o in oracle)
    gaps = [o[1] for o in oracle if not math.isnan(o[1])]
    out.pole_gap = max(gaps) if gaps else math.nan

    th = theorem_family(cc) if n_theorem and not (cc.case == 3 and cc.spec.branch != -1) else None
    if th is not None:
        errs = []
        for C in Cs[:n_theorem]:
            xs = fam.safe_grid(C)
            K = th.match_constant(x0, float(fam(C, x0)))
            errs.append(_pointwise(th(K, xs), fam(C, xs)))
        out.theorem = max(errs)

    yv = cc.y_p(p.grid())
    if np.min(np.abs(yv)) >= GUARD_MARGIN * (1.0 + np.max(np.abs(yv))):
        for name, build in (("gs1", family_from_ac), ("gs2", family_from_ab)):
            alt = build(p, cc.y_p, x0)
            errs = []
            for C in Cs[:2]:
                xs = fam.safe_grid(C)
                K = alt.match_constant(x0, float(fam(C, x0)))
                errs.append(_pointwise(alt(K, xs), fam(C, xs)))
            setattr(out, name, max(errs))

    quad = Cs[:4]
    poles = [q for C in quad for q in fam.poles(C)]
    xs = guarded_grid(p.interval, 16, poles)
    if xs.size >= 2:
        r = cross_ratio(*(fam.member(C) for C in quad), xs)
        out.cross_ratio = float((np.max(r) - np.min(r)) / (1.0 + np.max(np.abs(r))))


def fuzz_case(case: int, n: int, seed: int) -> list[CaseCheck]:
    rng = case_rng(seed, case)
    results = []
    for _ in range(n):
        _, cc = random_spec(case, rng)
        results.append(check_case(cc, rng))
    return results


__all__ = [
    "CaseCheck",
    "FUZZ_INTERVAL",
    "Tolerances",
    "case_rng",
    "check_case",
    "fuzz_case",
    "random_function",
    "random_spec",
]
