"""Scalar functions, numerical differentiation and cumulative quadrature.

:class:`ScalarFunction` wraps a vectorised evaluator together with an optional
derivative. Arithmetic on scalar functions builds new ones and propagates the
derivative by the usual rules, so anything assembled from expressions and
antiderivatives keeps an exact derivative of the function that is actually
evaluated.

:class:`CumulativeIntegral` is a piecewise Chebyshev antiderivative built by
adaptive panel subdivision. Its derivative is the Chebyshev interpolant of the
integrand, i.e. the true derivative of the piecewise polynomial it evaluates.
"""

from __future__ import annotations

import math
import os
from typing import Callable, Optional, Union

import numpy as np

from . import exprlang
from .errors import NonFiniteIntegrand, OutOfDomain, ToleranceNotMet

__all__ = [
    "ScalarFunction", "CumulativeIntegral", "constant", "identity", "from_expr",
    "sf_exp", "sf_sqrt", "sf_log", "differentiate", "antiderivative",
    "eval_integral", "reference_antiderivative", "default_tol_quad",
]

Number = Union[int, float]
Interval = tuple[float, float]
_FULL = (-math.inf, math.inf)

DEFAULT_TOL_QUAD = 1e-10


def default_tol_quad() -> float:
    """Quadrature tolerance, overridable with ``RICCATI_LAB_TOL_QUAD``."""
    raw = os.environ.get("RICCATI_LAB_TOL_QUAD")
    if raw:
        val = float(raw)
        if not val > 0:
            raise ValueError("RICCATI_LAB_TOL_QUAD must be positive")
        return val
    return DEFAULT_TOL_QUAD


def _intersect(a: Interval, b: Interval) -> Interval:
    return (max(a[0], b[0]), min(a[1], b[1]))


def _short(label: str) -> str:
    # composite labels are informational; keep them from growing without bound
    return label if len(label) <= 60 else label[:57] + "..."


def _memo_last(fn: Callable) -> Callable:
    """Reuse the previous result when called again with the very same object.

    Composite functions pass one argument object down their whole tree, so a
    subtree shared by several parents is evaluated once per top-level call.
    """
    slot = [(None, None)]

    def g(x):
        last_x, last_out = slot[0]
        if x is last_x:
            return last_out
        out = fn(x)
        slot[0] = (x, out)
        return out

    return g


class ScalarFunction:
    """Real function of one real variable on a closed interval.

    ``derivative`` may be another ScalarFunction, a zero-argument callable that
    builds one on demand, or None.
    """

    __slots__ = ("_fn", "_deriv", "_has_deriv", "domain", "label")

    def __init__(
        self,
        fn: Callable[[np.ndarray], np.ndarray],
        derivative: Union["ScalarFunction", Callable[[], "ScalarFunction"], None] = None,
        domain: Interval = _FULL,
        label: str = "",
    ):
        self._fn = _memo_last(fn)
        self._deriv = derivative
        self._has_deriv = derivative is not None
        self.domain = (float(domain[0]), float(domain[1]))
        self.label = label

    # evaluation ----------------------------------------------------------------

    def _check_domain(self, x: np.ndarray) -> None:
        lo, hi = self.domain
        slack = 1e-12 * max(1.0, abs(lo), abs(hi)) if math.isfinite(hi - lo) else 0.0
        if x.size and ((x < lo - slack).any() or (x > hi + slack).any()):
            bad = x[(x < lo - slack) | (x > hi + slack)]
            raise OutOfDomain(float(bad.ravel()[0]), self.domain)

    def __call__(self, x):
        if isinstance(x, float):
            lo, hi = self.domain
            if lo <= x <= hi:
                return float(self._fn(x))
        xa = np.array(x, dtype=float)  # fresh object, so memoized subtrees never go stale
        self._check_domain(xa)
        out = self._fn(xa)
        if np.ndim(out) == 0 and xa.ndim == 0:
            return float(out)
        return np.broadcast_to(np.asarray(out, dtype=float), xa.shape).copy()

    @property
    def has_derivative(self) -> bool:
        return self._has_deriv

    @property
    def derivative(self) -> Optional["ScalarFunction"]:
        d = self._deriv
        if d is None or isinstance(d, ScalarFunction):
            return d
        d = d()
        self._deriv = d
        return d

    def with_domain(self, domain: Interval) -> "ScalarFunction":
        deriv = (lambda: self.derivative.with_domain(domain)) if self._has_deriv else None
        return ScalarFunction(self._fn, deriv, domain, self.label)

    def __repr__(self) -> str:
        return f"ScalarFunction({self.label or '<anon>'}, domain={self.domain})"

    # arithmetic ----------------------------------------------------------------

    def _binary(self, other, fn, dfn, sym):
        if not isinstance(other, ScalarFunction):
            other = constant(float(other))
        f, g = self, other
        deriv = (lambda: dfn(f, g)) if f._has_deriv and g._has_deriv else None
        return ScalarFunction(
            lambda x: fn(f._fn(x), g._fn(x)), deriv,
            _intersect(f.domain, g.domain), _short(f"({f.label} {sym} {g.label})"),
        )

    def __add__(self, other):
        return self._binary(other, np.add, lambda f, g: f.derivative + g.derivative, "+")

    def __radd__(self, other):
        return constant(float(other)) + self

    def __sub__(self, other):
        return self._binary(other, np.subtract, lambda f, g: f.derivative - g.derivative, "-")

    def __rsub__(self, other):
        return constant(float(other)) - self

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            k = float(other)
            f = self
            deriv = (lambda: f.derivative * k) if f._has_deriv else None
            return ScalarFunction(lambda x: k * f._fn(x), deriv, f.domain, _short(f"{k!r}*{f.label}"))
        return self._binary(
            other, np.multiply,
            lambda f, g: f.derivative * g + f * g.derivative, "*",
        )

    def __rmul__(self, other):
        return self * other

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return self * (1.0 / float(other))
        return self._binary(
            other, np.divide,
            lambda f, g: (f.derivative * g - f * g.derivative) / (g * g), "/",
        )

    def __rtruediv__(self, other):
        return constant(float(other)) / self

    def __neg__(self):
        return self * -1.0

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise TypeError("only non-negative integer powers are supported")
        f = self
        deriv = (lambda: (f ** (n - 1)) * f.derivative * float(n)) if f._has_deriv and n else None
        return ScalarFunction(lambda x: f._fn(x) ** n, deriv, f.domain, _short(f"{f.label}^{n}"))


def constant(value: float, domain: Interval = _FULL) -> ScalarFunction:
    v = float(value)
    return ScalarFunction(lambda x: np.full(np.shape(x), v),
                          lambda: constant(0.0, domain), domain, repr(v))


def identity(domain: Interval = _FULL) -> ScalarFunction:
    return ScalarFunction(lambda x: x, lambda: constant(1.0, domain), domain, "x")


def from_expr(e: Union[str, exprlang.Expr], domain: Interval = _FULL, label: str = "") -> ScalarFunction:
    """Wrap an expression (or its source) with its symbolic derivative."""
    if isinstance(e, str):
        src = e
        e = exprlang.parse(e)
    else:
        src = exprlang.to_string(e)
    return ScalarFunction(
        lambda x, _e=e: exprlang.evaluate(_e, x),
        lambda: from_expr(exprlang.derive(e), domain),
        domain, label or src,
    )


def _unary(f: ScalarFunction, fn, dfn, name: str) -> ScalarFunction:
    deriv = (lambda: dfn(f)) if f.has_derivative else None
    return ScalarFunction(lambda x: fn(f._fn(x)), deriv, f.domain, _short(f"{name}({f.label})"))


def sf_exp(f: ScalarFunction) -> ScalarFunction:
    out = None

    def d(_f):
        return out * _f.derivative

    out = _unary(f, np.exp, d, "exp")
    return out


def sf_sqrt(f: ScalarFunction) -> ScalarFunction:
    out = None

    def d(_f):
        return _f.derivative / (out * 2.0)

    out = _unary(f, np.sqrt, d, "sqrt")
    return out


def sf_log(f: ScalarFunction) -> ScalarFunction:
    return _unary(f, np.log, lambda _f: _f.derivative / _f, "log")


# differentiation -------------------------------------------------------------------

_FD_STEP = np.finfo(float).eps ** 0.2


def differentiate(f: ScalarFunction, x: float) -> float:
    """f'(x): exact when ``f`` carries a derivative, else a 4th-order difference.

    The difference is central with ``h = eps**(1/5) * (1 + |x|)``; within ``2h``
    of an edge of the domain a one-sided 4th-order stencil is used instead.
    """
    x = float(x)
    lo, hi = f.domain
    if not lo <= x <= hi:
        raise OutOfDomain(x, f.domain)
    if f.has_derivative:
        return float(f.derivative(x))
    h = _FD_STEP * (1.0 + abs(x))
    if x - 2 * h >= lo and x + 2 * h <= hi:
        pts = f(np.array([x - 2 * h, x - h, x + h, x + 2 * h]))
        return float((pts[0] - 8 * pts[1] + 8 * pts[2] - pts[3]) / (12 * h))
    if hi - lo < 4 * h:
        raise OutOfDomain(x, f.domain)
    s = 1.0 if x - 2 * h < lo else -1.0
    pts = f(x + s * h * np.arange(5))
    return float(s * (-25 * pts[0] + 48 * pts[1] - 36 * pts[2] + 16 * pts[3] - 3 * pts[4]) / (12 * h))


# Chebyshev panels -----------------------------------------------------------------

_DEG = 24
_N = _DEG + 1
_THETA = np.pi * (np.arange(_N) + 0.5) / _N
_TNODES = np.cos(_THETA)
_DCT = (2.0 / _N) * np.cos(np.outer(np.arange(_N), _THETA))
_DCT[0] *= 0.5
# maps fit coefficients c_0..c_DEG to antiderivative coefficients on [-1, 1]
# with value 0 at t = -1 (before scaling by the half-width)
_INT = np.stack([np.polynomial.chebyshev.chebint(np.eye(_N)[k], lbnd=-1) for k in range(_N)])


def _clenshaw(coef: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Evaluate rows of ``coef`` (one row per point) at ``t``."""
    b1 = np.zeros_like(t)
    b2 = np.zeros_like(t)
    t2 = 2.0 * t
    for k in range(coef.shape[1] - 1, 0, -1):
        b1, b2 = coef[:, k] + t2 * b1 - b2, b1
    return coef[:, 0] + t * b1 - b2


class CumulativeIntegral(ScalarFunction):
    """F(x) = integral of ``integrand`` from ``x0`` to ``x`` on ``interval``."""

    __slots__ = ("integrand", "x0", "breaks", "fit", "anti", "offsets", "tol", "achieved")

    def __init__(self, integrand: ScalarFunction, x0: float, interval: Interval,
                 breaks: np.ndarray, fit: np.ndarray, anti: np.ndarray,
                 offsets: np.ndarray, tol: float, achieved: float):
        self.integrand = integrand
        self.x0 = float(x0)
        self.breaks = breaks
        self.fit = fit
        self.anti = anti
        self.offsets = offsets
        self.tol = tol
        self.achieved = achieved
        super().__init__(self._evaluate, self._interp_derivative, interval,
                         _short(f"int({integrand.label})"))

    def _locate(self, x: np.ndarray):
        k = np.clip(np.searchsorted(self.breaks, x, side="right") - 1, 0, len(self.breaks) - 2)
        lo = self.breaks[k]
        hi = self.breaks[k + 1]
        t = np.clip((2.0 * x - lo - hi) / (hi - lo), -1.0, 1.0)
        return k, t, 0.5 * (hi - lo)

    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        xs = np.atleast_1d(x)
        k, t, hw = self._locate(xs.ravel())
        val = self.offsets[k] + hw * _clenshaw(self.anti[k], t)
        val = np.where(xs.ravel() == self.x0, 0.0, val)
        return val.reshape(np.shape(x))

    def _interp_derivative(self) -> ScalarFunction:
        def d(x):
            xs = np.atleast_1d(x)
            k, t, _ = self._locate(xs.ravel())
            return _clenshaw(self.fit[k], t).reshape(np.shape(x))
        return ScalarFunction(d, None, self.domain, f"d/dx {self.label}")

    @property
    def nodes(self) -> np.ndarray:
        return self.breaks

    @property
    def values(self) -> np.ndarray:
        return self._evaluate(self.breaks)


def antiderivative(
    g: ScalarFunction,
    x0: float,
    interval: Interval,
    tol: Optional[float] = None,
    *,
    min_width: Optional[float] = None,
    max_panels: int = 20000,
) -> CumulativeIntegral:
    """Adaptive piecewise-Chebyshev antiderivative of ``g`` anchored at ``x0``.

    Panels are bisected until the trailing Chebyshev coefficients of the
    integrand fit fall below ``tol`` relative to the integrand scale.
    """
    lo, hi = float(interval[0]), float(interval[1])
    x0 = float(x0)
    if not hi > lo:
        raise ValueError("interval must have positive length")
    if not lo <= x0 <= hi:
        raise OutOfDomain(x0, (lo, hi))
    tol = default_tol_quad() if tol is None else float(tol)
    if not tol > 0:
        raise ValueError("tol must be positive")
    width = hi - lo
    min_width = width * 2.0 ** -30 if min_width is None else min_width

    pending = []
    for a, b in ((lo, x0), (x0, hi)):
        if b > a:
            # a sliver next to an endpoint gets one panel, never duplicate edges
            edges = np.linspace(a, b, 5 if b - a > 1e-3 * width else 2)
            pending.extend(zip(edges[:-1], edges[1:]))

    done: list[tuple[float, float, np.ndarray]] = []
    scale = None
    while pending:
        if len(done) + len(pending) > max_panels:
            a, b = pending[0]
            raise ToleranceNotMet((a, b), math.inf)
        pa = np.array(pending)
        mids = 0.5 * (pa[:, 0] + pa[:, 1])
        hws = 0.5 * (pa[:, 1] - pa[:, 0])
        xs = mids[:, None] + hws[:, None] * _TNODES[None, :]
        ys = np.asarray(g(xs), dtype=float)
        bad = ~np.isfinite(ys)
        if bad.any():
            raise NonFiniteIntegrand(float(xs[bad][0]))
        if scale is None:
            scale = max(1.0, float(np.max(np.abs(ys))))
        coefs = ys @ _DCT.T
        tail = np.max(np.abs(coefs[:, -3:]), axis=1)
        local = np.maximum(scale, np.max(np.abs(coefs), axis=1))
        ok = tail <= tol * local
        nxt = []
        for i, (a, b) in enumerate(pending):
            if ok[i]:
                done.append((a, b, coefs[i]))
            elif b - a <= min_width:
                raise ToleranceNotMet((a, b), float(tail[i] * hws[i]))
            else:
                m = 0.5 * (a + b)
                nxt.extend([(a, m), (m, b)])
        pending = nxt

    done.sort(key=lambda p: p[0])
    breaks = np.array([p[0] for p in done] + [done[-1][1]])
    fit = np.array([p[2] for p in done])
    hw = 0.5 * np.diff(breaks)
    anti = fit @ _INT
    panel_int = hw * np.sum(anti, axis=1)  # value at t = 1
    csum = np.concatenate([[0.0], np.cumsum(panel_int)])
    i0 = int(np.searchsorted(breaks, x0))
    offsets = csum[:-1] - csum[i0]
    tails = np.max(np.abs(fit[:, -3:]), axis=1)
    achieved = float(np.sum(2.0 * hw * tails))
    return CumulativeIntegral(g, x0, (lo, hi), breaks, fit, anti, offsets, tol, achieved)


def eval_integral(F: CumulativeIntegral, x):
    """Value of the antiderivative at ``x`` (must lie in its interval)."""
    return F(x)


# independent reference quadrature -------------------------------------------------

_GL_T, _GL_W = np.polynomial.legendre.leggauss(12)


def reference_antiderivative(g: ScalarFunction, x0: float, interval: Interval,
                             panels: int = 256) -> ScalarFunction:
    """Fixed-panel composite Gauss-Legendre antiderivative.

    Used only as an independent cross-check of :func:`antiderivative`; every
    evaluation integrates the partial panel afresh, so nesting is allowed.
    """
    lo, hi = float(interval[0]), float(interval[1])
    x0 = float(x0)
    edges = np.linspace(lo, hi, panels + 1)
    if x0 not in edges:
        edges = np.unique(np.concatenate([edges, [x0]]))
    a, b = edges[:-1], edges[1:]
    mid, hw = 0.5 * (a + b), 0.5 * (b - a)
    vals = np.asarray(g(mid[:, None] + hw[:, None] * _GL_T[None, :]), dtype=float)
    panel_int = hw * (vals @ _GL_W)
    csum = np.concatenate([[0.0], np.cumsum(panel_int)])
    base = csum - csum[int(np.searchsorted(edges, x0))]

    def F(x):
        xs = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        k = np.clip(np.searchsorted(edges, xs, side="right") - 1, 0, len(a) - 1)
        left = edges[k]
        phw = 0.5 * (xs - left)
        nodes = left[:, None] + phw[:, None] * (_GL_T[None, :] + 1.0)
        part = phw * (np.asarray(g(nodes), dtype=float) @ _GL_W)
        return (base[k] + part).reshape(np.shape(x))

    return ScalarFunction(F, None, (lo, hi), f"ref_int({g.label})")
