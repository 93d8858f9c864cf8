"""Tiny expression language for real functions of one variable ``x``.

Grammar (EBNF)::

    expr    = term , { ("+" | "-") , term } ;
    term    = unary , { ("*" | "/") , unary } ;
    unary   = "-" , unary | power ;
    power   = primary , [ "^" , unary ] ;
    primary = number | "x" | "pi" | "e" | func , "(" , args , ")" | "(" , expr , ")" ;
    args    = expr , { "," , expr } ;
    func    = "exp" | "log" | "sin" | "cos" | "tan" | "tanh" | "sinh" | "cosh"
            | "sqrt" | "abs" | "pow" ;

``^`` binds tighter than unary minus (``-x^2`` is ``-(x^2)``) and is
right-associative. There is no implicit multiplication.

Evaluation is vectorised over numpy arrays and raises :class:`DomainError`
instead of returning non-finite values.
"""

from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import DomainError, ExprSyntaxError, UnknownIdentifier

__all__ = [
    "Num", "Var", "Const", "Neg", "BinOp", "Call", "Expr",
    "parse", "evaluate", "derive", "to_string", "fold", "FUNCTIONS",
]


# AST ------------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Const:
    name: str  # "pi" or "e"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]


Expr = Union[Num, Var, Const, Neg, BinOp, Call]

X = Var()
CONSTANTS = {"pi": math.pi, "e": math.e}
FUNCTIONS = {
    "exp": 1, "log": 1, "sin": 1, "cos": 1, "tan": 1, "tanh": 1,
    "sinh": 1, "cosh": 1, "sqrt": 1, "abs": 1, "pow": 2,
}


# tokenizer ------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, name, op, end
    text: str
    offset: int  # byte offset


def _tokenize(source: str) -> list[_Tok]:
    toks = []
    pos = 0
    n = len(source)

    def boff(i: int) -> int:
        return len(source[:i].encode("utf-8"))

    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(boff(pos), f"unexpected character {source[pos]!r}")
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), boff(start)))
        pos = m.end()
    toks.append(_Tok("end", "", boff(n)))
    return toks


# parser ---------------------------------------------------------------------------

_PRIMARY_START = frozenset({"number", "x", "pi", "e", "function", "("})


class _Parser:
    def __init__(self, source: str):
        self.toks = _tokenize(source)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, message: str, expected=frozenset()):
        raise ExprSyntaxError(self.tok.offset, message, frozenset(expected))

    def eat(self, text: str) -> None:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return
        found = self.tok.text or "end of input"
        self.fail(f"found {found!r}", {text})

    def at(self, *ops: str) -> bool:
        return self.tok.kind == "op" and self.tok.text in ops

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            self.fail(f"unexpected {self.tok.text!r}", {"+", "-", "*", "/", "^", "end of input"})
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.at("+", "-"):
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.at("*", "/"):
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.at("-"):
            self.i += 1
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.at("^"):
            self.i += 1
            return BinOp("^", base, self.unary())
        return base

    def primary(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Num(float(tok.text))
        if tok.kind == "name":
            self.i += 1
            if tok.text == "x":
                return X
            if tok.text in CONSTANTS:
                return Const(tok.text)
            if tok.text in FUNCTIONS:
                self.eat("(")
                args = [self.expr()]
                while self.at(","):
                    self.i += 1
                    args.append(self.expr())
                arity = FUNCTIONS[tok.text]
                if len(args) != arity:
                    self.fail(f"{tok.text} takes {arity} argument(s), got {len(args)}", {")"})
                self.eat(")")
                return Call(tok.text, tuple(args))
            raise UnknownIdentifier(tok.text, tok.offset)
        if self.at("("):
            self.i += 1
            e = self.expr()
            self.eat(")")
            return e
        found = tok.text or "end of input"
        self.fail(f"found {found!r}", _PRIMARY_START)


def parse(source: str) -> Expr:
    """Parse ``source`` into an expression tree."""
    if not source or not source.strip():
        raise ExprSyntaxError(0, "empty expression", _PRIMARY_START)
    return _Parser(source).parse()


# printer --------------------------------------------------------------------------

# precedence levels: 1 additive, 2 multiplicative, 3 unary, 4 power, 5 primary
def _level(e: Expr) -> int:
    if isinstance(e, BinOp):
        return {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}[e.op]
    if isinstance(e, Neg):
        return 3
    if isinstance(e, Num) and (e.value < 0 or math.copysign(1.0, e.value) < 0):
        return 3
    return 5


def _fmt_num(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v)) if v != 0 or math.copysign(1.0, v) > 0 else "-0"
    return repr(v)


def _wrap(e: Expr, min_level: int) -> str:
    s = to_string(e)
    return f"({s})" if _level(e) < min_level else s


def to_string(e: Expr) -> str:
    """Render ``e`` with the minimum parentheses needed to re-parse it."""
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Const):
        return e.name
    if isinstance(e, Neg):
        return "-" + _wrap(e.operand, 3)
    if isinstance(e, Call):
        return f"{e.name}({', '.join(to_string(a) for a in e.args)})"
    if e.op in "+-":
        return f"{_wrap(e.left, 1)} {e.op} {_wrap(e.right, 2)}"
    if e.op in "*/":
        return f"{_wrap(e.left, 2)}{e.op}{_wrap(e.right, 3)}"
    return f"{_wrap(e.left, 5)}^{_wrap(e.right, 3)}"


# evaluation -----------------------------------------------------------------------


def _first_bad(mask: np.ndarray, x: np.ndarray) -> float:
    idx = int(np.flatnonzero(np.broadcast_to(mask, x.shape).ravel())[0])
    return float(x.ravel()[idx])


def _check(node: Expr, val: np.ndarray, x: np.ndarray) -> np.ndarray:
    bad = ~np.isfinite(val)
    if bad.any():
        raise DomainError(to_string(node), _first_bad(bad, x), "non-finite result")
    return val


def _pow(node: Expr, base, expo, x):
    base_b, expo_b = np.broadcast_arrays(base, expo)
    zero_neg = (base_b == 0) & (expo_b < 0)
    if zero_neg.any():
        raise DomainError(to_string(node), _first_bad(zero_neg, x), "division by zero")
    neg_frac = (base_b < 0) & (expo_b != np.round(expo_b))
    if neg_frac.any():
        raise DomainError(to_string(node), _first_bad(neg_frac, x), "negative base with fractional exponent")
    return np.power(base_b, expo_b)


def _eval(e: Expr, x: np.ndarray):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return x
    if isinstance(e, Const):
        return CONSTANTS[e.name]
    if isinstance(e, Neg):
        return -_eval(e.operand, x)
    if isinstance(e, BinOp):
        lhs = _eval(e.left, x)
        rhs = _eval(e.right, x)
        if e.op == "+":
            out = lhs + rhs
        elif e.op == "-":
            out = lhs - rhs
        elif e.op == "*":
            out = lhs * rhs
        elif e.op == "/":
            zero = np.asarray(rhs) == 0
            if zero.any():
                raise DomainError(to_string(e), _first_bad(zero, x), "division by zero")
            out = lhs / rhs
        else:
            out = _pow(e, lhs, rhs, x)
        return _check(e, np.asarray(out, dtype=float), x)
    args = [_eval(a, x) for a in e.args]
    name = e.name
    if name == "pow":
        out = _pow(e, args[0], args[1], x)
    else:
        u = np.asarray(args[0], dtype=float)
        if name == "log":
            bad = u <= 0
            if bad.any():
                raise DomainError(to_string(e), _first_bad(bad, x), "log of non-positive value")
        elif name == "sqrt":
            bad = u < 0
            if bad.any():
                raise DomainError(to_string(e), _first_bad(bad, x), "sqrt of negative value")
        out = _UNARY[name](u)
    return _check(e, np.asarray(out, dtype=float), x)


_UNARY = {
    "exp": np.exp, "log": np.log, "sin": np.sin, "cos": np.cos, "tan": np.tan,
    "tanh": np.tanh, "sinh": np.sinh, "cosh": np.cosh, "sqrt": np.sqrt, "abs": np.abs,
}


_SCALAR_UNARY = {
    "exp": math.exp, "log": math.log, "sin": math.sin, "cos": math.cos, "tan": math.tan,
    "tanh": math.tanh, "sinh": math.sinh, "cosh": math.cosh, "sqrt": math.sqrt, "abs": abs,
}


def _domain_fail(text: str, x: float, reason: str):
    raise DomainError(text, x, reason)


@functools.lru_cache(maxsize=4096)
def _compile_scalar(e: Expr) -> Callable[[float], float]:
    """Straight-line float code for ``e`` with the same domain checks as the array path.

    Equal subtrees share one temporary.
    """
    lines: list[str] = []
    texts: list[str] = []
    names: dict[Expr, str] = {}

    def fail(node: Expr, cond: str, reason: str) -> None:
        texts.append(to_string(node))
        lines.append(f"if {cond}: _fail(_t[{len(texts) - 1}], x, {reason!r})")

    def emit(node: Expr) -> str:
        if isinstance(node, Num):
            return repr(node.value)
        if isinstance(node, Var):
            return "x"
        if isinstance(node, Const):
            return repr(CONSTANTS[node.name])
        if node in names:
            return names[node]
        if isinstance(node, Neg):
            code = f"-{emit(node.operand)}"
        elif isinstance(node, BinOp) and node.op in "+-*":
            code = f"{emit(node.left)} {node.op} {emit(node.right)}"
        elif isinstance(node, BinOp) and node.op == "/":
            left, right = emit(node.left), emit(node.right)
            fail(node, f"{right} == 0", "division by zero")
            code = f"{left} / {right}"
        elif isinstance(node, BinOp) or node.name == "pow":
            base, expo = (node.left, node.right) if isinstance(node, BinOp) else node.args
            b, p = emit(base), emit(expo)
            fail(node, f"{b} == 0 and {p} < 0", "division by zero")
            fail(node, f"{b} < 0 and {p} != round({p})", "negative base with fractional exponent")
            code = f"_pow({b}, {p})"
        else:
            u = emit(node.args[0])
            if node.name == "log":
                fail(node, f"not {u} > 0", "log of non-positive value")
            elif node.name == "sqrt":
                fail(node, f"{u} < 0", "sqrt of negative value")
            code = f"_u_{node.name}({u})"
        t = f"v{len(names)}"
        names[node] = t
        lines.append(f"{t} = {code}")
        fail(node, f"not _finite({t})", "non-finite result")
        return t

    result = emit(e)
    body = "\n    ".join(lines + [f"return float({result})"])
    src = f"def _f(x):\n    {body}\n"
    env = {f"_u_{k}": v for k, v in _SCALAR_UNARY.items()}
    env.update(_fail=_domain_fail, _t=tuple(texts), _pow=math.pow, _finite=math.isfinite)
    exec(compile(src, "<expr>", "exec"), env)
    fn = env["_f"]
    text = to_string(e)

    def run(x: float) -> float:
        try:
            return fn(x)
        except OverflowError:
            raise DomainError(text, x, "non-finite result") from None

    return run


def evaluate(e: Expr, x):
    """Evaluate ``e`` at ``x`` (scalar or array) in double precision."""
    if isinstance(x, (float, int)) and not isinstance(x, bool) or isinstance(x, np.floating):
        xf = float(x)
        if not math.isfinite(xf):
            raise DomainError(to_string(e), xf, "non-finite argument")
        return _compile_scalar(e)(xf)
    xa = np.asarray(x, dtype=float)
    bad = ~np.isfinite(xa)
    if bad.any():
        raise DomainError(to_string(e), _first_bad(bad, xa), "non-finite argument")
    with np.errstate(all="ignore"):
        out = np.broadcast_to(np.asarray(_eval(e, xa), dtype=float), xa.shape)
    if out.ndim == 0:
        return float(out)
    return np.array(out)


# differentiation ------------------------------------------------------------------


def _is_num(e: Expr, v: float | None = None) -> bool:
    return isinstance(e, Num) and (v is None or e.value == v)


def _has_x(e: Expr) -> bool:
    if isinstance(e, Var):
        return True
    if isinstance(e, Neg):
        return _has_x(e.operand)
    if isinstance(e, BinOp):
        return _has_x(e.left) or _has_x(e.right)
    if isinstance(e, Call):
        return any(_has_x(a) for a in e.args)
    return False


def _add(a: Expr, b: Expr) -> Expr:
    if _is_num(a) and _is_num(b):
        return Num(a.value + b.value)
    if _is_num(a, 0):
        return b
    if _is_num(b, 0):
        return a
    return BinOp("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if _is_num(a) and _is_num(b):
        return Num(a.value - b.value)
    if _is_num(b, 0):
        return a
    if _is_num(a, 0):
        return _neg(b)
    return BinOp("-", a, b)


def _neg(a: Expr) -> Expr:
    if _is_num(a):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def _mul(a: Expr, b: Expr) -> Expr:
    if _is_num(a) and _is_num(b):
        return Num(a.value * b.value)
    if _is_num(a, 0) or _is_num(b, 0):
        return Num(0.0)
    if _is_num(a, 1):
        return b
    if _is_num(b, 1):
        return a
    return BinOp("*", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if _is_num(a) and _is_num(b) and b.value != 0:
        return Num(a.value / b.value)
    if _is_num(a, 0):
        return Num(0.0)
    if _is_num(b, 1):
        return a
    return BinOp("/", a, b)


def _powe(a: Expr, b: Expr) -> Expr:
    if _is_num(b, 1):
        return a
    if _is_num(b, 0):
        return Num(1.0)
    return BinOp("^", a, b)


def _call(name: str, *args: Expr) -> Expr:
    return Call(name, tuple(args))


def _d_pow(u: Expr, v: Expr) -> Expr:
    du, dv = derive(u), derive(v)
    if not _has_x(v):
        # v*u^(v-1)*u'
        return _mul(_mul(v, _powe(u, _sub(v, Num(1.0)))), du)
    if not _has_x(u):
        return _mul(_mul(BinOp("^", u, v), _call("log", u)), dv)
    return _mul(BinOp("^", u, v), _add(_mul(dv, _call("log", u)), _div(_mul(v, du), u)))


def derive(e: Expr) -> Expr:
    """Symbolic d/dx with constant folding only.

    ``abs`` differentiates to ``u/abs(u)*u'``, which raises a DomainError at
    ``u = 0`` where the derivative does not exist.
    """
    if isinstance(e, (Num, Const)):
        return Num(0.0)
    if isinstance(e, Var):
        return Num(1.0)
    if isinstance(e, Neg):
        return _neg(derive(e.operand))
    if isinstance(e, BinOp):
        a, b = e.left, e.right
        if e.op == "+":
            return _add(derive(a), derive(b))
        if e.op == "-":
            return _sub(derive(a), derive(b))
        if e.op == "*":
            return _add(_mul(derive(a), b), _mul(a, derive(b)))
        if e.op == "/":
            return _div(_sub(_mul(derive(a), b), _mul(a, derive(b))), _powe(b, Num(2.0)))
        return _d_pow(a, b)
    name, args = e.name, e.args
    if name == "pow":
        return _d_pow(args[0], args[1])
    u = args[0]
    du = derive(u)
    if _is_num(du, 0):
        return Num(0.0)
    if name == "exp":
        outer = e
    elif name == "log":
        return _div(du, u)
    elif name == "sin":
        outer = _call("cos", u)
    elif name == "cos":
        outer = _neg(_call("sin", u))
    elif name == "tan":
        outer = _div(Num(1.0), _powe(_call("cos", u), Num(2.0)))
    elif name == "tanh":
        outer = _sub(Num(1.0), _powe(_call("tanh", u), Num(2.0)))
    elif name == "sinh":
        outer = _call("cosh", u)
    elif name == "cosh":
        outer = _call("sinh", u)
    elif name == "sqrt":
        return _div(du, _mul(Num(2.0), e))
    else:  # abs
        outer = _div(u, _call("abs", u))
    return _mul(outer, du)


def fold(e: Expr) -> Expr:
    """Constant-fold negated literals (``Neg(Num(v))`` -> ``Num(-v)``)."""
    if isinstance(e, Neg):
        inner = fold(e.operand)
        return Num(-inner.value) if isinstance(inner, Num) else Neg(inner)
    if isinstance(e, BinOp):
        return BinOp(e.op, fold(e.left), fold(e.right))
    if isinstance(e, Call):
        return Call(e.name, tuple(fold(a) for a in e.args))
    return e
