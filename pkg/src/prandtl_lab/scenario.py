"""Scenario files and a small expression language for u0, uE and pEx.

Expressions support constants, the variables x, y, t, X, Y, the constant
``pi``, unary minus, + - * /, integer powers ``^`` and the functions
sin, cos, exp, sqrt, tanh, abs.  Derivatives are exact and symbolic
(with constant folding only); evaluation compiles the tree to numpy
closures.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

VARIABLES = ("x", "y", "t", "X", "Y")
FUNCTIONS = ("sin", "cos", "exp", "sqrt", "tanh", "abs")


class ParseError(ValueError):
    """Syntax error with the byte offset into the source and the expected tokens."""

    def __init__(self, message: str, offset: int, expected: frozenset = frozenset()):
        self.offset = offset
        self.expected = frozenset(expected)
        exp = f"; expected one of {sorted(self.expected)}" if self.expected else ""
        super().__init__(f"{message} at byte offset {offset}{exp}")


class ValidationError(ValueError):
    def __init__(self, message: str, worst: tuple | None = None):
        self.worst = worst
        super().__init__(message)


# --------------------------------------------------------------------------
# expression tree


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or a function name
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


Expr = Const | Var | Unary | Binary | Pow

ZERO = Const(0.0)
ONE = Const(1.0)


def _is_const(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Binary("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Binary("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    return Binary("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is_const(a, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    return Binary("/", a, b)


def power(a: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if isinstance(a, Const) and (a.value != 0.0 or n > 0):
        return Const(a.value ** n)
    return Pow(a, n)


def func(name: str, a: Expr) -> Expr:
    if isinstance(a, Const):
        v = _SCALAR_FUNCS[name](a.value)
        if math.isfinite(v):
            return Const(v)
    return Unary(name, a)


_SCALAR_FUNCS: dict[str, Callable[[float], float]] = {
    "sin": math.sin, "cos": math.cos, "exp": math.exp, "tanh": math.tanh,
    "abs": abs, "sqrt": lambda v: math.sqrt(v) if v >= 0 else math.nan,
}


# --------------------------------------------------------------------------
# parser

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))")


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, id, op, end
    text: str
    offset: int  # byte offset


def _tokenize(src: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    n = len(src)
    while pos < n:
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            j = pos
            while j < n and src[j].isspace():
                j += 1
            raise ParseError(f"unexpected character {src[j]!r}", len(src[:j].encode()))
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), len(src[:start].encode())))
        pos = m.end()
    toks.append(_Tok("end", "", len(src.encode())))
    return toks


_OPERAND_START = frozenset({"number", "identifier", "(", "-"})


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.i = 0

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def _take(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def _expect_op(self, op: str) -> None:
        if self.cur.kind != "op" or self.cur.text != op:
            raise ParseError(f"unexpected {self._describe()}", self.cur.offset, {op})
        self.i += 1

    def _describe(self) -> str:
        return "end of input" if self.cur.kind == "end" else f"token {self.cur.text!r}"

    def parse(self) -> Expr:
        e = self.expr()
        if self.cur.kind != "end":
            raise ParseError(f"unexpected {self._describe()}", self.cur.offset,
                             {"+", "-", "*", "/", "^", "end of input"})
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.cur.kind == "op" and self.cur.text in "+-":
            op = self._take().text
            rhs = self.term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.cur.kind == "op" and self.cur.text in "*/":
            op = self._take().text
            rhs = self.unary()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def unary(self) -> Expr:
        if self.cur.kind == "op" and self.cur.text == "-":
            self.i += 1
            return neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.cur.kind == "op" and self.cur.text == "^":
            self.i += 1
            at = self.cur.offset
            ex = self.unary()
            if not isinstance(ex, Const) or ex.value != int(ex.value) or not math.isfinite(ex.value):
                raise ParseError("exponent must be a constant integer", at)
            return power(base, int(ex.value))
        return base

    def atom(self) -> Expr:
        tok = self.cur
        if tok.kind == "num":
            self.i += 1
            return Const(float(tok.text))
        if tok.kind == "id":
            self.i += 1
            name = tok.text
            if name in FUNCTIONS:
                if not (self.cur.kind == "op" and self.cur.text == "("):
                    raise ParseError(f"function {name!r} takes one argument", self.cur.offset, {"("})
                self.i += 1
                arg = self.expr()
                if self.cur.kind == "op" and self.cur.text == ",":
                    raise ParseError(f"function {name!r} takes one argument", self.cur.offset, {")"})
                self._expect_op(")")
                return func(name, arg)
            if name in VARIABLES:
                return Var(name)
            if name == "pi":
                return Const(math.pi)
            raise ParseError(f"unknown identifier {name!r}", tok.offset)
        if tok.kind == "op" and tok.text == "(":
            self.i += 1
            e = self.expr()
            self._expect_op(")")
            return e
        raise ParseError(f"unexpected {self._describe()}", tok.offset, _OPERAND_START)


def parse_expr(src: str) -> Expr:
    """Parse an expression; errors carry the byte offset of the offending token."""
    return _Parser(src).parse()


# --------------------------------------------------------------------------
# derivatives, printing, evaluation


def _d(e: Expr, v: str) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == v else ZERO
    if isinstance(e, Pow):
        return mul(mul(Const(float(e.exponent)), power(e.base, e.exponent - 1)), _d(e.base, v))
    if isinstance(e, Binary):
        da, db = _d(e.left, v), _d(e.right, v)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, e.right), mul(e.left, db))
        return div(sub(mul(da, e.right), mul(e.left, db)), power(e.right, 2))
    a = e.arg
    da = _d(a, v)
    if _is_const(da, 0.0):
        return ZERO
    if e.op == "neg":
        return neg(da)
    if e.op == "sin":
        return mul(func("cos", a), da)
    if e.op == "cos":
        return neg(mul(func("sin", a), da))
    if e.op == "exp":
        return mul(e, da)
    if e.op == "sqrt":
        return div(da, mul(Const(2.0), e))
    if e.op == "tanh":
        return mul(sub(ONE, power(e, 2)), da)
    if e.op == "abs":
        return mul(div(a, e), da)
    raise ValueError(f"unknown operator {e.op!r}")


def differentiate(e: Expr, var: str, order: int = 1) -> Expr:
    if var not in VARIABLES:
        raise ValueError(f"unknown variable {var!r}")
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    for _ in range(order):
        e = _d(e, var)
    return e


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_source(e: Expr) -> str:
    """Print an expression in the input grammar (parse(to_source(e)) == e numerically)."""
    if isinstance(e, Const):
        return repr(e.value) if e.value >= 0 else f"(-{repr(-e.value)})"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Pow):
        ex = str(e.exponent) if e.exponent >= 0 else f"(-{-e.exponent})"
        return f"({to_source(e.base)})^{ex}"
    if isinstance(e, Binary):
        return f"({to_source(e.left)} {e.op} {to_source(e.right)})"
    if e.op == "neg":
        return f"(-{to_source(e.arg)})"
    return f"{e.op}({to_source(e.arg)})"


_NP_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt,
             "tanh": np.tanh, "abs": np.abs}


def compile_expr(e: Expr) -> Callable[[Mapping[str, object]], object]:
    """Closure evaluating ``e`` on an environment of scalars or arrays."""
    if isinstance(e, Const):
        c = e.value
        return lambda env: c
    if isinstance(e, Var):
        name = e.name
        return lambda env: env[name]
    if isinstance(e, Pow):
        fb, n = compile_expr(e.base), e.exponent
        return lambda env: fb(env) ** n if n > 0 else 1.0 / fb(env) ** (-n)
    if isinstance(e, Binary):
        fl, fr = compile_expr(e.left), compile_expr(e.right)
        if e.op == "+":
            return lambda env: fl(env) + fr(env)
        if e.op == "-":
            return lambda env: fl(env) - fr(env)
        if e.op == "*":
            return lambda env: fl(env) * fr(env)
        return lambda env: fl(env) / fr(env)
    fa = compile_expr(e.arg)
    if e.op == "neg":
        return lambda env: -fa(env)
    f = _NP_FUNCS[e.op]
    return lambda env: f(fa(env))


def evaluate(e: Expr, **env) -> float:
    with np.errstate(all="ignore"):
        return compile_expr(e)(env)


class ScalarField2D:
    """Field f(p, q) of two named variables with exact partials up to order 3."""

    def __init__(self, expr: Expr | str, variables: tuple[str, str]):
        self.expr = parse_expr(expr) if isinstance(expr, str) else expr
        self.variables = variables
        self._fn = compile_expr(self.expr)
        self._partials: dict[tuple[int, int], ScalarField2D] = {(0, 0): self}

    def __call__(self, p, q):
        with np.errstate(all="ignore"):
            v = self._fn({self.variables[0]: p, self.variables[1]: q})
        if np.ndim(p) or np.ndim(q):
            return np.broadcast_to(v, np.broadcast(p, q).shape).astype(float)
        return float(v)

    def partial(self, i: int, j: int) -> "ScalarField2D":
        """d^i/dp^i d^j/dq^j, i + j <= 3."""
        if i + j > 3 or i < 0 or j < 0:
            raise ValueError("partials are available up to total order 3")
        key = (i, j)
        if key not in self._partials:
            e = self.expr
            if i:
                e = differentiate(e, self.variables[0], i)
            if j:
                e = differentiate(e, self.variables[1], j)
            self._partials[key] = ScalarField2D(e, self.variables)
        return self._partials[key]

    @cached_property
    def is_zero(self) -> bool:
        return _is_const(self.expr, 0.0)

    def __repr__(self) -> str:
        return f"ScalarField2D({to_source(self.expr)!r}, {self.variables})"


# --------------------------------------------------------------------------
# scenario files

_TOL_KEYS = ("bernoulli_tol", "ode_rel_tol", "ode_abs_tol", "quad_abs_tol",
             "quad_rel_tol", "curve_tol")
_KEYS = ("name", "u0", "uE", "pEx", "window", "grid_n", "t_max") + _TOL_KEYS


@dataclass
class Scenario:
    name: str
    u0: ScalarField2D
    uE: ScalarField2D | None = None
    pEx: ScalarField2D | None = None
    window: tuple[float, float, float, float] = (-3.0, 3.0, 0.0, 3.0)
    grid_n: int = 61
    t_max: float = 10.0
    tolerances: dict = field(default_factory=dict)

    @property
    def bernoulli_tol(self) -> float:
        return float(self.tolerances.get("bernoulli_tol", 1e-8))


def _unquote(raw: str, line_no: int) -> str:
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        return raw[1:-1]
    return raw


def parse_scenario(text: str) -> Scenario:
    """Flat key = value format, one key per line, '#' comments."""
    values: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise ValidationError(f"line {line_no}: expected 'key = value'")
        key, raw = (part.strip() for part in s.split("=", 1))
        if key not in _KEYS:
            raise ValidationError(f"line {line_no}: unknown key {key!r}")
        if key in values:
            raise ValidationError(f"line {line_no}: duplicate key {key!r}")
        values[key] = _unquote(raw, line_no)
    for required in ("name", "u0"):
        if required not in values:
            raise ValidationError(f"missing required key {required!r}")

    def field_of(key: str, variables: tuple[str, str]) -> ScalarField2D | None:
        if key not in values:
            return None
        try:
            f = ScalarField2D(values[key], variables)
        except ParseError as exc:
            raise ValidationError(f"{key}: {exc}") from exc
        used = _free_vars(f.expr)
        if not used <= set(variables):
            raise ValidationError(f"{key}: variables {sorted(used - set(variables))} not allowed")
        return f

    kw: dict = {"name": values["name"], "u0": field_of("u0", ("X", "Y")),
                "uE": field_of("uE", ("t", "x")), "pEx": field_of("pEx", ("t", "x"))}
    try:
        if "window" in values:
            w = tuple(float(v) for v in values["window"].split())
            if len(w) != 4 or not (w[0] < w[1] and 0.0 <= w[2] < w[3]):
                raise ValueError
            kw["window"] = w
        if "grid_n" in values:
            kw["grid_n"] = int(values["grid_n"])
            if kw["grid_n"] < 3:
                raise ValueError
        if "t_max" in values:
            kw["t_max"] = float(values["t_max"])
            if not kw["t_max"] > 0:
                raise ValueError
        kw["tolerances"] = {k: float(values[k]) for k in _TOL_KEYS if k in values}
    except ValueError as exc:
        raise ValidationError(f"malformed numeric value: {exc}") from exc
    return Scenario(**kw)


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def _free_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Const):
        return set()
    if isinstance(e, Pow):
        return _free_vars(e.base)
    if isinstance(e, Binary):
        return _free_vars(e.left) | _free_vars(e.right)
    return _free_vars(e.arg)


@dataclass(frozen=True)
class ValidationReport:
    bernoulli_residual: float
    bernoulli_worst: tuple[float, float] | None
    gradient_bound: float
    decays_at_edges: bool
    vorticity_bounded: bool

    @property
    def valid(self) -> bool:
        return math.isfinite(self.gradient_bound)


def bernoulli_residual(uE: ScalarField2D | None, pEx: ScalarField2D | None,
                       t_max: float, x_range: tuple[float, float], n: int = 21):
    """sup |uE_t + uE uE_x + pEx| on an n x n (t, x) grid, with its location."""
    if uE is None:
        return 0.0, None
    tt, xx = np.meshgrid(np.linspace(0.0, t_max, n), np.linspace(*x_range, n), indexing="ij")
    res = uE.partial(1, 0)(tt, xx) + uE(tt, xx) * uE.partial(0, 1)(tt, xx)
    if pEx is not None:
        res = res + pEx(tt, xx)
    res = np.abs(res)
    if not np.all(np.isfinite(res)):
        k = np.unravel_index(np.argmax(~np.isfinite(res)), res.shape)
        return math.inf, (float(tt[k]), float(xx[k]))
    k = np.unravel_index(np.argmax(res), res.shape)
    return float(res[k]), (float(tt[k]), float(xx[k]))


def validate_scenario(s: Scenario, n: int = 21) -> ValidationReport:
    """Bernoulli compatibility of (uE, pEx) and sampled checks on u0.

    Raises ValidationError naming the worst grid point when the Bernoulli
    residual exceeds the scenario tolerance or u0 has a non-finite gradient.
    """
    x0, x1, y0, y1 = s.window
    res, worst = bernoulli_residual(s.uE, s.pEx, s.t_max, (x0, x1), n)
    if res > s.bernoulli_tol:
        raise ValidationError(
            f"Bernoulli residual {res:.3e} exceeds {s.bernoulli_tol:.1e} at (t, x) = {worst}", worst)
    XX, YY = np.meshgrid(np.linspace(x0, x1, s.grid_n), np.linspace(y0, y1, s.grid_n), indexing="ij")
    gX = s.u0.partial(1, 0)(XX, YY)
    gY = s.u0.partial(0, 1)(XX, YY)
    g = np.hypot(gX, gY)
    if not np.all(np.isfinite(g)):
        k = np.unravel_index(np.argmax(~np.isfinite(g)), g.shape)
        raise ValidationError(f"u0 gradient not finite at (X, Y) = {(XX[k], YY[k])}",
                              (float(XX[k]), float(YY[k])))
    interior = float(np.max(np.abs(gX)))
    edges = max(float(np.max(np.abs(gX[0]))), float(np.max(np.abs(gX[-1]))))
    decays = interior == 0.0 or edges <= 0.1 * interior
    return ValidationReport(res, worst, float(np.max(g)), decays, bool(np.max(np.abs(gY)) < 1e6))


GAUSSIAN_LINE_SCENARIO = """\
# pressureless Gaussian-line datum
name = "gaussian_line"
u0 = "-sin(X)*exp(-(Y-1)^2/2)"
uE = "0"
pEx = "0"
window = "-3 3 0 3"
grid_n = 61
t_max = 10
"""
