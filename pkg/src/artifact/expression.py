"""Scalar expressions in (t, x1..xn, v1..vn).

Expressions are immutable trees built through folding constructors, so
structurally equal inputs always produce equal trees. Evaluation compiles a
tree into nested closures over numpy, which lets the same code path serve
scalar calls and vectorised quadrature.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Sequence, Union

import numpy as np

ABS_KINK_TOL = 1e-12

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "abs", "sign")


class ExpressionError(ValueError):
    """Base class for expression failures."""


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message: str, text: str, position: int):
        super().__init__(f"{message} at position {position}: {text!r}")
        self.text = text
        self.position = position


class UnknownVariableError(ExpressionError):
    pass


class DomainError(ExpressionError, ArithmeticError):
    """Singular input to an elementary function, or a non-finite result."""

    def __init__(self, message: str, subexpression: "Expr | None" = None, inputs=None):
        detail = message
        if subexpression is not None:
            detail += f" in {to_string(subexpression)}"
        if inputs is not None:
            detail += f" at {inputs}"
        super().__init__(detail)
        self.subexpression = subexpression
        self.inputs = inputs


class Expr:
    __slots__ = ()

    def __str__(self) -> str:
        return to_string(self)


@dataclass(frozen=True, eq=True, repr=True)
class Const(Expr):
    value: float


@dataclass(frozen=True, eq=True, repr=True)
class Var(Expr):
    kind: str  # "t", "x" or "v"
    index: int = 0


@dataclass(frozen=True, eq=True, repr=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, eq=True, repr=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True, repr=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True, eq=True, repr=True)
class Func(Expr):
    name: str
    arg: Expr


Expression = Expr
VarLike = Union[Var, str]

ZERO = Const(0.0)
ONE = Const(1.0)
T = Var("t")


def const(c: float) -> Const:
    return Const(float(c))


def x(i: int) -> Var:
    return Var("x", i)


def v(i: int) -> Var:
    return Var("v", i)


def _is(e: Expr, c: float) -> bool:
    return isinstance(e, Const) and e.value == c


# -- folding constructors -------------------------------------------------


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is(a, 0.0) and not _is(b, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    return BinOp("/", a, b)


def power(base: Expr, k: int) -> Expr:
    k = int(k)
    if k == 0:
        return ONE
    if k == 1:
        return base
    if isinstance(base, Const):
        if base.value != 0.0 or k > 0:
            try:
                folded = base.value**k
            except OverflowError:
                folded = math.inf
            if math.isfinite(folded):
                return Const(float(folded))
    return Pow(base, k)


_SCALAR = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "abs": abs,
}


def func(name: str, a: Expr) -> Expr:
    if name not in FUNCTIONS:
        raise ExpressionError(f"unknown function {name!r}")
    if isinstance(a, Const):
        c = a.value
        if name == "sign":
            if abs(c) > ABS_KINK_TOL:
                return Const(math.copysign(1.0, c))
        else:
            try:
                folded = _SCALAR[name](c)
            except (ValueError, OverflowError):
                folded = math.nan
            if math.isfinite(folded):
                return Const(float(folded))
    return Func(name, a)


def real_power(base: Expr, exponent: Expr) -> Expr:
    """base^exponent, integer exponents kept exact, others via exp/log."""
    if isinstance(exponent, Const) and float(exponent.value).is_integer():
        return power(base, int(exponent.value))
    return func("exp", mul(exponent, func("log", base)))


# -- parsing ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExpressionSyntaxError(f"unexpected character {text[bad]!r}", text, bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, n: int):
        self.text = text
        self.n = n
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind == "end":
            found = "end of input" if kind == "end" else repr(val)
            raise ExpressionSyntaxError(f"expected {value!r}, found {found}", self.text, pos)

    def parse(self) -> Expr:
        if self.peek()[0] == "end":
            raise ExpressionSyntaxError("empty expression", self.text, 0)
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected token {val!r}", self.text, pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return neg(self.unary())
        if kind == "op" and val == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return real_power(base, self.unary())
        return base

    def primary(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if val not in FUNCTIONS:
                    raise ExpressionSyntaxError(f"unknown function {val!r}", self.text, pos)
                self.take()
                arg = self.expr()
                self.expect(")")
                return func(val, arg)
            return self.variable(val, pos)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(val)
        raise ExpressionSyntaxError(f"unexpected {found}", self.text, pos)

    def variable(self, name: str, pos: int) -> Expr:
        if name == "t":
            return T
        if name == "pi":
            return Const(math.pi)
        if name in FUNCTIONS:
            raise ExpressionSyntaxError(f"expected '(' after {name!r}", self.text, self.peek()[2])
        m = re.fullmatch(r"([xv])(\d+)", name)
        if m is None:
            raise UnknownVariableError(f"unknown variable {name!r} at position {pos}")
        index = int(m.group(2))
        if not 1 <= index <= self.n:
            raise UnknownVariableError(
                f"variable {name!r} at position {pos} out of range for n={self.n}"
            )
        return Var(m.group(1), index)


def parse_expression(text: str, n: int) -> Expr:
    """Parse infix text over t, x1..xn, v1..vn."""
    if n < 0:
        raise ValueError("dimension must be non-negative")
    return _Parser(text, n).parse()


# -- printing -------------------------------------------------------------


def to_string(e: Expr) -> str:
    if isinstance(e, Const):
        s = repr(e.value)
        return f"({s})" if e.value < 0 or s.startswith("-") else s
    if isinstance(e, Var):
        return "t" if e.kind == "t" else f"{e.kind}{e.index}"
    if isinstance(e, Neg):
        return f"(-{to_string(e.arg)})"
    if isinstance(e, BinOp):
        return f"({to_string(e.left)} {e.op} {to_string(e.right)})"
    if isinstance(e, Pow):
        return f"({to_string(e.base)} ^ {e.exponent})"
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    raise TypeError(f"not an expression: {e!r}")


def variables(e: Expr) -> frozenset[Var]:
    if isinstance(e, Var):
        return frozenset([e])
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, BinOp):
        return variables(e.left) | variables(e.right)
    if isinstance(e, Neg):
        return variables(e.arg)
    if isinstance(e, Pow):
        return variables(e.base)
    return variables(e.arg)


def as_var(var: VarLike) -> Var:
    if isinstance(var, Var):
        return var
    if var == "t":
        return T
    m = re.fullmatch(r"([xv])(\d+)", var)
    if m is None or int(m.group(2)) < 1:
        raise UnknownVariableError(f"unknown variable {var!r}")
    return Var(m.group(1), int(m.group(2)))


# -- differentiation ------------------------------------------------------


def differentiate(e: Expr, var: VarLike) -> Expr:
    return _diff(e, as_var(var))


@lru_cache(maxsize=65536)
def _diff(e: Expr, w: Var) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e == w else ZERO
    if isinstance(e, Neg):
        return neg(_diff(e.arg, w))
    if isinstance(e, BinOp):
        a, b = e.left, e.right
        da, db = _diff(a, w), _diff(b, w)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, b), mul(a, db))
        return div(sub(mul(da, b), mul(a, db)), power(b, 2))
    if isinstance(e, Pow):
        du = _diff(e.base, w)
        if _is(du, 0.0):
            return ZERO
        return mul(mul(Const(float(e.exponent)), power(e.base, e.exponent - 1)), du)
    if isinstance(e, Func):
        u = e.arg
        du = _diff(u, w)
        if _is(du, 0.0):
            return ZERO
        if e.name == "sin":
            outer = func("cos", u)
        elif e.name == "cos":
            outer = neg(func("sin", u))
        elif e.name == "exp":
            outer = e
        elif e.name == "log":
            return div(du, u)
        elif e.name == "sqrt":
            return div(du, mul(Const(2.0), e))
        elif e.name == "abs":
            outer = func("sign", u)
        else:  # sign: flat away from its kink, which evaluation rejects
            return _sign_guard(u)
        return mul(outer, du)
    raise TypeError(f"not an expression: {e!r}")


def _sign_guard(u: Expr) -> Expr:
    # 0 * sign(u) would fold to 0 and lose the kink check; keep sign(u) - sign(u).
    s = func("sign", u)
    return sub(s, s) if not isinstance(s, Const) else ZERO


# -- substitution ---------------------------------------------------------


def substitute(e: Expr, mapping: dict[Var, Expr]) -> Expr:
    """Replace variables, refolding on the way up."""
    if isinstance(e, Var):
        return mapping.get(e, e)
    if isinstance(e, Const):
        return e
    if isinstance(e, Neg):
        return neg(substitute(e.arg, mapping))
    if isinstance(e, BinOp):
        a, b = substitute(e.left, mapping), substitute(e.right, mapping)
        return {"+": add, "-": sub, "*": mul, "/": div}[e.op](a, b)
    if isinstance(e, Pow):
        return power(substitute(e.base, mapping), e.exponent)
    return func(e.name, substitute(e.arg, mapping))


# -- evaluation -----------------------------------------------------------


class _Singular(Exception):
    def __init__(self, node: Expr, message: str, mask):
        self.node = node
        self.message = message
        self.mask = mask


Compiled = Callable[[object, Sequence, Sequence], object]


def _bad(cond) -> bool:
    return bool(np.any(cond))


def _compile(e: Expr) -> Compiled:
    if isinstance(e, Const):
        c = e.value
        return lambda t, xs, vs: c
    if isinstance(e, Var):
        if e.kind == "t":
            return lambda t, xs, vs: t
        k = e.index - 1
        if e.kind == "x":
            return lambda t, xs, vs: xs[k]
        return lambda t, xs, vs: vs[k]
    if isinstance(e, Neg):
        f = _compile(e.arg)
        return lambda t, xs, vs: -f(t, xs, vs)
    if isinstance(e, BinOp):
        fa, fb = _compile(e.left), _compile(e.right)
        if e.op == "+":
            return lambda t, xs, vs: fa(t, xs, vs) + fb(t, xs, vs)
        if e.op == "-":
            return lambda t, xs, vs: fa(t, xs, vs) - fb(t, xs, vs)
        if e.op == "*":
            return lambda t, xs, vs: fa(t, xs, vs) * fb(t, xs, vs)

        def divide(t, xs, vs):
            den = fb(t, xs, vs)
            zero = np.asarray(den) == 0.0
            if _bad(zero):
                raise _Singular(e, "division by zero", zero)
            return fa(t, xs, vs) / den

        return divide
    if isinstance(e, Pow):
        fb = _compile(e.base)
        k = e.exponent
        if k > 0:
            return lambda t, xs, vs: fb(t, xs, vs) ** k

        def inverse_power(t, xs, vs):
            b = fb(t, xs, vs)
            zero = np.asarray(b) == 0.0
            if _bad(zero):
                raise _Singular(e, "negative power of zero", zero)
            return 1.0 / np.asarray(b, dtype=float) ** (-k)

        return inverse_power
    if isinstance(e, Func):
        fa = _compile(e.arg)
        name = e.name
        if name in ("sin", "cos", "exp", "abs"):
            op = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}[name]
            return lambda t, xs, vs: op(fa(t, xs, vs))
        if name == "log":

            def log(t, xs, vs):
                a = fa(t, xs, vs)
                bad = np.asarray(a) <= 0.0
                if _bad(bad):
                    raise _Singular(e, "log of non-positive value", bad)
                return np.log(a)

            return log
        if name == "sqrt":

            def sqrt(t, xs, vs):
                a = fa(t, xs, vs)
                bad = np.asarray(a) < 0.0
                if _bad(bad):
                    raise _Singular(e, "sqrt of negative value", bad)
                return np.sqrt(a)

            return sqrt

        def sign(t, xs, vs):
            a = fa(t, xs, vs)
            bad = np.abs(a) <= ABS_KINK_TOL
            if _bad(bad):
                raise _Singular(e, "derivative of abs at its kink", bad)
            return np.sign(a)

        return sign
    raise TypeError(f"not an expression: {e!r}")


def _describe_inputs(t, xs, vs, mask):
    def pick(a):
        a = np.asarray(a, dtype=float)
        if a.ndim == 0:
            return float(a)
        m = np.broadcast_to(np.asarray(mask), a.shape) if np.ndim(mask) else None
        idx = int(np.argmax(m)) if m is not None else 0
        return float(a.reshape(-1)[idx])

    return {
        "t": pick(t),
        "x": [pick(a) for a in xs],
        "v": [pick(a) for a in vs],
    }


class CompiledExpression:
    """Vectorised evaluator with domain checking."""

    __slots__ = ("expr", "_fn")

    def __init__(self, expr: Expr):
        self.expr = expr
        self._fn = _compile(expr)

    def __call__(self, t, xs, vs):
        with np.errstate(all="ignore"):
            try:
                out = self._fn(t, xs, vs)
            except _Singular as s:
                raise DomainError(s.message, s.node, _describe_inputs(t, xs, vs, s.mask)) from None
            except OverflowError:
                raise DomainError("overflow", self.expr, _describe_inputs(t, xs, vs, True)) from None
        arr = np.asarray(out, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise DomainError(
                "non-finite result", self.expr, _describe_inputs(t, xs, vs, ~np.isfinite(arr))
            )
        return out


@lru_cache(maxsize=8192)
def compile_expression(e: Expr) -> CompiledExpression:
    return CompiledExpression(e)


def evaluate(e: Expr, t: float, x: Sequence[float] = (), v: Sequence[float] = ()) -> float:
    """Evaluate at a single point, raising DomainError on singular input."""
    vals = [t, *x, *v]
    if not all(math.isfinite(float(a)) for a in vals):
        raise DomainError("non-finite argument", e, {"t": t, "x": list(x), "v": list(v)})
    out = compile_expression(e)(float(t), [float(a) for a in x], [float(a) for a in v])
    return float(out)


def evaluate_many(e: Expr, t, xs, vs) -> np.ndarray:
    """Evaluate on arrays; xs and vs are sequences of per-component arrays."""
    t = np.asarray(t, dtype=float)
    out = compile_expression(e)(t, xs, vs)
    shape = np.broadcast_shapes(t.shape, *(np.shape(a) for a in xs), *(np.shape(a) for a in vs))
    return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()


# -- integrand bundle -----------------------------------------------------


class IntegrandBundle:
    """L together with the partial derivatives the condition formulas use.

    Matrix entries follow ``L_ab[i][j] = d/db_j (d/da_i L)``. Partials are built
    on first access and cached.
    """

    def __init__(self, L: Expr, n: int):
        bad = [w for w in variables(L) if w.kind != "t" and not 1 <= w.index <= n]
        if bad:
            raise UnknownVariableError(f"variables {sorted(map(str, bad))} out of range for n={n}")
        self.L = L
        self.n = n

    @classmethod
    def from_text(cls, text: str, n: int) -> "IntegrandBundle":
        return cls(parse_expression(text, n), n)

    def _vec(self, e: Expr, kind: str) -> tuple[Expr, ...]:
        return tuple(differentiate(e, Var(kind, i + 1)) for i in range(self.n))

    @cached_property
    def L_x(self) -> tuple[Expr, ...]:
        return self._vec(self.L, "x")

    @cached_property
    def L_v(self) -> tuple[Expr, ...]:
        return self._vec(self.L, "v")

    @cached_property
    def L_t(self) -> Expr:
        return differentiate(self.L, T)

    @cached_property
    def L_xx(self) -> tuple[tuple[Expr, ...], ...]:
        return tuple(self._vec(d, "x") for d in self.L_x)

    @cached_property
    def L_xv(self) -> tuple[tuple[Expr, ...], ...]:
        return tuple(self._vec(d, "v") for d in self.L_x)

    @cached_property
    def L_vx(self) -> tuple[tuple[Expr, ...], ...]:
        return tuple(self._vec(d, "x") for d in self.L_v)

    @cached_property
    def L_vv(self) -> tuple[tuple[Expr, ...], ...]:
        return tuple(self._vec(d, "v") for d in self.L_v)

    @cached_property
    def L_vt(self) -> tuple[Expr, ...]:
        return tuple(differentiate(d, T) for d in self.L_v)

    @cached_property
    def L_vvv(self) -> tuple[tuple[tuple[Expr, ...], ...], ...]:
        return tuple(tuple(self._vec(d, "v") for d in row) for row in self.L_vv)

    def partial(self, name: str):
        if name == "L":
            return self.L
        if not hasattr(type(self), name) or not name.startswith("L_"):
            raise AttributeError(f"no partial named {name!r}")
        return getattr(self, name)

    def numeric(self, name: str, t, xs, vs) -> np.ndarray:
        """Evaluate a cached partial; shape is the tensor shape, then the batch shape."""
        return _evaluate_tree(self.partial(name), t, xs, vs)


def _evaluate_tree(node, t, xs, vs) -> np.ndarray:
    if isinstance(node, Expr):
        return np.asarray(compile_expression(node)(t, xs, vs), dtype=float)
    parts = [_evaluate_tree(c, t, xs, vs) for c in node]
    return np.stack(np.broadcast_arrays(*parts)) if parts else np.zeros((0,))
