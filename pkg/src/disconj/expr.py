"""Coefficient expressions in one real variable ``t``.

Text is parsed into an immutable tree which can be evaluated, compiled to a
fast callable (scalar or numpy), differentiated symbolically and serialized
back to fully parenthesized text.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | '+' unary | power
    power  := atom ('^' unary)?            # right associative
    atom   := number | name | name '(' args ')' | '(' expr ')'

Implicit multiplication is rejected.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np

from .errors import ExprDomainError, ExprError, ExprSyntaxError, NotDifferentiableError

__all__ = [
    "Node", "Num", "Var", "Param", "Neg", "BinOp", "Func",
    "CoeffExpr", "parse", "evaluate", "differentiate", "serialize",
    "FUNCTIONS",
]


# name -> arity
FUNCTIONS = {
    "sin": 1, "cos": 1, "tan": 1, "cot": 1, "exp": 1, "ln": 1,
    "sinh": 1, "cosh": 1, "tanh": 1, "abs": 1, "sqrt": 1,
    "min": 2, "max": 2,
}
_NONSMOOTH = {"abs", "min", "max"}


class Node:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Num(Node):
    value: float


@dataclass(frozen=True, slots=True)
class Var(Node):
    pass


@dataclass(frozen=True, slots=True)
class Param(Node):
    name: str


@dataclass(frozen=True, slots=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True, slots=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True, slots=True)
class Func(Node):
    name: str
    args: tuple


# --------------------------------------------------------------------------- parsing

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[^\W\d]\w*)"
    r"|(?P<op>\*\*|[-+*/^(),])"
    r")"
)


def _tokenize(src):
    pos = 0
    out = []
    src = src.rstrip()
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", pos)
        kind = m.lastgroup
        text = m.group(kind)
        start = m.start(kind)
        if kind == "op" and text == "**":
            text = "^"
        out.append((kind, text, start))
        pos = m.end()
    out.append(("end", "", len(src)))
    return out


class _Parser:
    def __init__(self, src, known_params=None):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0
        self.known_params = known_params

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, val, pos = self.take()
        if val != text or kind not in ("op",):
            raise ExprSyntaxError(f"expected {text!r}, found {val or 'end of input'!r}", pos)

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            # a bare name or number after a complete operand is implicit multiplication
            raise ExprSyntaxError(f"unexpected token {val!r} (explicit '*' required?)", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            arg = self.unary()
            # "-3" is the literal -3; this keeps serialize/parse a bijection
            if isinstance(arg, Num) and self.toks[self.i - 1][0] == "num":
                return Num(-arg.value)
            return Neg(arg)
        if kind == "op" and val == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                if val not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {val!r}", pos)
                self.take()
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[val]:
                    raise ExprSyntaxError(
                        f"{val} takes {FUNCTIONS[val]} argument(s), got {len(args)}", pos)
                return Func(val, tuple(args))
            if val == "t":
                return Var()
            if val == "pi":
                return Num(math.pi)
            if val in FUNCTIONS:
                raise ExprSyntaxError(f"function {val!r} used without arguments", pos)
            if self.known_params is not None and val not in self.known_params:
                raise ExprSyntaxError(f"unknown identifier {val!r}", pos)
            return Param(val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {val or 'end of input'!r}", pos)


def parse(src: str, known_params=None) -> "CoeffExpr":
    """Parse ``src`` into a :class:`CoeffExpr`.

    ``known_params``, if given, restricts free identifiers to that set so that
    typos are reported at parse time instead of at evaluation.
    """
    if not isinstance(src, str) or not src.strip():
        raise ExprSyntaxError("empty expression", 0)
    return CoeffExpr(_Parser(src, known_params).parse())


# --------------------------------------------------------------------------- text

def _fmt_num(v):
    if v == math.pi:
        return "pi"
    if float(v).is_integer() and abs(v) < 1e16:
        s = str(int(v))
    else:
        s = repr(float(v))
    return f"({s})" if v < 0 or s.startswith("-") else s


def serialize(node: Node) -> str:
    """Canonical, fully parenthesized text of ``node``."""
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Var):
        return "t"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Neg):
        inner = serialize(node.arg)
        if isinstance(node.arg, Num) and not inner.startswith("("):
            inner = f"({inner})"  # "-3" would re-parse as a literal
        return f"(-{inner})"
    if isinstance(node, BinOp):
        return f"({serialize(node.left)}{node.op}{serialize(node.right)})"
    if isinstance(node, Func):
        return f"{node.name}({','.join(serialize(a) for a in node.args)})"
    raise TypeError(node)


# --------------------------------------------------------------------------- tree utilities

def _params(node, acc):
    if isinstance(node, Param):
        acc.add(node.name)
    elif isinstance(node, Neg):
        _params(node.arg, acc)
    elif isinstance(node, BinOp):
        _params(node.left, acc)
        _params(node.right, acc)
    elif isinstance(node, Func):
        for a in node.args:
            _params(a, acc)
    return acc


def _depends_on_t(node):
    if isinstance(node, Var):
        return True
    if isinstance(node, Neg):
        return _depends_on_t(node.arg)
    if isinstance(node, BinOp):
        return _depends_on_t(node.left) or _depends_on_t(node.right)
    if isinstance(node, Func):
        return any(_depends_on_t(a) for a in node.args)
    return False


def _substitute(node, values):
    if isinstance(node, Param):
        if node.name in values:
            return Num(float(values[node.name]))
        return node
    if isinstance(node, Neg):
        return _neg(_substitute(node.arg, values))
    if isinstance(node, BinOp):
        return BinOp(node.op, _substitute(node.left, values), _substitute(node.right, values))
    if isinstance(node, Func):
        return Func(node.name, tuple(_substitute(a, values) for a in node.args))
    return node


def _compose(node, inner):
    if isinstance(node, Var):
        return inner
    if isinstance(node, Neg):
        return Neg(_compose(node.arg, inner))
    if isinstance(node, BinOp):
        return BinOp(node.op, _compose(node.left, inner), _compose(node.right, inner))
    if isinstance(node, Func):
        return Func(node.name, tuple(_compose(a, inner) for a in node.args))
    return node


# --------------------------------------------------------------------------- evaluation

_SCALAR_FUNCS = {
    "sin": math.sin, "cos": math.cos, "tan": math.tan,
    "cot": lambda x: 1.0 / math.tan(x),
    "exp": math.exp, "ln": math.log, "sinh": math.sinh, "cosh": math.cosh,
    "tanh": math.tanh, "abs": abs, "sqrt": math.sqrt, "min": min, "max": max,
}


def _eval(node, t, params):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return t
    if isinstance(node, Param):
        try:
            return float(params[node.name])
        except (KeyError, TypeError):
            raise ExprError(f"unbound parameter {node.name!r}") from None
    if isinstance(node, Neg):
        return -_eval(node.arg, t, params)
    if isinstance(node, BinOp):
        a = _eval(node.left, t, params)
        b = _eval(node.right, t, params)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        return math.pow(a, b)
    if isinstance(node, Func):
        return _SCALAR_FUNCS[node.name](*(_eval(a, t, params) for a in node.args))
    raise TypeError(node)


def evaluate(e, t: float, params: Mapping[str, float] | None = None) -> float:
    """Evaluate ``e`` at ``t`` in double precision.

    Raises :class:`ExprDomainError` on division by zero, logarithm of a
    nonpositive number, square root of a negative number, overflow, or a
    non-finite result.
    """
    node = e.root if isinstance(e, CoeffExpr) else e
    try:
        val = _eval(node, float(t), params or {})
    except (ZeroDivisionError, ValueError, OverflowError) as exc:
        raise ExprDomainError(f"{serialize(node)} undefined at t={t!r}: {exc}", t) from None
    if not math.isfinite(val):
        raise ExprDomainError(f"{serialize(node)} is not finite at t={t!r}", t)
    return val


# Compilation to Python source: one function for scalars (math), one for arrays (numpy).

_NP_NAMES = {
    "sin": "np.sin", "cos": "np.cos", "tan": "np.tan", "exp": "np.exp", "ln": "np.log",
    "sinh": "np.sinh", "cosh": "np.cosh", "tanh": "np.tanh", "abs": "np.abs",
    "sqrt": "np.sqrt", "min": "np.minimum", "max": "np.maximum",
}
_M_NAMES = {
    "sin": "_m.sin", "cos": "_m.cos", "tan": "_m.tan", "exp": "_m.exp", "ln": "_m.log",
    "sinh": "_m.sinh", "cosh": "_m.cosh", "tanh": "_m.tanh", "abs": "abs",
    "sqrt": "_m.sqrt", "min": "min", "max": "max",
}


def _to_source(node, vector):
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return "t"
    if isinstance(node, Param):
        raise ExprError(f"unbound parameter {node.name!r}")
    if isinstance(node, Neg):
        return f"(-{_to_source(node.arg, vector)})"
    if isinstance(node, BinOp):
        a = _to_source(node.left, vector)
        b = _to_source(node.right, vector)
        if node.op == "^":
            if vector:
                return f"np.power({a}, {b})"
            return f"_m.pow({a}, {b})"
        return f"({a} {node.op} {b})"
    if isinstance(node, Func):
        args = ", ".join(_to_source(a, vector) for a in node.args)
        if node.name == "cot":
            return f"(1.0 / {'np' if vector else '_m'}.tan({args}))"
        table = _NP_NAMES if vector else _M_NAMES
        return f"{table[node.name]}({args})"
    raise TypeError(node)


class Compiled:
    """Callable form of a parameter-free expression.

    Accepts a float or a numpy array; domain errors raise
    :class:`ExprDomainError` in both cases.
    """

    __slots__ = ("text", "_scalar", "_vector", "constant")

    def __init__(self, node):
        self.text = serialize(node)
        ns = {"_m": math, "np": np}
        self._scalar = eval(f"lambda t: {_to_source(node, False)}", ns)
        self._vector = eval(f"lambda t: {_to_source(node, True)}", ns)
        self.constant = None if _depends_on_t(node) else evaluate(node, 0.0)

    def __call__(self, t):
        if isinstance(t, np.ndarray):
            return self.vector(t)
        return self.scalar(t)

    def scalar(self, t):
        try:
            v = self._scalar(t)
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise ExprDomainError(f"{self.text} undefined at t={t!r}: {exc}", t) from None
        if v - v != 0.0:  # inf or nan
            raise ExprDomainError(f"{self.text} is not finite at t={t!r}", t)
        return v

    def vector(self, t):
        t = np.asarray(t, dtype=float)
        try:
            with np.errstate(divide="raise", invalid="raise", over="raise", under="ignore"):
                v = self._vector(t)
        except FloatingPointError as exc:
            bad = self._first_bad(t)
            raise ExprDomainError(f"{self.text} undefined on grid ({exc})", bad) from None
        v = np.broadcast_to(np.asarray(v, dtype=float), t.shape).copy()
        if not np.all(np.isfinite(v)):
            bad = float(t.reshape(-1)[np.argmin(np.isfinite(v).reshape(-1))])
            raise ExprDomainError(f"{self.text} is not finite at t={bad!r}", bad)
        return v

    def _first_bad(self, t):
        for x in np.ravel(t):
            try:
                self.scalar(float(x))
            except ExprDomainError:
                return float(x)
        return None


# --------------------------------------------------------------------------- differentiation

def _num(v):
    return Num(float(v))


def _is_num(n, v=None):
    return isinstance(n, Num) and (v is None or n.value == v)


def _neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _add(a, b):
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return BinOp("+", a, b)


def _sub(a, b):
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return _neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    return BinOp("-", a, b)


def _mul(a, b):
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return Num(0.0)
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return BinOp("*", a, b)


def _div(a, b):
    if _is_num(a, 0.0):
        return Num(0.0)
    if _is_num(b, 1.0):
        return a
    return BinOp("/", a, b)


def _pow(a, b):
    if _is_num(b, 1.0):
        return a
    if _is_num(b, 0.0):
        return Num(1.0)
    return BinOp("^", a, b)


def _d(node):
    if isinstance(node, (Num, Param)):
        return Num(0.0)
    if isinstance(node, Var):
        return Num(1.0)
    if isinstance(node, Neg):
        return _neg(_d(node.arg))
    if isinstance(node, BinOp):
        u, v = node.left, node.right
        du, dv = _d(u), _d(v)
        if node.op == "+":
            return _add(du, dv)
        if node.op == "-":
            return _sub(du, dv)
        if node.op == "*":
            return _add(_mul(du, v), _mul(u, dv))
        if node.op == "/":
            return _div(_sub(_mul(du, v), _mul(u, dv)), _pow(v, _num(2)))
        # power
        if not _depends_on_t(v):
            # d(u^c) = c u^(c-1) u'
            return _mul(_mul(v, _pow(u, _sub(v, _num(1)))), du)
        if not _depends_on_t(u):
            return _mul(_mul(node, Func("ln", (u,))), dv)
        return _mul(node, _add(_mul(dv, Func("ln", (u,))), _div(_mul(v, du), u)))
    if isinstance(node, Func):
        if node.name in _NONSMOOTH:
            raise NotDifferentiableError(f"{node.name} is not differentiable")
        (u,) = node.args
        du = _d(u)
        if _is_num(du, 0.0):
            return Num(0.0)
        name = node.name
        if name == "sin":
            outer = Func("cos", (u,))
        elif name == "cos":
            outer = _neg(Func("sin", (u,)))
        elif name == "tan":
            outer = _add(_num(1), _pow(Func("tan", (u,)), _num(2)))
        elif name == "cot":
            outer = _neg(_add(_num(1), _pow(Func("cot", (u,)), _num(2))))
        elif name == "exp":
            outer = node
        elif name == "ln":
            return _div(du, u)
        elif name == "sinh":
            outer = Func("cosh", (u,))
        elif name == "cosh":
            outer = Func("sinh", (u,))
        elif name == "tanh":
            outer = _sub(_num(1), _pow(Func("tanh", (u,)), _num(2)))
        elif name == "sqrt":
            return _div(du, _mul(_num(2), node))
        else:  # pragma: no cover - FUNCTIONS and this table are kept in sync
            raise NotDifferentiableError(name)
        return _mul(outer, du)
    raise TypeError(node)


def _check_smooth(node):
    if isinstance(node, Func):
        if node.name in _NONSMOOTH:
            raise NotDifferentiableError(
                f"{node.name}(...) is not differentiable; rewrite without abs/min/max")
        for a in node.args:
            _check_smooth(a)
    elif isinstance(node, Neg):
        _check_smooth(node.arg)
    elif isinstance(node, BinOp):
        _check_smooth(node.left)
        _check_smooth(node.right)


def differentiate(e) -> "CoeffExpr":
    """Exact derivative with respect to ``t``.

    Trivial constant folding (0 and 1 factors) is applied; no other
    simplification is attempted.
    """
    node = e.root if isinstance(e, CoeffExpr) else e
    _check_smooth(node)
    return CoeffExpr(_d(node))


# --------------------------------------------------------------------------- public wrapper

class CoeffExpr:
    """Immutable expression tree in ``t`` with optional named parameters."""

    __slots__ = ("root", "_hash")

    def __init__(self, root: Node):
        object.__setattr__(self, "root", root)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("CoeffExpr is immutable")

    @classmethod
    def parse(cls, src: str, known_params=None) -> "CoeffExpr":
        return parse(src, known_params)

    @classmethod
    def const(cls, value: float) -> "CoeffExpr":
        return cls(Num(float(value)))

    def __eq__(self, other):
        return isinstance(other, CoeffExpr) and self.root == other.root

    def __hash__(self):
        if self._hash is None:
            object.__setattr__(self, "_hash", hash(self.root))
        return self._hash

    def __repr__(self):
        return f"CoeffExpr({self.text()!r})"

    def __str__(self):
        return self.text()

    def text(self) -> str:
        return serialize(self.root)

    @property
    def params(self) -> frozenset:
        return frozenset(_params(self.root, set()))

    def depends_on_t(self) -> bool:
        return _depends_on_t(self.root)

    def is_smooth(self) -> bool:
        try:
            _check_smooth(self.root)
        except NotDifferentiableError:
            return False
        return True

    def bind(self, params: Mapping[str, float] | None) -> "CoeffExpr":
        """Substitute parameter values; unknown names in ``params`` are ignored."""
        if not params:
            return self
        return CoeffExpr(_substitute(self.root, params))

    def evaluate(self, t: float, params: Mapping[str, float] | None = None) -> float:
        return evaluate(self, t, params)

    def compose(self, inner) -> "CoeffExpr":
        """``e(inner(t))``: every occurrence of ``t`` replaced by ``inner``."""
        return CoeffExpr(_compose(self.root, as_expr(inner).root))

    def derivative(self) -> "CoeffExpr":
        return differentiate(self)

    def compile(self, params: Mapping[str, float] | None = None) -> Compiled:
        bound = self.bind({k: params[k] for k in self.params if params and k in params})
        missing = bound.params
        if missing:
            raise ExprError(f"unbound parameter(s): {', '.join(sorted(missing))}")
        return _compile_cached(bound.root)


@lru_cache(maxsize=4096)
def _compile_cached(node) -> Compiled:
    return Compiled(node)


def as_expr(x) -> CoeffExpr:
    """Coerce text, numbers or expressions to :class:`CoeffExpr`."""
    if isinstance(x, CoeffExpr):
        return x
    if isinstance(x, (int, float)):
        return CoeffExpr.const(x)
    if isinstance(x, str):
        return parse(x)
    raise TypeError(f"cannot interpret {x!r} as an expression")


Fn = Callable[[float], float]
