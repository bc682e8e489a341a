"""A small scalar expression language for user-supplied vector fields.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

so ``-x^2`` is ``-(x^2)`` and ``2^-x`` is allowed.  Trees evaluate
elementwise over numpy arrays.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, ParseError

__all__ = [
    "Const", "Var", "Neg", "Add", "Sub", "Mul", "Div", "Pow", "Call",
    "FUNCTIONS", "parse_expr", "pretty", "evaluate", "free_variables",
]

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "tanh": np.tanh}


class Expr:
    __slots__ = ()

    def __str__(self):
        return pretty(self)


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    left: Expr
    right: Expr
    symbol = "?"
    prec = 0


class Add(BinOp):
    symbol, prec = "+", 1


class Sub(BinOp):
    symbol, prec = "-", 1


class Mul(BinOp):
    symbol, prec = "*", 2


class Div(BinOp):
    symbol, prec = "/", 2


class Pow(BinOp):
    symbol, prec = "^", 4


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


_BINOPS = {"+": Add, "-": Sub, "*": Mul, "/": Div, "^": Pow}
_NEG_PREC = 3
_ATOM_PREC = 5

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(src):
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None:
            bad = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise ParseError(f"unexpected character {src[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src, variables):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0
        self.variables = variables

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, val, pos = self.take()
        if val != text:
            found = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {text!r}, found {found}", pos)

    def parse(self):
        tree = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}, expected operator or end of input", pos)
        return tree

    def expr(self):
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            left = _BINOPS[op](left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            left = _BINOPS[op](left, self.unary())
        return left

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return Pow(base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if self.variables is not None and val not in self.variables:
                raise ParseError(f"unknown identifier {val!r}", pos)
            return Var(val)
        if val == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        found = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"expected number, name or '(', found {found}", pos)


def parse_expr(src, variables=None):
    """Parse ``src`` into an expression tree.

    ``variables`` restricts the admissible identifiers (function names are
    always allowed); ``None`` accepts any identifier.
    """
    if variables is not None:
        variables = frozenset(variables)
    return _Parser(src, variables).parse()


def _prec(e):
    if isinstance(e, BinOp):
        return e.prec
    if isinstance(e, Neg):
        return _NEG_PREC
    return _ATOM_PREC


def _fmt_const(v):
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def pretty(e):
    """Print with the fewest parentheses that parse back to the same tree."""
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({pretty(e.arg)})"
    if isinstance(e, Neg):
        return "-" + _wrap(e.arg, _NEG_PREC)
    if isinstance(e, Pow):
        return _wrap(e.left, _ATOM_PREC) + "^" + _wrap(e.right, _NEG_PREC)
    if isinstance(e, BinOp):
        return _wrap(e.left, e.prec) + e.symbol + _wrap(e.right, e.prec + 1)
    raise TypeError(f"not an expression: {e!r}")


def _wrap(e, min_prec):
    s = pretty(e)
    return f"({s})" if _prec(e) < min_prec else s


def free_variables(e):
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Const):
        return set()
    if isinstance(e, (Neg, Call)):
        return free_variables(e.arg)
    return free_variables(e.left) | free_variables(e.right)


def evaluate(e, env):
    """Evaluate elementwise; ``env`` maps variable names to scalars or arrays."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise EvaluationError(f"variable {e.name!r} is unbound") from None
    if isinstance(e, Neg):
        return -evaluate(e.arg, env)
    if isinstance(e, Call):
        return FUNCTIONS[e.func](evaluate(e.arg, env))
    a = evaluate(e.left, env)
    b = evaluate(e.right, env)
    if isinstance(e, Add):
        return a + b
    if isinstance(e, Sub):
        return a - b
    if isinstance(e, Mul):
        return a * b
    if isinstance(e, Div):
        if np.any(np.asarray(b) == 0):
            raise EvaluationError(f"division by zero in {pretty(e)}")
        return a / b
    if isinstance(e, Pow):
        return _power(a, b, e)
    raise TypeError(f"not an expression: {e!r}")


def _power(a, b, e):
    a_arr, b_arr = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if np.any((a_arr == 0) & (b_arr < 0)):
        raise EvaluationError(f"zero raised to a negative power in {pretty(e)}")
    if np.any((a_arr < 0) & (b_arr != np.round(b_arr))):
        raise EvaluationError(f"negative base with non-integer exponent in {pretty(e)}")
    if isinstance(b, float) and b.is_integer() and 0 <= b <= 8:
        # repeated multiplication keeps small integer powers exact and fast
        k = int(b)
        out = 1.0 if k == 0 else a
        for _ in range(k - 1):
            out = out * a
        return out if k else np.ones_like(a_arr) if a_arr.ndim else 1.0
    return np.power(a_arr, b_arr) if (a_arr.ndim or b_arr.ndim) else math.pow(float(a), float(b))
