"""Small expression trees over ``z1..zn`` with symbolic partial derivatives.

Node kinds: constant, variable, sum, product, integer power, exp, sin, cos.
Every expression is total on the reals and closed under differentiation.

Text form is prefix (S-expression) notation::

    (* 0.5 (^ z1 2))        (cos (* 3 z1))        (+ z1 (* -1 z2))

``-`` is accepted on input as sugar: ``(- a)`` is ``(* -1 a)`` and
``(- a b ...)`` is ``(+ a (* -1 b) ...)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import InvalidArgumentError


class Expr:
    def diff(self, k: int) -> "Expr":
        raise NotImplementedError

    def evaluate(self, z):
        """Evaluate on ``z`` of shape ``(..., n)``; returns shape ``(...)``."""
        z = np.asarray(z, dtype=float)
        out = self._ev(z)
        return np.broadcast_to(out, z.shape[:-1]).astype(float) if z.ndim > 1 else float(out)

    def _ev(self, z):
        raise NotImplementedError

    def variables(self) -> set:
        raise NotImplementedError

    def __str__(self):
        return self.to_prefix()

    # operator sugar for building expressions in code
    def __add__(self, other):
        return add(self, _coerce(other))

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __neg__(self):
        return mul(Const(-1.0), self)

    def __sub__(self, other):
        return add(self, -_coerce(other))

    def __pow__(self, p):
        return power(self, p)


def _coerce(x) -> Expr:
    return x if isinstance(x, Expr) else Const(float(x))


def _fmt(c: float) -> str:
    return repr(float(c))


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def diff(self, k):
        return ZERO

    def _ev(self, z):
        return self.value

    def variables(self):
        return set()

    def to_prefix(self):
        return _fmt(self.value)


ZERO = Const(0.0)
ONE = Const(1.0)


@dataclass(frozen=True)
class Var(Expr):
    """Variable ``z_index``; indices are 1-based."""

    index: int

    def diff(self, k):
        return ONE if k == self.index else ZERO

    def _ev(self, z):
        return z[..., self.index - 1]

    def variables(self):
        return {self.index}

    def to_prefix(self):
        return f"z{self.index}"


@dataclass(frozen=True)
class Sum(Expr):
    terms: Tuple[Expr, ...]

    def diff(self, k):
        return add(*(t.diff(k) for t in self.terms))

    def _ev(self, z):
        out = self.terms[0]._ev(z)
        for t in self.terms[1:]:
            out = out + t._ev(z)
        return out

    def variables(self):
        return set().union(*(t.variables() for t in self.terms))

    def to_prefix(self):
        return "(+ " + " ".join(t.to_prefix() for t in self.terms) + ")"


@dataclass(frozen=True)
class Product(Expr):
    factors: Tuple[Expr, ...]

    def diff(self, k):
        terms = []
        for j, fj in enumerate(self.factors):
            d = fj.diff(k)
            if d == ZERO:
                continue
            terms.append(mul(*self.factors[:j], d, *self.factors[j + 1 :]))
        return add(*terms)

    def _ev(self, z):
        out = self.factors[0]._ev(z)
        for f in self.factors[1:]:
            out = out * f._ev(z)
        return out

    def variables(self):
        return set().union(*(f.variables() for f in self.factors))

    def to_prefix(self):
        return "(* " + " ".join(f.to_prefix() for f in self.factors) + ")"


@dataclass(frozen=True)
class Power(Expr):
    base: Expr
    exponent: int

    def __post_init__(self):
        p = self.exponent
        if isinstance(p, bool) or int(p) != p or p < 0:
            raise InvalidArgumentError(f"power exponent must be a nonnegative integer, got {p!r}")
        object.__setattr__(self, "exponent", int(p))

    def diff(self, k):
        d = self.base.diff(k)
        if d == ZERO or self.exponent == 0:
            return ZERO
        return mul(Const(float(self.exponent)), power(self.base, self.exponent - 1), d)

    def _ev(self, z):
        return self.base._ev(z) ** self.exponent

    def variables(self):
        return self.base.variables()

    def to_prefix(self):
        return f"(^ {self.base.to_prefix()} {self.exponent})"


@dataclass(frozen=True)
class Exp(Expr):
    arg: Expr

    def diff(self, k):
        return mul(self, self.arg.diff(k))

    def _ev(self, z):
        return np.exp(self.arg._ev(z))

    def variables(self):
        return self.arg.variables()

    def to_prefix(self):
        return f"(exp {self.arg.to_prefix()})"


@dataclass(frozen=True)
class Sin(Expr):
    arg: Expr

    def diff(self, k):
        return mul(Cos(self.arg), self.arg.diff(k))

    def _ev(self, z):
        return np.sin(self.arg._ev(z))

    def variables(self):
        return self.arg.variables()

    def to_prefix(self):
        return f"(sin {self.arg.to_prefix()})"


@dataclass(frozen=True)
class Cos(Expr):
    arg: Expr

    def diff(self, k):
        return mul(Const(-1.0), Sin(self.arg), self.arg.diff(k))

    def _ev(self, z):
        return np.cos(self.arg._ev(z))

    def variables(self):
        return self.arg.variables()

    def to_prefix(self):
        return f"(cos {self.arg.to_prefix()})"


# Smart constructors.  They drop zero terms and unit factors and fold
# all-constant nodes, but never reassociate: scaling g by a constant scales
# every derivative by exactly that constant.


def add(*terms: Expr) -> Expr:
    kept = [t for t in terms if t != ZERO]
    if not kept:
        return ZERO
    if all(isinstance(t, Const) for t in kept):
        return Const(float(sum(t.value for t in kept)))
    return kept[0] if len(kept) == 1 else Sum(tuple(kept))


def mul(*factors: Expr) -> Expr:
    if any(f == ZERO for f in factors):
        return ZERO
    kept = [f for f in factors if f != ONE]
    if not kept:
        return ONE
    if all(isinstance(f, Const) for f in kept):
        out = 1.0
        for f in kept:
            out *= f.value
        return Const(out)
    return kept[0] if len(kept) == 1 else Product(tuple(kept))


def power(base: Expr, p: int) -> Expr:
    if isinstance(p, bool) or int(p) != p or p < 0:
        raise InvalidArgumentError(f"power exponent must be a nonnegative integer, got {p!r}")
    p = int(p)
    if p == 0:
        return ONE
    if p == 1:
        return base
    if isinstance(base, Const):
        return Const(base.value**p)
    return Power(base, p)


def z(k: int) -> Var:
    if k < 1:
        raise InvalidArgumentError("variables are numbered from z1")
    return Var(k)


# prefix parsing -------------------------------------------------------------

_TOKEN = re.compile(r"\s*(\(|\)|[^\s()]+)")
_VAR = re.compile(r"z([1-9][0-9]*)$")


def _tokenize(text: str):
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise InvalidArgumentError(f"cannot tokenize expression near {text[pos:]!r}")
        out.append(m.group(1))
        pos = m.end()
    return out


def parse(text: str) -> Expr:
    """Parse the prefix notation produced by :meth:`Expr.to_prefix`."""
    if not isinstance(text, str):
        raise InvalidArgumentError("expression must be a string")
    tokens = _tokenize(text)
    if not tokens:
        raise InvalidArgumentError("empty expression")
    expr, pos = _parse_at(tokens, 0)
    if pos != len(tokens):
        raise InvalidArgumentError(f"trailing tokens in expression: {tokens[pos:]}")
    return expr


def _atom(tok: str) -> Expr:
    m = _VAR.match(tok)
    if m:
        return Var(int(m.group(1)))
    try:
        val = float(tok)
    except ValueError:
        raise InvalidArgumentError(f"unknown symbol {tok!r}") from None
    if not np.isfinite(val):
        raise InvalidArgumentError(f"non-finite constant {tok!r}")
    return Const(val)


def _parse_at(tokens, pos):
    tok = tokens[pos]
    if tok == ")":
        raise InvalidArgumentError("unexpected ')'")
    if tok != "(":
        return _atom(tok), pos + 1
    if pos + 1 >= len(tokens):
        raise InvalidArgumentError("unterminated expression")
    op = tokens[pos + 1]
    pos += 2
    args = []
    while True:
        if pos >= len(tokens):
            raise InvalidArgumentError("missing ')'")
        if tokens[pos] == ")":
            pos += 1
            break
        a, pos = _parse_at(tokens, pos)
        args.append(a)
    return _build(op, args), pos


def _build(op: str, args):
    if op == "+" and args:
        return Sum(tuple(args)) if len(args) > 1 else args[0]
    if op == "*" and args:
        return Product(tuple(args)) if len(args) > 1 else args[0]
    if op == "-" and args:
        if len(args) == 1:
            return Product((Const(-1.0), args[0]))
        return Sum((args[0],) + tuple(Product((Const(-1.0), a)) for a in args[1:]))
    if op == "^" and len(args) == 2:
        p = args[1]
        if not isinstance(p, Const) or p.value != int(p.value) or p.value < 0:
            raise InvalidArgumentError("exponent of '^' must be a nonnegative integer constant")
        return Power(args[0], int(p.value))
    unary = {"exp": Exp, "sin": Sin, "cos": Cos}
    if op in unary and len(args) == 1:
        return unary[op](args[0])
    raise InvalidArgumentError(f"bad operator or arity: ({op} ... {len(args)} args)")
