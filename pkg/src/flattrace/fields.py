"""Smooth scalar fields on planar charts, with exact or finite-difference derivatives.

Two terminal field types cover every use in the package:

* ``ExprField`` wraps a tiny arithmetic expression AST (the same grammar used by
  the config files: ``+ - * / ^``, ``exp log sin cos sinh cosh sqrt``, constants
  ``pi`` and ``e``, variables ``x`` and ``y``).  Differentiation is symbolic, so
  derivatives of any order stay exact.
* ``FuncField`` wraps an opaque callable and differentiates by central
  differences with one Richardson extrapolation level.  Nested differentiation
  widens the step to keep the noise amplification under control.

Composite fields (sums, products, complex scalar multiples) differentiate by
the usual calculus rules, pushing derivative requests down to the terminals.
A dedicated ``bumppow`` AST node represents ``exp(1 - 1/(1-s)) / (1-s)^k`` with
masked evaluation outside ``s < 1``; the family is closed under differentiation,
which is what makes compactly supported bump fields exactly differentiable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Expr", "parse_expr", "Field", "ExprField", "FuncField", "ConstField",
    "as_field", "bump_field", "ParseError",
]


class ParseError(ValueError):
    """Raised when an expression string does not parse."""


# ---------------------------------------------------------------------------
# Expression AST
# ---------------------------------------------------------------------------

_FUNCS = {
    "exp": np.exp, "log": np.log, "sin": np.sin, "cos": np.cos,
    "sinh": np.sinh, "cosh": np.cosh, "sqrt": np.sqrt,
}
_CONSTS = {"pi": math.pi, "e": math.e}


class Expr:
    """Node of the expression AST. Subclasses implement ``ev`` and ``diff``."""

    def ev(self, env):
        raise NotImplementedError

    def diff(self, var):
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self!s}>"


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def ev(self, env):
        return self.value

    def diff(self, var):
        return Num(0.0)

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def ev(self, env):
        return env[self.name]

    def diff(self, var):
        return Num(1.0 if var == self.name else 0.0)

    def __str__(self):
        return self.name


def _is_num(e, v=None):
    return isinstance(e, Num) and (v is None or e.value == v)


def add(a, b):
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value + b.value)
    return Add(a, b)


def sub(a, b):
    if _is_num(b, 0.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value - b.value)
    return Sub(a, b)


def mul(a, b):
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return Num(0.0)
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value * b.value)
    return Mul(a, b)


def div(a, b):
    if _is_num(a, 0.0):
        return Num(0.0)
    if _is_num(b, 1.0):
        return a
    return Div(a, b)


@dataclass(frozen=True)
class Add(Expr):
    a: Expr
    b: Expr

    def ev(self, env):
        return self.a.ev(env) + self.b.ev(env)

    def diff(self, var):
        return add(self.a.diff(var), self.b.diff(var))

    def __str__(self):
        return f"({self.a} + {self.b})"


@dataclass(frozen=True)
class Sub(Expr):
    a: Expr
    b: Expr

    def ev(self, env):
        return self.a.ev(env) - self.b.ev(env)

    def diff(self, var):
        return sub(self.a.diff(var), self.b.diff(var))

    def __str__(self):
        return f"({self.a} - {self.b})"


@dataclass(frozen=True)
class Mul(Expr):
    a: Expr
    b: Expr

    def ev(self, env):
        return self.a.ev(env) * self.b.ev(env)

    def diff(self, var):
        return add(mul(self.a.diff(var), self.b), mul(self.a, self.b.diff(var)))

    def __str__(self):
        return f"({self.a} * {self.b})"


@dataclass(frozen=True)
class Div(Expr):
    a: Expr
    b: Expr

    def ev(self, env):
        return self.a.ev(env) / self.b.ev(env)

    def diff(self, var):
        da, db = self.a.diff(var), self.b.diff(var)
        return div(sub(mul(da, self.b), mul(self.a, db)), mul(self.b, self.b))

    def __str__(self):
        return f"({self.a} / {self.b})"


@dataclass(frozen=True)
class Neg(Expr):
    a: Expr

    def ev(self, env):
        return -self.a.ev(env)

    def diff(self, var):
        return Neg(self.a.diff(var))

    def __str__(self):
        return f"(-{self.a})"


@dataclass(frozen=True)
class Pow(Expr):
    a: Expr
    b: Expr

    def ev(self, env):
        return self.a.ev(env) ** self.b.ev(env)

    def diff(self, var):
        if _is_num(self.b):
            n = self.b.value
            return mul(mul(Num(n), Pow(self.a, Num(n - 1.0))), self.a.diff(var))
        # general a^b = exp(b log a)
        inner = add(mul(self.b.diff(var), Call("log", self.a)),
                    mul(self.b, div(self.a.diff(var), self.a)))
        return mul(self, inner)

    def __str__(self):
        return f"({self.a} ^ {self.b})"


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    a: Expr

    def ev(self, env):
        return _FUNCS[self.fn](self.a.ev(env))

    def diff(self, var):
        da = self.a.diff(var)
        f = self.fn
        if f == "exp":
            outer = self
        elif f == "log":
            outer = div(Num(1.0), self.a)
            return mul(outer, da)
        elif f == "sin":
            outer = Call("cos", self.a)
        elif f == "cos":
            outer = Neg(Call("sin", self.a))
        elif f == "sinh":
            outer = Call("cosh", self.a)
        elif f == "cosh":
            outer = Call("sinh", self.a)
        elif f == "sqrt":
            outer = div(Num(0.5), self)
        else:  # pragma: no cover
            raise ParseError(f"cannot differentiate call {f}")
        return mul(outer, da)

    def __str__(self):
        return f"{self.fn}({self.a})"


@dataclass(frozen=True)
class BumpPow(Expr):
    """exp(1 - 1/(1-s)) / (1-s)^k for s < 1, identically 0 for s >= 1.

    Closed under differentiation:
        d/ds bumppow(s, k) = -bumppow(s, k+2) + k * bumppow(s, k+1)
    """

    a: Expr
    k: int

    def ev(self, env):
        s = np.asarray(self.a.ev(env), dtype=float)
        inside = s < 1.0 - 1e-12
        sc = np.where(inside, s, 0.0)
        t = 1.0 - sc
        val = np.exp(1.0 - 1.0 / t) / t ** self.k
        return np.where(inside, val, 0.0)

    def diff(self, var):
        da = self.a.diff(var)
        dself = add(Neg(BumpPow(self.a, self.k + 2)),
                    mul(Num(float(self.k)), BumpPow(self.a, self.k + 1)))
        return mul(dself, da)

    def __str__(self):
        return f"bumppow({self.a}, {self.k})"


@dataclass(frozen=True)
class MaskPow(Expr):
    """(1 - s)^p for s < 1, identically 0 beyond; p >= 1.

    C^{p-1} at the support edge with polynomially bounded derivatives, which
    keeps discretization constants tame (the exponential bump's derivatives
    grow factorially and poison high-order convergence at practical steps)."""

    a: Expr
    p: int

    def ev(self, env):
        s = np.asarray(self.a.ev(env), dtype=float)
        inside = s < 1.0
        return np.where(inside, np.where(inside, 1.0 - s, 0.0) ** self.p, 0.0)

    def diff(self, var):
        if self.p < 1:
            raise ValueError("MaskPow derivative needs p >= 1")
        da = self.a.diff(var)
        return mul(mul(Num(-float(self.p)), MaskPow(self.a, self.p - 1)), da)

    def __str__(self):
        return f"maskpow({self.a}, {self.p})"


# ---------------------------------------------------------------------------
# Parser: recursive descent over + - * / ^ with function calls
# ---------------------------------------------------------------------------

def _tokenize(s):
    tokens, i = [], 0
    while i < len(s):
        c = s[i]
        if c.isspace():
            i += 1
        elif c in "+-*/^()":
            tokens.append(c)
            i += 1
        elif c.isdigit() or c == ".":
            j = i
            while j < len(s) and (s[j].isdigit() or s[j] in ".eE" or
                                  (s[j] in "+-" and s[j - 1] in "eE")):
                j += 1
            tokens.append(("num", float(s[i:j])))
            i = j
        elif c.isalpha() or c == "_":
            j = i
            while j < len(s) and (s[j].isalnum() or s[j] == "_"):
                j += 1
            tokens.append(("name", s[i:j]))
            i = j
        else:
            raise ParseError(f"unexpected character {c!r} in {s!r}")
    return tokens


def parse_expr(s: str, variables=("x", "y")) -> Expr:
    """Parse an expression string into an AST."""
    tokens = _tokenize(s)
    pos = [0]

    def peek():
        return tokens[pos[0]] if pos[0] < len(tokens) else None

    def take(expect=None):
        tok = peek()
        if tok is None or (expect is not None and tok != expect):
            raise ParseError(f"expected {expect!r}, got {tok!r} in {s!r}")
        pos[0] += 1
        return tok

    def expr():
        node = term()
        while peek() in ("+", "-"):
            op = take()
            node = add(node, term()) if op == "+" else sub(node, term())
        return node

    def term():
        node = unary()
        while peek() in ("*", "/"):
            op = take()
            node = mul(node, unary()) if op == "*" else div(node, unary())
        return node

    def unary():
        if peek() == "-":
            take()
            return Neg(unary())
        if peek() == "+":
            take()
            return unary()
        return power()

    def power():
        base = atom()
        if peek() == "^":
            take()
            return Pow(base, unary())
        return base

    def atom():
        tok = take()
        if tok == "(":
            node = expr()
            take(")")
            return node
        if isinstance(tok, tuple) and tok[0] == "num":
            return Num(tok[1])
        if isinstance(tok, tuple) and tok[0] == "name":
            name = tok[1]
            if peek() == "(":
                take("(")
                arg = expr()
                take(")")
                if name not in _FUNCS:
                    raise ParseError(f"unknown function {name!r}")
                return Call(name, arg)
            if name in _CONSTS:
                return Num(_CONSTS[name])
            if name in variables:
                return Var(name)
            raise ParseError(f"unknown name {name!r}")
        raise ParseError(f"unexpected token {tok!r}")

    node = expr()
    if pos[0] != len(tokens):
        raise ParseError(f"trailing input in {s!r}")
    return node


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------

class Field:
    """A smooth (possibly complex-valued) function of chart coordinates."""

    def ev(self, x, y):
        raise NotImplementedError

    def d(self, axis: str) -> "Field":
        raise NotImplementedError

    # derivative stencil half-width in chart units (0 for analytic fields)
    stencil = 0.0

    def __add__(self, other):
        return SumField([self, as_field(other)])

    __radd__ = __add__

    def __sub__(self, other):
        return SumField([self, ScaledField(-1.0, as_field(other))])

    def __rsub__(self, other):
        return SumField([as_field(other), ScaledField(-1.0, self)])

    def __mul__(self, other):
        if np.isscalar(other):
            return ScaledField(other, self)
        return ProdField(self, as_field(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return ScaledField(-1.0, self)


class ConstField(Field):
    def __init__(self, c):
        self.c = c

    def ev(self, x, y):
        return np.full(np.broadcast(x, y).shape, self.c) if np.ndim(x) or np.ndim(y) else self.c

    def d(self, axis):
        return ConstField(0.0 * self.c)


class ExprField(Field):
    """Field backed by an expression AST; derivatives are symbolic."""

    def __init__(self, expr, variables=("x", "y")):
        if isinstance(expr, str):
            expr = parse_expr(expr, variables)
        self.expr = expr

    def ev(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = self.expr.ev({"x": x, "y": y})
        if np.ndim(out) == 0 and (np.ndim(x) or np.ndim(y)):
            # constant-folded expressions must still broadcast over points
            return np.full(np.broadcast(x, y).shape, float(out))
        return out

    def d(self, axis):
        return ExprField(self.expr.diff(axis))


class FuncField(Field):
    """Field backed by a plain callable; derivatives use central differences
    with one Richardson level. ``level`` tracks nesting so nested FD widens
    its step."""

    def __init__(self, fn, step=1e-5, level=0):
        self.fn = fn
        self.step = step
        self.level = level

    @property
    def stencil(self):
        return 0.0

    def ev(self, x, y):
        return self.fn(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def d(self, axis):
        return _FDField(self, axis)


class _FDField(Field):
    def __init__(self, base, axis):
        self.base = base
        self.axis = axis
        lvl = getattr(base, "level", 0)
        self.level = lvl + 1
        base_step = getattr(base, "step", 1e-5)
        self.h = base_step * (30.0 ** lvl)

    @property
    def stencil(self):
        return 2.0 * self.h + getattr(self.base, "stencil", 0.0)

    def ev(self, x, y):
        h = self.h
        b = self.base

        def at(dx, dy):
            return b.ev(np.asarray(x) + dx, np.asarray(y) + dy)

        if self.axis == "x":
            d1 = (at(h, 0) - at(-h, 0)) / (2 * h)
            d2 = (at(h / 2, 0) - at(-h / 2, 0)) / h
        else:
            d1 = (at(0, h) - at(0, -h)) / (2 * h)
            d2 = (at(0, h / 2) - at(0, -h / 2)) / h
        return (4.0 * d2 - d1) / 3.0

    def d(self, axis):
        return _FDField(self, axis)

    step = 1e-5  # inherited default; real step chosen per level in __init__


class SumField(Field):
    def __init__(self, parts):
        self.parts = parts

    @property
    def stencil(self):
        return max(getattr(p, "stencil", 0.0) for p in self.parts)

    def ev(self, x, y):
        out = self.parts[0].ev(x, y)
        for p in self.parts[1:]:
            out = out + p.ev(x, y)
        return out

    def d(self, axis):
        return SumField([p.d(axis) for p in self.parts])


class ProdField(Field):
    def __init__(self, a, b):
        self.a, self.b = a, b

    @property
    def stencil(self):
        return max(getattr(self.a, "stencil", 0.0), getattr(self.b, "stencil", 0.0))

    def ev(self, x, y):
        return self.a.ev(x, y) * self.b.ev(x, y)

    def d(self, axis):
        return SumField([ProdField(self.a.d(axis), self.b),
                         ProdField(self.a, self.b.d(axis))])


class ScaledField(Field):
    def __init__(self, c, f):
        self.c, self.f = c, f

    @property
    def stencil(self):
        return getattr(self.f, "stencil", 0.0)

    def ev(self, x, y):
        return self.c * self.f.ev(x, y)

    def d(self, axis):
        return ScaledField(self.c, self.f.d(axis))


def as_field(obj) -> Field:
    """Coerce an expression string, number, callable, or Field into a Field."""
    if isinstance(obj, Field):
        return obj
    if isinstance(obj, str):
        return ExprField(obj)
    if np.isscalar(obj):
        return ConstField(obj)
    if callable(obj):
        return FuncField(obj)
    raise TypeError(f"cannot interpret {obj!r} as a field")


def _radial_s(cx: float, cy: float, radius: float) -> Expr:
    return div(add(mul(sub(Var("x"), Num(cx)), sub(Var("x"), Num(cx))),
                   mul(sub(Var("y"), Num(cy)), sub(Var("y"), Num(cy)))),
               Num(radius * radius))


def bump_field(cx: float, cy: float, radius: float, amplitude: float = 1.0) -> ExprField:
    """Standard smooth bump amplitude * exp(1 - 1/(1 - s)), s = r^2/radius^2,
    compactly supported in the disk of the given radius about (cx, cy)."""
    return ExprField(mul(Num(amplitude), BumpPow(_radial_s(cx, cy, radius), 0)))


def poly_bump_field(cx: float, cy: float, radius: float, amplitude: float = 1.0,
                    p: int = 10) -> ExprField:
    """Plateau bump amplitude * (1 - s)^p, s = r^2/radius^2: C^{p-1} with
    polynomially bounded derivatives.  Preferred for perturbation data that
    feeds the orbit solver, where discretization constants track the
    derivative growth of the profile."""
    if p < 4:
        raise ValueError("need p >= 4 for twice-differentiable data")
    return ExprField(mul(Num(amplitude), MaskPow(_radial_s(cx, cy, radius), p)))
