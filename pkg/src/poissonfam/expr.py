"""Immutable expression trees over one or several real variables.

The primitive set is deliberately small: constants, coordinate projections,
sums, differences, products, quotients, real powers, ``exp`` and ``log``.
Two escape hatches exist: registered callbacks (user code with a
user-supplied derivative) and quadrature-tabulated primitives.

Text form is prefix notation::

    (pow x 2)            x**2 in the one-variable form
    (exp (mul 2 x))      exp(2x)
    (sub x1 x2)          x1 - x2 over several variables

``parse(e.to_text()) == e`` for every tree, and ``parse(s).to_text() == s``
for every string produced by ``to_text``.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .quadrature import adaptive_simpson, cumulative_simpson

__all__ = [
    "Expr", "Const", "Var", "Add", "Sub", "Neg", "Mul", "Div", "Pow", "Exp", "Log",
    "Callback", "Primitive", "ExtrapolationWarning",
    "const", "var", "add", "sub", "neg", "mul", "div", "power", "exp", "log",
    "substitute", "as_affine", "closed_form_inverse", "register_callback", "parse",
    "TABLE_SEGMENTS",
]

TABLE_SEGMENTS = 2048


class ExtrapolationWarning(UserWarning):
    """A tabulated primitive was evaluated outside its table and clamped."""


def _fmt(v: float) -> str:
    if math.isfinite(v) and v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _short(e: "Expr") -> str:
    s = e.to_text()
    return s if len(s) <= 80 else s[:77] + "..."


def _asfloat(v):
    return np.asarray(v, dtype=float)


class Expr:
    """Base class; subclasses are frozen dataclasses compared structurally."""

    # evaluation -----------------------------------------------------------
    def ev(self, vals: Sequence) -> np.ndarray:
        """Evaluate with ``vals[i]`` bound to variable ``i`` (broadcasting)."""
        raise NotImplementedError

    def __call__(self, x):
        """Evaluate a one-variable expression at ``x`` (scalar or array)."""
        out = self.ev((_asfloat(x),))
        return float(out) if np.ndim(out) == 0 else out

    def at(self, point):
        """Evaluate at ``point`` of shape ``(n,)`` or ``(m, n)``."""
        p = _asfloat(point)
        out = self.ev(np.moveaxis(p, -1, 0))
        if np.ndim(out) == 0 and p.ndim > 1:
            out = np.full(p.shape[:-1], float(out))
        return float(out) if np.ndim(out) == 0 else out

    # structure ------------------------------------------------------------
    def children(self) -> tuple["Expr", ...]:
        return ()

    def variables(self) -> frozenset[int]:
        out: frozenset[int] = frozenset()
        for c in self.children():
            out |= c.variables()
        return out

    def diff(self, i: int = 0) -> "Expr":
        raise NotImplementedError

    def to_text(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.to_text()

    # operator sugar (simplifying) ------------------------------------------
    def __add__(self, o):
        return add(self, _lift(o))

    def __radd__(self, o):
        return add(_lift(o), self)

    def __sub__(self, o):
        return sub(self, _lift(o))

    def __rsub__(self, o):
        return sub(_lift(o), self)

    def __mul__(self, o):
        return mul(self, _lift(o))

    def __rmul__(self, o):
        return mul(_lift(o), self)

    def __truediv__(self, o):
        return div(self, _lift(o))

    def __rtruediv__(self, o):
        return div(_lift(o), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, float(p))


def _lift(o) -> Expr:
    return o if isinstance(o, Expr) else Const(float(o))


@dataclass(frozen=True, eq=True, repr=False)
class Const(Expr):
    value: float

    def ev(self, vals):
        return np.float64(self.value)

    def diff(self, i=0):
        return Const(0.0)

    def to_text(self):
        return _fmt(self.value)

    def __repr__(self):
        return f"Const({self.value!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Var(Expr):
    index: int
    name: str | None = field(default=None, compare=False)

    def ev(self, vals):
        if self.index >= len(vals):
            raise DomainError(f"variable {self.to_text()} not bound (got {len(vals)} values)")
        return vals[self.index]

    def variables(self):
        return frozenset({self.index})

    def diff(self, i=0):
        return Const(1.0 if i == self.index else 0.0)

    def to_text(self):
        return self.name if self.name else f"x{self.index + 1}"

    def __repr__(self):
        return f"Var({self.to_text()})"


@dataclass(frozen=True, eq=True, repr=False)
class Add(Expr):
    terms: tuple[Expr, ...]

    def ev(self, vals):
        out = self.terms[0].ev(vals)
        for t in self.terms[1:]:
            out = out + t.ev(vals)
        return out

    def children(self):
        return self.terms

    def diff(self, i=0):
        return add(*(t.diff(i) for t in self.terms))

    def to_text(self):
        return "(add " + " ".join(t.to_text() for t in self.terms) + ")"


@dataclass(frozen=True, eq=True, repr=False)
class Sub(Expr):
    left: Expr
    right: Expr

    def ev(self, vals):
        return self.left.ev(vals) - self.right.ev(vals)

    def children(self):
        return (self.left, self.right)

    def diff(self, i=0):
        return sub(self.left.diff(i), self.right.diff(i))

    def to_text(self):
        return f"(sub {self.left.to_text()} {self.right.to_text()})"


@dataclass(frozen=True, eq=True, repr=False)
class Neg(Expr):
    arg: Expr

    def ev(self, vals):
        return -self.arg.ev(vals)

    def children(self):
        return (self.arg,)

    def diff(self, i=0):
        return neg(self.arg.diff(i))

    def to_text(self):
        return f"(neg {self.arg.to_text()})"


@dataclass(frozen=True, eq=True, repr=False)
class Mul(Expr):
    factors: tuple[Expr, ...]

    def ev(self, vals):
        out = self.factors[0].ev(vals)
        for f in self.factors[1:]:
            out = out * f.ev(vals)
        return out

    def children(self):
        return self.factors

    def diff(self, i=0):
        terms = []
        for k, f in enumerate(self.factors):
            d = f.diff(i)
            if isinstance(d, Const) and d.value == 0.0:
                continue
            terms.append(mul(*self.factors[:k], d, *self.factors[k + 1:]))
        return add(*terms)

    def to_text(self):
        return "(mul " + " ".join(f.to_text() for f in self.factors) + ")"


@dataclass(frozen=True, eq=True, repr=False)
class Div(Expr):
    num: Expr
    den: Expr

    def ev(self, vals):
        d = self.den.ev(vals)
        if np.any(d == 0):
            raise DomainError(f"division by zero in {_short(self)}")
        return self.num.ev(vals) / d

    def children(self):
        return (self.num, self.den)

    def diff(self, i=0):
        dn, dd = self.num.diff(i), self.den.diff(i)
        if isinstance(dd, Const) and dd.value == 0.0:
            return div(dn, self.den)
        return div(sub(mul(dn, self.den), mul(self.num, dd)), power(self.den, 2.0))

    def to_text(self):
        return f"(div {self.num.to_text()} {self.den.to_text()})"


def _is_int(p: float) -> bool:
    return float(p).is_integer()


@dataclass(frozen=True, eq=True, repr=False)
class Pow(Expr):
    """``base ** exponent`` with a real constant exponent.

    Non-integer exponents are valid only for a positive base; negative integer
    exponents exclude a zero base.
    """

    base: Expr
    exponent: float

    def ev(self, vals):
        b = self.base.ev(vals)
        p = self.exponent
        if not _is_int(p):
            if np.any(b <= 0):
                raise DomainError(f"{_short(self)} needs a positive base, got {np.min(b)!r}")
        elif p < 0 and np.any(b == 0):
            raise DomainError(f"{_short(self)} undefined at zero base")
        if p == 2.0:
            return b * b
        return np.power(b, p)

    def children(self):
        return (self.base,)

    def diff(self, i=0):
        db = self.base.diff(i)
        if isinstance(db, Const) and db.value == 0.0:
            return Const(0.0)
        return mul(Const(self.exponent), power(self.base, self.exponent - 1.0), db)

    def to_text(self):
        return f"(pow {self.base.to_text()} {_fmt(self.exponent)})"

    def validity(self) -> tuple[float, float]:
        """Admissible range of the base."""
        return (-math.inf, math.inf) if _is_int(self.exponent) else (0.0, math.inf)


@dataclass(frozen=True, eq=True, repr=False)
class Exp(Expr):
    arg: Expr

    def ev(self, vals):
        return np.exp(self.arg.ev(vals))

    def children(self):
        return (self.arg,)

    def diff(self, i=0):
        return mul(self, self.arg.diff(i))

    def to_text(self):
        return f"(exp {self.arg.to_text()})"


@dataclass(frozen=True, eq=True, repr=False)
class Log(Expr):
    arg: Expr

    def ev(self, vals):
        a = self.arg.ev(vals)
        if np.any(a <= 0):
            raise DomainError(f"{_short(self)} needs a positive argument, got {np.min(a)!r}")
        return np.log(a)

    def children(self):
        return (self.arg,)

    def diff(self, i=0):
        return mul(self.arg.diff(i), power(self.arg, -1.0))

    def to_text(self):
        return f"(log {self.arg.to_text()})"


# --- callbacks ---------------------------------------------------------------

@dataclass(frozen=True)
class _Registered:
    fn: Callable
    derivative: str | None
    inverse: Callable | None


_REGISTRY: dict[str, _Registered] = {}


def _fd_callable(fn: Callable) -> Callable:
    def d(x):
        x = _asfloat(x)
        h = np.cbrt(np.finfo(float).eps) * np.maximum(1.0, np.abs(x))
        return (fn(x + h) - fn(x - h)) / (2.0 * h)

    return d


def register_callback(
    name: str,
    fn: Callable,
    derivative: Callable | None = None,
    inverse: Callable | None = None,
) -> None:
    """Register user code usable as ``(call name arg)``.

    ``derivative`` is registered as ``name'``. When omitted, the derivative
    falls back to central differences; this is only acceptable for
    derivatives of already-registered derivatives.
    """
    if not re.fullmatch(r"[A-Za-z_][\w']*", name):
        raise ValueError(f"invalid callback name {name!r}")
    dname = name + "'"
    if derivative is None:
        derivative = _fd_callable(fn)
    _REGISTRY[name] = _Registered(fn, dname, inverse)
    if dname not in _REGISTRY or _REGISTRY[dname].fn is not derivative:
        _REGISTRY[dname] = _Registered(derivative, None, None)


@dataclass(frozen=True, eq=True, repr=False)
class Callback(Expr):
    name: str
    arg: Expr

    def __post_init__(self):
        if self.name not in _REGISTRY:
            raise KeyError(f"callback {self.name!r} is not registered")

    def ev(self, vals):
        return _asfloat(_REGISTRY[self.name].fn(self.arg.ev(vals)))

    def children(self):
        return (self.arg,)

    def diff(self, i=0):
        reg = _REGISTRY[self.name]
        dname = reg.derivative
        if dname is None:
            dname = self.name + "'"
            _REGISTRY[self.name] = _Registered(reg.fn, dname, reg.inverse)
            _REGISTRY.setdefault(dname, _Registered(_fd_callable(reg.fn), None, None))
        return mul(Callback(dname, self.arg), self.arg.diff(i))

    def to_text(self):
        return f"(call {self.name} {self.arg.to_text()})"


# --- quadrature-tabulated primitive -------------------------------------------

def default_anchor(lo: float, hi: float) -> float:
    """Point where a tabulated primitive is zero."""
    if math.isfinite(lo) and math.isfinite(hi):
        return 0.5 * (lo + hi)
    if math.isfinite(lo):
        return max(lo + 1.0, 1.0) if lo >= 0 else lo + 1.0
    if math.isfinite(hi):
        return hi - 1.0
    return 0.0


@dataclass(frozen=True, eq=True, repr=False)
class Primitive(Expr):
    """``P(arg)`` where ``P(t) = integral of integrand from anchor to t``.

    On a finite interval the primitive is tabulated on ``TABLE_SEGMENTS``
    segments by adaptive Simpson and interpolated by cubic Hermite splines
    (the knot slopes are the exact integrand). Arguments outside the table are
    clamped with an :class:`ExtrapolationWarning`. On unbounded intervals the
    integral is computed on demand from the anchor.
    """

    integrand: Expr
    lo: float
    hi: float
    arg: Expr
    _table: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty interval ({self.lo}, {self.hi})")
        if math.isfinite(self.lo) and math.isfinite(self.hi):
            from scipy.interpolate import CubicHermiteSpline

            g = self._g
            a, b = self.lo, self.hi
            try:
                ends_ok = bool(np.all(np.isfinite(g(np.array([a, b])))))
            except DomainError:
                ends_ok = False
            if not ends_ok:
                # integrand singular at an endpoint: stop half a segment short
                w = self.hi - self.lo
                a, b = a + w / (2 * TABLE_SEGMENTS), b - w / (2 * TABLE_SEGMENTS)
            knots = np.linspace(a, b, TABLE_SEGMENTS + 1)
            vals = cumulative_simpson(g, knots)
            vals -= vals[TABLE_SEGMENTS // 2]  # knot at the interval midpoint
            slopes = g(knots)
            if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(slopes))):
                raise DomainError(f"integrand {_short(self.integrand)} not finite on ({self.lo}, {self.hi})")
            object.__setattr__(self, "_table", (a, b, CubicHermiteSpline(knots, vals, slopes)))

    @property
    def anchor(self) -> float:
        return default_anchor(self.lo, self.hi)

    def _g(self, t):
        return _asfloat(self.integrand.ev((_asfloat(t),))) * np.ones_like(t)

    def _primitive(self, t):
        t = _asfloat(t)
        if self._table is not None:
            a, b, spline = self._table
            if np.any((t < a) | (t > b)):
                warnings.warn(
                    f"tabulated primitive of {_short(self.integrand)} clamped to [{a}, {b}]",
                    ExtrapolationWarning,
                    stacklevel=3,
                )
                t = np.clip(t, a, b)
            return spline(t)
        if np.any((t <= self.lo) | (t >= self.hi)):
            raise DomainError(f"primitive argument outside ({self.lo}, {self.hi})")
        flat = np.atleast_1d(t).ravel()
        anchor = np.full(flat.shape, self.anchor)
        lo = np.minimum(flat, anchor)
        hi = np.maximum(flat, anchor)
        mag = adaptive_simpson(self._g, lo, hi, tol=1e-14)
        res = np.where(flat >= anchor, mag, -mag)
        return res.reshape(np.shape(t))

    def ev(self, vals):
        return self._primitive(self.arg.ev(vals))

    def children(self):
        return (self.integrand, self.arg)

    def variables(self):
        return self.arg.variables()

    def diff(self, i=0):
        return mul(substitute(self.integrand, {0: self.arg}), self.arg.diff(i))

    def to_text(self):
        return f"(prim {self.integrand.to_text()} {_fmt(self.lo)} {_fmt(self.hi)} {self.arg.to_text()})"


# --- simplifying constructors --------------------------------------------------

def const(v: float) -> Const:
    return Const(float(v))


def var(index: int = 0, name: str | None = None) -> Var:
    return Var(index, name)


def _cval(e: Expr) -> float | None:
    return e.value if isinstance(e, Const) else None


def add(*terms: Expr) -> Expr:
    flat: list[Expr] = []
    c = 0.0
    for t in terms:
        t = _lift(t)
        parts = t.terms if isinstance(t, Add) else (t,)
        for p in parts:
            if isinstance(p, Const):
                c += p.value
            else:
                flat.append(p)
    if c != 0.0 or not flat:
        flat.append(Const(c))
    return flat[0] if len(flat) == 1 else Add(tuple(flat))


def sub(a: Expr, b: Expr) -> Expr:
    a, b = _lift(a), _lift(b)
    ca, cb = _cval(a), _cval(b)
    if ca is not None and cb is not None:
        return Const(ca - cb)
    if cb == 0.0:
        return a
    if ca == 0.0:
        return neg(b)
    return Sub(a, b)


def neg(a: Expr) -> Expr:
    a = _lift(a)
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def mul(*factors: Expr) -> Expr:
    flat: list[Expr] = []
    c = 1.0
    for f in factors:
        f = _lift(f)
        parts = f.factors if isinstance(f, Mul) else (f,)
        for p in parts:
            if isinstance(p, Const):
                c *= p.value
            else:
                flat.append(p)
    if c == 0.0:
        return Const(0.0)
    if c != 1.0 or not flat:
        flat.insert(0, Const(c))
    return flat[0] if len(flat) == 1 else Mul(tuple(flat))


def div(a: Expr, b: Expr) -> Expr:
    a, b = _lift(a), _lift(b)
    ca, cb = _cval(a), _cval(b)
    if cb == 1.0:
        return a
    if ca == 0.0:
        return Const(0.0)
    if ca is not None and cb is not None and cb != 0.0:
        return Const(ca / cb)
    if cb is not None and cb != 0.0:
        return mul(Const(1.0 / cb), a)
    return Div(a, b)


def power(b: Expr, p: float) -> Expr:
    b, p = _lift(b), float(p)
    if p == 0.0:
        return Const(1.0)
    if p == 1.0:
        return b
    if isinstance(b, Const) and (b.value > 0 or _is_int(p)):
        return Const(b.value ** p)
    if isinstance(b, Pow) and _is_int(p):
        return Pow(b.base, b.exponent * p) if _is_int(b.exponent) else Pow(b, p)
    return Pow(b, p)


def exp(a: Expr) -> Expr:
    a = _lift(a)
    if isinstance(a, Const):
        return Const(math.exp(a.value))
    return Exp(a)


def log(a: Expr) -> Expr:
    a = _lift(a)
    if isinstance(a, Const) and a.value > 0:
        return Const(math.log(a.value))
    return Log(a)


# --- rewriting helpers --------------------------------------------------------

def substitute(e: Expr, mapping: dict[int, Expr]) -> Expr:
    """Replace variables by expressions (composition)."""
    if isinstance(e, Var):
        return mapping.get(e.index, e)
    if isinstance(e, Const):
        return e
    if isinstance(e, Add):
        return add(*(substitute(t, mapping) for t in e.terms))
    if isinstance(e, Mul):
        return mul(*(substitute(t, mapping) for t in e.factors))
    if isinstance(e, Sub):
        return sub(substitute(e.left, mapping), substitute(e.right, mapping))
    if isinstance(e, Neg):
        return neg(substitute(e.arg, mapping))
    if isinstance(e, Div):
        return div(substitute(e.num, mapping), substitute(e.den, mapping))
    if isinstance(e, Pow):
        return power(substitute(e.base, mapping), e.exponent)
    if isinstance(e, Exp):
        return exp(substitute(e.arg, mapping))
    if isinstance(e, Log):
        return log(substitute(e.arg, mapping))
    if isinstance(e, Callback):
        return Callback(e.name, substitute(e.arg, mapping))
    if isinstance(e, Primitive):
        return Primitive(e.integrand, e.lo, e.hi, substitute(e.arg, mapping))
    raise TypeError(f"cannot substitute into {type(e).__name__}")


def as_affine(e: Expr, i: int = 0) -> tuple[float, float] | None:
    """Return ``(p, q)`` when ``e == p * x_i + q`` structurally, else None."""
    if isinstance(e, Const):
        return (0.0, e.value)
    if isinstance(e, Var):
        return (1.0, 0.0) if e.index == i else None
    if isinstance(e, Add):
        p = q = 0.0
        for t in e.terms:
            r = as_affine(t, i)
            if r is None:
                return None
            p, q = p + r[0], q + r[1]
        return (p, q)
    if isinstance(e, Sub):
        a, b = as_affine(e.left, i), as_affine(e.right, i)
        if a is None or b is None:
            return None
        return (a[0] - b[0], a[1] - b[1])
    if isinstance(e, Neg):
        a = as_affine(e.arg, i)
        return None if a is None else (-a[0], -a[1])
    if isinstance(e, Mul):
        p, q = 0.0, 1.0
        seen_linear = False
        for f in e.factors:
            r = as_affine(f, i)
            if r is None:
                return None
            if r[0] != 0.0:
                if seen_linear:
                    return None
                seen_linear = True
                p, q = q * r[0] + p * r[1], q * r[1]
            else:
                p, q = p * r[1], q * r[1]
        return (p, q)
    if isinstance(e, Div):
        a, b = as_affine(e.num, i), as_affine(e.den, i)
        if a is None or b is None or b[0] != 0.0 or b[1] == 0.0:
            return None
        return (a[0] / b[1], a[1] / b[1])
    if isinstance(e, Pow) and e.exponent == 1.0:
        return as_affine(e.base, i)
    return None


def closed_form_inverse(e: Expr, y):
    """Solve ``e(x) = y`` by peeling invertible primitives; None if impossible.

    Even integer powers return the positive branch; callers check the result.
    """
    target = _asfloat(y)
    node = e
    with np.errstate(all="ignore"):
        while True:
            if isinstance(node, Var):
                return target
            if isinstance(node, Add):
                rest = [t for t in node.terms if t.variables()]
                if len(rest) != 1:
                    return None
                c = sum(t.ev(()) for t in node.terms if not t.variables())
                target, node = target - c, rest[0]
            elif isinstance(node, Sub):
                if not node.right.variables():
                    target, node = target + node.right.ev(()), node.left
                elif not node.left.variables():
                    target, node = node.left.ev(()) - target, node.right
                else:
                    return None
            elif isinstance(node, Neg):
                target, node = -target, node.arg
            elif isinstance(node, Mul):
                rest = [f for f in node.factors if f.variables()]
                if len(rest) != 1:
                    return None
                c = 1.0
                for f in node.factors:
                    if not f.variables():
                        c = c * f.ev(())
                target, node = target / c, rest[0]
            elif isinstance(node, Div):
                if not node.den.variables():
                    target, node = target * node.den.ev(()), node.num
                elif not node.num.variables():
                    target, node = node.num.ev(()) / target, node.den
                else:
                    return None
            elif isinstance(node, Pow):
                p = node.exponent
                if _is_int(p) and int(p) % 2 != 0:
                    target = np.sign(target) * np.abs(target) ** (1.0 / p)
                else:
                    target = np.where(target > 0, np.abs(target) ** (1.0 / p), np.nan)
                node = node.base
            elif isinstance(node, Exp):
                target, node = np.where(target > 0, np.log(np.abs(target)), np.nan), node.arg
            elif isinstance(node, Log):
                target, node = np.exp(target), node.arg
            elif isinstance(node, Callback):
                inv = _REGISTRY[node.name].inverse
                if inv is None:
                    return None
                target, node = _asfloat(inv(target)), node.arg
            else:
                return None


# --- parser ---------------------------------------------------------------------

_TOKEN = re.compile(r"\(|\)|[^\s()]+")
_NARY = {"add": (Add, "terms"), "mul": (Mul, "factors")}


def _number(tok: str) -> float | None:
    try:
        return float(tok)
    except ValueError:
        return None


def parse(text: str) -> Expr:
    """Parse the prefix text form. ``x`` is variable 0; ``xK`` is variable K-1."""
    tokens = _TOKEN.findall(text)
    if not tokens:
        raise ValueError("empty expression")
    pos = 0

    def atom(tok: str) -> Expr:
        v = _number(tok)
        if v is not None:
            return Const(v)
        if tok == "x":
            return Var(0, "x")
        m = re.fullmatch(r"x(\d+)", tok)
        if m and int(m.group(1)) >= 1:
            return Var(int(m.group(1)) - 1)
        raise ValueError(f"unknown symbol {tok!r}")

    def number() -> float:
        nonlocal pos
        tok = tokens[pos]
        v = _number(tok)
        if v is None:
            raise ValueError(f"expected a number, got {tok!r}")
        pos += 1
        return v

    def node() -> Expr:
        nonlocal pos
        if pos >= len(tokens):
            raise ValueError("unexpected end of expression")
        tok = tokens[pos]
        pos += 1
        if tok == ")":
            raise ValueError("unexpected ')'")
        if tok != "(":
            return atom(tok)
        op = tokens[pos]
        pos += 1
        if op in _NARY:
            args = []
            while tokens[pos] != ")":
                args.append(node())
            if len(args) < 2:
                raise ValueError(f"{op} needs at least two arguments")
            cls, _ = _NARY[op]
            out = cls(tuple(args))
        elif op == "sub":
            out = Sub(node(), node())
        elif op == "div":
            out = Div(node(), node())
        elif op == "neg":
            out = Neg(node())
        elif op == "exp":
            out = Exp(node())
        elif op == "log":
            out = Log(node())
        elif op == "pow":
            b = node()
            out = Pow(b, number())
        elif op == "call":
            name = tokens[pos]
            pos += 1
            out = Callback(name, node())
        elif op == "prim":
            integrand = node()
            lo = number()
            hi = number()
            out = Primitive(integrand, lo, hi, node())
        else:
            raise ValueError(f"unknown operator {op!r}")
        if pos >= len(tokens) or tokens[pos] != ")":
            raise ValueError(f"expected ')' after {op}")
        pos += 1
        return out

    try:
        e = node()
    except IndexError:
        raise ValueError(f"unbalanced expression: {text!r}") from None
    if pos != len(tokens):
        raise ValueError(f"trailing tokens in {text!r}")
    return e
