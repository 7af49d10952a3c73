"""Scalar-field operations: evaluation, derivatives, psi from phi, inversion."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from . import expr as E
from .errors import DomainError, HypothesisError, NoRootError, NotMonotoneError

__all__ = [
    "IntervalBox",
    "evaluate",
    "derivative",
    "psi_from_phi",
    "phi_from_psi",
    "inverse",
    "interior_samples",
]


@dataclass(frozen=True)
class IntervalBox:
    """Product of open intervals ``(lo, hi)``; bounds may be infinite."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if not bounds:
            raise ValueError("IntervalBox needs at least one axis")
        for k, (lo, hi) in enumerate(bounds):
            if math.isnan(lo) or math.isnan(hi) or not lo < hi:
                raise ValueError(f"axis {k + 1}: need lo < hi, got ({lo}, {hi})")
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def of(cls, *bounds: Sequence[float]) -> "IntervalBox":
        return cls(tuple(tuple(b) for b in bounds))

    def __len__(self) -> int:
        return len(self.bounds)

    def axis(self, k: int) -> tuple[float, float]:
        return self.bounds[k]

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    def contains(self, x) -> np.ndarray | bool:
        """Strict membership; vectorized over leading axes of ``x``."""
        x = np.asarray(x, dtype=float)
        inside = np.all((x > self.lower) & (x < self.upper), axis=-1)
        return bool(inside) if np.ndim(inside) == 0 else inside

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        """Map points of the open unit cube into the box (tan map on infinite sides)."""
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        for k, (lo, hi) in enumerate(self.bounds):
            t = u[..., k]
            if math.isfinite(lo) and math.isfinite(hi):
                out[..., k] = lo + (hi - lo) * t
            elif math.isfinite(lo):
                out[..., k] = lo + np.tan(0.5 * np.pi * t)
            elif math.isfinite(hi):
                out[..., k] = hi - np.tan(0.5 * np.pi * (1.0 - t))
            else:
                out[..., k] = np.tan(np.pi * (t - 0.5))
        return out

    def to_list(self) -> list[list[float]]:
        return [[lo, hi] for lo, hi in self.bounds]


def interior_samples(interval: tuple[float, float], count: int = 101) -> np.ndarray:
    """Deterministic points strictly inside an open interval."""
    lo, hi = interval
    u = (np.arange(count) + 0.5) / count
    return IntervalBox(((lo, hi),)).from_unit(u[:, None])[:, 0]


def evaluate(f: E.Expr, x):
    """Value of a one-variable expression at ``x``."""
    return f(x)


def derivative(f: E.Expr) -> E.Expr:
    return f.diff(0)


def _nonvanishing_sign(f: E.Expr, interval: tuple[float, float], what: str) -> float:
    xs = interior_samples(interval)
    try:
        v = np.broadcast_to(f(xs), xs.shape)
    except DomainError as exc:
        raise DomainError(f"{what} undefined on {interval}: {exc}") from exc
    if not np.all(np.isfinite(v)) or np.any(v == 0):
        raise HypothesisError(f"{what} vanishes or is not finite on {interval}")
    s = np.sign(v)
    if not np.all(s == s[0]):
        raise HypothesisError(f"{what} changes sign on {interval}")
    return float(s[0])


def _as_monomial(e: E.Expr) -> tuple[float, float] | None:
    """``k * x**m`` with ``m`` not in {0, 1} -> ``(k, m)``."""
    k = 1.0
    node = e
    if isinstance(node, E.Mul):
        rest = [f for f in node.factors if f.variables()]
        if len(rest) != 1:
            return None
        for f in node.factors:
            if not f.variables():
                k *= float(f.ev(()))
        node = rest[0]
    elif isinstance(node, E.Div) and not node.den.variables():
        k, node = 1.0 / float(node.den.ev(())), node.num
    if isinstance(node, E.Pow) and isinstance(node.base, E.Var) and node.base.index == 0:
        if node.exponent not in (0.0, 1.0):
            return (k, node.exponent)
    return None


def _as_exponential(e: E.Expr) -> tuple[float, float, float] | None:
    """``k * exp(p*x + q)`` -> ``(k, p, q)``."""
    k = 1.0
    node = e
    if isinstance(node, E.Mul):
        rest = [f for f in node.factors if f.variables()]
        if len(rest) != 1:
            return None
        for f in node.factors:
            if not f.variables():
                k *= float(f.ev(()))
        node = rest[0]
    if isinstance(node, E.Exp):
        aff = E.as_affine(node.arg)
        if aff is not None and aff[0] != 0.0:
            return (k, aff[0], aff[1])
    return None


def psi_from_phi(phi: E.Expr, a: float, interval: tuple[float, float]) -> E.Expr:
    """``a * exp(P(x))`` with ``P`` a primitive of ``1/phi`` on ``interval``.

    Recognized shapes of ``phi`` get their canonical primitive in closed form:

    * constant ``c``: ``P = x/c``
    * affine ``p*x + q``: ``P = log|x + q/p| / p``, so ``psi = a*|x+q/p|**(1/p)``
    * monomial ``k*x**m``: ``P = x**(1-m) / (k*(1-m))``
    * exponential ``k*exp(p*x+q)``: ``P = -exp(-(p*x+q)) / (k*p)``

    Anything else gets a quadrature-tabulated primitive anchored at the
    interval midpoint (1.0 on ``(0, inf)``).
    """
    a = float(a)
    if a == 0.0:
        raise ValueError("psi_from_phi: the constant a must be nonzero")
    if phi.variables() - {0}:
        raise ValueError("phi must be a function of a single variable")
    _nonvanishing_sign(phi, interval, f"phi = {phi.to_text()}")
    x = E.Var(0, "x")

    aff = E.as_affine(phi)
    if aff is not None:
        p, q = aff
        if p == 0.0:
            return E.mul(E.const(a), E.exp(E.mul(E.const(1.0 / q), x)))
        # log|x + q/p| / p is the canonical primitive (no log|p| offset)
        lin = E.add(x, E.const(q / p))
        s = _nonvanishing_sign(lin, interval, "affine phi")
        base = lin if s > 0 else E.neg(lin)
        return E.mul(E.const(a), E.power(base, 1.0 / p))

    mono = _as_monomial(phi)
    if mono is not None:
        k, m = mono
        expo = E.mul(E.const(1.0 / (k * (1.0 - m))), E.power(x, 1.0 - m))
        return E.mul(E.const(a), E.exp(expo))

    ex = _as_exponential(phi)
    if ex is not None:
        k, p, q = ex
        inner = E.add(E.mul(E.const(-p), x), E.const(-q))
        return E.mul(E.const(a), E.exp(E.mul(E.const(-1.0 / (k * p)), E.exp(inner))))

    lo, hi = interval
    integrand = E.div(E.const(1.0), phi)
    return E.mul(E.const(a), E.exp(E.Primitive(integrand, lo, hi, x)))


def phi_from_psi(psi: E.Expr) -> E.Expr:
    """``phi = psi / psi'``, the inverse construction."""
    return E.div(psi, psi.diff(0))


_EPS = np.finfo(float).eps


def _nudged(f: E.Expr, x: float, inward: float) -> tuple[float, float]:
    """Evaluate ``f`` at ``x``, stepping inward when ``x`` is not admissible."""
    step = 0.0
    for _ in range(60):
        try:
            v = f(x + step)
            if np.isfinite(v):
                return x + step, float(v)
        except DomainError:
            pass
        step = inward * max(abs(x), 1.0) * _EPS * 16 if step == 0.0 else step * 4.0
    raise DomainError(f"{f.to_text()} cannot be evaluated near bracket endpoint {x}")


def inverse(f: E.Expr, y: float, bracket: tuple[float, float]) -> float:
    """Return ``x`` in ``bracket`` with ``f(x) = y``.

    The closed-form inverse is tried first; otherwise Brent's method runs on the
    bracket, followed by Newton polishing so that
    ``|f(x) - y| <= 1e-12 * max(1, |y|)`` wherever floating point allows.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise ValueError(f"bad bracket ({lo}, {hi})")
    y = float(y)
    tol = 1e-12 * max(1.0, abs(y))

    x_cf = E.closed_form_inverse(f, y)
    if x_cf is not None:
        x_cf = float(x_cf)
        if math.isfinite(x_cf) and lo <= x_cf <= hi:
            try:
                if abs(f(x_cf) - y) <= max(tol, 1e-10 * max(1.0, abs(y))):
                    return x_cf
            except DomainError:
                pass

    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("root finding needs a finite bracket")
    df = f.diff(0)
    xa, fa = _nudged(f, lo, +1.0)
    xb, fb = _nudged(f, hi, -1.0)
    da = float(df(xa))
    db = float(df(xb))
    if da == 0 or db == 0 or np.sign(da) != np.sign(db):
        raise NotMonotoneError(f"{f.to_text()} is not strictly monotone on ({lo}, {hi})")
    ya, yb = min(fa, fb), max(fa, fb)
    if not ya <= y <= yb:
        raise NoRootError(f"{y!r} outside the image [{ya!r}, {yb!r}] of ({lo}, {hi})")
    if fa == y:
        return xa
    if fb == y:
        return xb
    x = brentq(lambda t: f(t) - y, xa, xb, xtol=1e-300, rtol=4 * _EPS, maxiter=500)
    for _ in range(3):
        r = f(x) - y
        if abs(r) <= tol:
            break
        d = float(df(x))
        if d == 0:
            break
        xn = x - r / d
        if not xa <= xn <= xb:
            break
        if abs(f(xn) - y) >= abs(r):
            break
        x = xn
    return float(x)
