"""Factories for the worked example systems and the quasimonomial machinery.

Default boxes place ``psi_i`` in ``(i + 0.55, i + 1.45)`` (0-based ``i``), so
the psi-values of different axes never meet and every ``omega_ij`` keeps one
sign on the box.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import expr as E
from .family import AxisSpec, PoissonFamilySpec
from .darboux import CasimirSet, casimir_eval
from .dynamics import PoissonSystem
from .scalar import IntervalBox

__all__ = [
    "CATALOG",
    "QPTransform",
    "build",
    "circle_map_casimirs",
    "lv3_field",
    "lv3_hamiltonian",
    "make_circle_maps",
    "make_lv3",
    "make_nlv",
    "make_qp_lv",
    "nlv_alpha",
    "qp_field",
    "qp_pullback_check",
    "random_nlv_coefficients",
]

CATALOG = ("lv3", "qp-lv3", "circle-maps", "nlv")


def _psi_targets(n: int) -> list[tuple[float, float]]:
    return [(i + 0.55, i + 1.45) for i in range(n)]


def _box(box) -> IntervalBox:
    return box if isinstance(box, IntervalBox) else IntervalBox(tuple(tuple(map(float, b)) for b in box))


def _x(k: int) -> E.Expr:
    return E.var(k)


def _identity_axes(box: IntervalBox, a: Sequence[float] | None = None) -> tuple[AxisSpec, ...]:
    t = E.var(0, "x")
    a = [1.0] * len(box) if a is None else a
    return tuple(AxisSpec.from_phi(t, float(ak), box.axis(k)) for k, ak in enumerate(a))


def _positive(box: IntervalBox, what: str) -> None:
    if np.any(box.lower < 0):
        raise ValueError(f"{what} needs a box inside the positive orthant")


# -- Lotka-Volterra in three dimensions ------------------------------------------
def lv3_hamiltonian(k: float = 0.5, powers: Sequence[E.Expr] | None = None) -> E.Expr:
    """``log[(u3/(u1 u2) (u1-u2)^2)^(-k) (u1/(u2 u3) (u2-u3)^2)^(k-1)]`` with ``u = powers``."""
    u1, u2, u3 = powers if powers is not None else (_x(0), _x(1), _x(2))
    first = E.mul(E.div(u3, E.mul(u1, u2)), E.power(E.sub(u1, u2), 2))
    second = E.mul(E.div(u1, E.mul(u2, u3)), E.power(E.sub(u2, u3), 2))
    return E.log(E.mul(E.power(first, -float(k)), E.power(second, float(k) - 1.0)))


def lv3_field(x) -> np.ndarray:
    """``x_i (x_j + x_k)`` over the other two indices."""
    x = np.asarray(x, dtype=float)
    s = x.sum(axis=-1, keepdims=True)
    return x * (s - x)


def make_lv3(k: float = 0.5, box=None, omega_sign: int | None = None, **kw) -> PoissonSystem:
    """The integrable three-species system with ``J_ij = x_i x_j (x_i - x_j)``."""
    box = _box(box if box is not None else _psi_targets(3))
    _positive(box, "lv3")
    spec = PoissonFamilySpec(
        n=3, eta=E.const(1.0), axes=_identity_axes(box), box=box, omega_sign=omega_sign, name="lv3", **kw
    )
    return PoissonSystem(spec, lv3_hamiltonian(k), override=lv3_field, name="lv3", params={"k": float(k)})


# -- quasi-polynomial generalization --------------------------------------------
@dataclass(frozen=True)
class QPTransform:
    """``x_i = y_i^c_i`` with the companion time change ``dtau = dt / prod(c_i y_i^(c_i-1))``."""

    c: tuple[float, float, float]

    def __post_init__(self):
        c = tuple(float(v) for v in self.c)
        if len(c) != 3:
            raise ValueError("three exponents expected")
        if any(v == 0 for v in c):
            raise ValueError(f"exponents must be nonzero, got {c}")
        object.__setattr__(self, "c", c)

    @property
    def is_identity(self) -> bool:
        return self.c == (1.0, 1.0, 1.0)

    def to_x(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) ** np.array(self.c)

    def to_y(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) ** (1.0 / np.array(self.c))

    def time_factor(self, y) -> np.ndarray:
        """``prod_i c_i y_i^(c_i - 1)``."""
        c = np.array(self.c)
        return np.prod(c * np.asarray(y, dtype=float) ** (c - 1.0), axis=-1)

    def pull_back(self, field, y) -> np.ndarray:
        """Carry an ``x``-field to ``dy/dtau`` through the transform and the time change."""
        y = np.asarray(y, dtype=float)
        c = np.array(self.c)
        dxdy = c * y ** (c - 1.0)
        return self.time_factor(y)[..., None] * field(self.to_x(y)) / dxdy


def qp_field(c: Sequence[float], y) -> np.ndarray:
    """Explicit right-hand side of the quasi-polynomial flow."""
    c1, c2, c3 = (float(v) for v in c)
    y = np.asarray(y, dtype=float)
    y1, y2, y3 = y[..., 0], y[..., 1], y[..., 2]
    u1, u2, u3 = y1**c1, y2**c2, y3**c3
    return np.stack(
        [
            c2 * c3 * u1 * y2 ** (c2 - 1) * y3 ** (c3 - 1) * (u2 + u3),
            c1 * c3 * y1 ** (c1 - 1) * u2 * y3 ** (c3 - 1) * (u1 + u3),
            c1 * c2 * y1 ** (c1 - 1) * y2 ** (c2 - 1) * u3 * (u1 + u2),
        ],
        axis=-1,
    )


def qp_pullback_check(c: Sequence[float], y) -> float:
    """Relative gap between the pulled-back three-species field and :func:`qp_field` at ``y``."""
    tr = QPTransform(tuple(c))
    a = tr.pull_back(lv3_field, y)
    b = qp_field(tr.c, y)
    num = np.max(np.abs(a - b))
    return 0.0 if num == 0 else float(num / max(np.max(np.abs(a)), np.max(np.abs(b))))


def make_qp_lv(c: Sequence[float] = (1.0, 1.0, 1.0), k: float = 0.5, box=None, omega_sign=None, **kw) -> PoissonSystem:
    """Quasi-polynomial family member: ``eta = prod c_i y_i^(c_i-1)``, ``phi_i = y_i/c_i``, ``psi_i = y_i^c_i``."""
    tr = QPTransform(tuple(c))
    if box is None:
        bounds = []
        for (lo, hi), ci in zip(_psi_targets(3), tr.c):
            ends = sorted((lo ** (1.0 / ci), hi ** (1.0 / ci)))
            bounds.append(tuple(ends))
        box = bounds
    box = _box(box)
    _positive(box, "qp-lv3")
    t = E.var(0, "x")
    axes = tuple(
        AxisSpec.from_phi(E.div(t, E.const(ci)), 1.0, box.axis(i)) for i, ci in enumerate(tr.c)
    )
    c1, c2, c3 = tr.c
    eta = E.mul(E.const(c1 * c2 * c3), *[E.power(_x(i), ci - 1.0) for i, ci in enumerate(tr.c)])
    powers = [E.power(_x(i), ci) for i, ci in enumerate(tr.c)]
    spec = PoissonFamilySpec(n=3, eta=eta, axes=axes, box=box, omega_sign=omega_sign, name="qp-lv3", **kw)
    return PoissonSystem(
        spec,
        lv3_hamiltonian(k, powers),
        override=lambda y: qp_field(tr.c, y),
        name="qp-lv3",
        params={"c": list(tr.c), "k": float(k)},
    )


# -- circle maps ------------------------------------------------------------------
def make_circle_maps(box=None, pair: tuple[int, int] = (0, 1), **kw) -> PoissonFamilySpec:
    """``J_ij = eta x_i x_j (x_i - x_j)`` with ``eta = -1/((x1-x2)(x2-x3)(x3-x1))``.

    No Hamiltonian comes with this structure; pair it with one explicitly via
    :class:`PoissonSystem`.
    """
    box = _box(box if box is not None else ((0.0, 1.0), (2.0, 3.0), (4.0, 5.0)))
    for a in range(3):
        lo, hi = box.axis(a)
        if lo < 0 < hi:
            raise ValueError(f"axis {a + 1} of the box contains 0")
        for b in range(a + 1, 3):
            lo2, hi2 = box.axis(b)
            if max(lo, lo2) < min(hi, hi2):
                raise ValueError(f"axes {a + 1} and {b + 1} overlap, so x{a + 1} = x{b + 1} is possible")
    x1, x2, x3 = _x(0), _x(1), _x(2)
    eta = E.neg(E.div(E.const(1.0), E.mul(E.sub(x1, x2), E.sub(x2, x3), E.sub(x3, x1))))
    return PoissonFamilySpec(
        n=3, eta=eta, axes=_identity_axes(box), box=box, pair=pair, name="circle-maps", **kw
    )


def circle_map_casimirs(spec: PoissonFamilySpec) -> dict[str, callable]:
    """The three Casimir forms ``C1, C2, C3`` (each from the cyclic pair not containing it)."""
    out = {}
    for k, pair in ((0, (1, 2)), (1, (2, 0)), (2, (0, 1))):
        cs = CasimirSet(spec, pair)
        out[f"C{k + 1}"] = lambda x, cs=cs, k=k: casimir_eval(cs, k, x)
    return out


# -- n-dimensional quadratic Lotka-Volterra --------------------------------------
def nlv_alpha(a: Sequence[float], b: Sequence[float]) -> np.ndarray:
    """Interaction matrix: ``a_i sum_{k != i} b_k`` on the diagonal, ``-a_j b_j`` off it."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    alpha = np.tile(-(a * b), (a.size, 1))
    np.fill_diagonal(alpha, a * (b.sum() - b))
    return alpha


def random_nlv_coefficients(n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """``a ~ U(0.5, 2)``, ``b ~ U(-1, 1)`` from a seeded generator."""
    rng = np.random.default_rng(seed)
    return rng.uniform(0.5, 2.0, n), rng.uniform(-1.0, 1.0, n)


def make_nlv(
    n: int,
    a: Sequence[float] | None = None,
    b: Sequence[float] | None = None,
    box=None,
    omega_sign: int | None = None,
    **kw,
) -> PoissonSystem:
    """``J_ij = x_i x_j (a_i x_i - a_j x_j)`` with ``H = sum b_i log x_i``."""
    if n < 3:
        raise ValueError("nlv needs n >= 3")
    a = np.ones(n) if a is None else np.asarray(a, dtype=float)
    b = np.ones(n) if b is None else np.asarray(b, dtype=float)
    if a.shape != (n,) or b.shape != (n,):
        raise ValueError(f"a and b need {n} entries")
    if np.any(a == 0):
        raise ValueError("every a_i must be nonzero")
    if box is None:
        box = [(lo / abs(ai), hi / abs(ai)) for (lo, hi), ai in zip(_psi_targets(n), a)]
    box = _box(box)
    _positive(box, "nlv")
    spec = PoissonFamilySpec(
        n=n, eta=E.const(1.0), axes=_identity_axes(box, a), box=box, omega_sign=omega_sign, name="nlv", **kw
    )
    H = E.add(*[E.mul(E.const(float(bi)), E.log(_x(i))) for i, bi in enumerate(b)]) if n > 1 else None
    alpha = nlv_alpha(a, b)
    return PoissonSystem(
        spec,
        H,
        override=lambda x: np.asarray(x) * (np.asarray(x) @ alpha.T),
        name="nlv",
        params={"n": n, "a": a.tolist(), "b": b.tolist()},
    )


def build(name: str, **params):
    """Catalog lookup by stable name; returns a system (or a bare spec for circle-maps)."""
    params = {k: v for k, v in params.items() if v is not None}
    if name == "lv3":
        return make_lv3(**params)
    if name == "qp-lv3":
        return make_qp_lv(**params)
    if name == "circle-maps":
        return make_circle_maps(**params)
    if name == "nlv":
        return make_nlv(**params)
    raise KeyError(f"unknown catalog system {name!r}; known: {', '.join(CATALOG)}")
