"""Members of the family J_ij = eta(x) phi_i(x_i) phi_j(x_j) (psi_i(x_i) - psi_j(x_j)).

Indices in this API are 0-based; the text formats (``x1``, ``C3``) are 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expr as E
from .errors import DomainError, HypothesisError, NumericError
from .sampling import halton_points
from .scalar import IntervalBox, phi_from_psi, psi_from_phi

__all__ = [
    "AxisSpec",
    "PoissonFamilySpec",
    "StructureMatrixValue",
    "make_spec",
    "omega",
    "structure_matrix",
    "structure_matrix_alt",
]

CERTIFY_POINTS = 1000


@dataclass(frozen=True)
class AxisSpec:
    """One coordinate's defining data: ``psi``, ``phi = psi/psi'`` and ``psi'``.

    Build with :meth:`from_phi` (``psi`` is then the canonical ``a*exp(int 1/phi)``)
    or :meth:`from_psi`.
    """

    psi: E.Expr
    phi: E.Expr
    dpsi: E.Expr
    a: float | None = None
    source: str = "psi"

    @classmethod
    def from_phi(cls, phi: E.Expr, a: float, interval: tuple[float, float]) -> "AxisSpec":
        psi = psi_from_phi(phi, a, interval)
        return cls(psi=psi, phi=phi, dpsi=psi.diff(0), a=float(a), source="phi")

    @classmethod
    def from_psi(cls, psi: E.Expr) -> "AxisSpec":
        if psi.variables() - {0}:
            raise ValueError("psi must be a function of a single variable")
        return cls(psi=psi, phi=phi_from_psi(psi), dpsi=psi.diff(0), source="psi")

    def to_dict(self) -> dict:
        if self.source == "phi":
            return {"phi": self.phi.to_text(), "a": self.a}
        return {"psi": self.psi.to_text()}


@dataclass(frozen=True)
class StructureMatrixValue:
    """``J`` at ``point``; ``entries`` has shape ``(n, n)`` or ``(m, n, n)``."""

    point: np.ndarray
    entries: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


@dataclass(frozen=True, eq=False)
class PoissonFamilySpec:
    """Defining data of one family member, certified at construction.

    ``omega_sign`` (optional) restricts the domain to the part of ``box`` where
    ``omega_sign * omega_pair > 0``; without it the box alone must keep the
    distinguished difference away from zero.

    Construction samples ``certify_points`` scrambled-Halton points and rejects
    the spec unless eta, every phi_i, psi_i, psi_i' and the distinguished
    omega are finite, nonzero and of one sign on the sample.
    """

    n: int
    eta: E.Expr
    axes: tuple[AxisSpec, ...]
    box: IntervalBox
    pair: tuple[int, int] = (0, 1)
    omega_sign: int | None = None
    name: str = ""
    certify_points: int = CERTIFY_POINTS
    seed: int = 0
    signs: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        object.__setattr__(self, "pair", tuple(int(p) for p in self.pair))
        if not isinstance(self.box, IntervalBox):
            object.__setattr__(self, "box", IntervalBox(tuple(tuple(b) for b in self.box)))
        n = self.n
        if n < 2:
            raise ValueError(f"dimension must be at least 2, got {n}")
        if len(self.axes) != n or len(self.box) != n:
            raise ValueError(f"need {n} axes and a {n}-dimensional box")
        i, j = self.pair
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"bad distinguished pair {self.pair}")
        if self.omega_sign not in (None, 1, -1):
            raise ValueError("omega_sign must be +1, -1 or None")
        if any(v >= n for v in self.eta.variables()):
            raise ValueError(f"eta uses variables beyond x{n}")
        for k, ax in enumerate(self.axes):
            if ax.a is not None and ax.a == 0.0:
                raise ValueError(f"axis {k + 1}: a must be nonzero")
        if self.certify_points > 0:
            self._certify()

    # -- domain ---------------------------------------------------------------
    def contains(self, x) -> np.ndarray | bool:
        x = np.asarray(x, dtype=float)
        inside = np.asarray(self.box.contains(x))
        if self.omega_sign is not None:
            with np.errstate(all="ignore"):
                try:
                    w = self._omega_unchecked(*self.pair, x)
                except DomainError:
                    w = np.zeros(inside.shape)
                inside = inside & (self.omega_sign * np.asarray(w) > 0)
        return bool(inside) if np.ndim(inside) == 0 else inside

    def sample(self, count: int, seed: int | None = None) -> np.ndarray:
        """Scrambled-Halton points of the domain, shape ``(count, n)``."""
        seed = self.seed if seed is None else seed
        accept = None if self.omega_sign is None else self.contains
        return halton_points(self.box, count, seed, accept=accept)

    def _omega_unchecked(self, i, j, x):
        return self.axes[i].psi(x[..., i]) - self.axes[j].psi(x[..., j])

    def _certify(self) -> None:
        pts = self.sample(self.certify_points)
        signs = {}

        def check(label, v):
            v = np.broadcast_to(np.asarray(v, dtype=float), pts.shape[:1])
            if not np.all(np.isfinite(v)):
                raise NumericError(f"{label} is not finite at some sample point of the domain")
            if np.any(v == 0):
                raise HypothesisError(f"{label} vanishes at a sample point of the domain")
            s = np.sign(v[0])
            if not np.all(np.sign(v) == s):
                raise HypothesisError(f"{label} changes sign on the domain")
            signs[label] = int(s)

        try:
            check("eta", self.eta.at(pts))
            for k, ax in enumerate(self.axes):
                xk = pts[:, k]
                check(f"phi{k + 1}", ax.phi(xk))
                check(f"psi{k + 1}", ax.psi(xk))
                check(f"dpsi{k + 1}", ax.dpsi(xk))
            i, j = self.pair
            check(f"omega{i + 1}{j + 1}", self._omega_unchecked(i, j, pts))
        except DomainError as exc:
            raise HypothesisError(f"defining function undefined on the domain: {exc}") from exc
        self.signs.update(signs)

    # -- factor evaluation ------------------------------------------------------
    def require(self, x) -> np.ndarray:
        """Coerce ``x`` and reject points outside the domain."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError(f"expected points with {self.n} coordinates, got shape {x.shape}")
        inside = np.asarray(self.box.contains(x))
        if not np.all(inside):
            bad = x[~inside] if x.ndim > 1 else x
            raise DomainError(f"point {np.atleast_2d(bad)[0].tolist()} outside the domain box")
        if self.omega_sign is not None and not np.all(self.contains(x)):
            raise DomainError("point violates the distinguished-omega sign constraint")
        return x

    def factors(self, x, check: bool = True):
        """``(eta, phi, psi)`` at ``x``: shapes ``(...)``, ``(..., n)``, ``(..., n)``."""
        x = self.require(x) if check else np.asarray(x, dtype=float)
        eta = np.broadcast_to(np.asarray(self.eta.at(x), dtype=float), x.shape[:-1])
        phi = np.stack(
            [np.broadcast_to(ax.phi(x[..., k]), x.shape[:-1]) for k, ax in enumerate(self.axes)],
            axis=-1,
        )
        psi = np.stack(
            [np.broadcast_to(ax.psi(x[..., k]), x.shape[:-1]) for k, ax in enumerate(self.axes)],
            axis=-1,
        )
        if check:
            for label, v in (("eta", eta), ("phi", phi), ("psi", psi)):
                if not np.all(np.isfinite(v)):
                    raise NumericError(f"{label} is not finite at {x.tolist()}")
                if np.any(v == 0):
                    raise HypothesisError(f"{label} vanishes at {x.tolist()}")
            i, j = self.pair
            if np.any(psi[..., i] == psi[..., j]):
                raise HypothesisError(f"omega{i + 1}{j + 1} vanishes at {x.tolist()}")
        return eta, phi, psi

    # -- serialization ---------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "eta": self.eta.to_text(),
            "axes": [ax.to_dict() for ax in self.axes],
            "box": self.box.to_list(),
            "pair": [self.pair[0] + 1, self.pair[1] + 1],
            "omega_sign": self.omega_sign,
        }

    @classmethod
    def from_dict(cls, d: dict, **kw) -> "PoissonFamilySpec":
        n = int(d["n"])
        box = IntervalBox(tuple(tuple(b) for b in d["box"]))
        axes = []
        for k, ax in enumerate(d["axes"]):
            if "psi" in ax:
                axes.append(AxisSpec.from_psi(E.parse(ax["psi"])))
            else:
                axes.append(AxisSpec.from_phi(E.parse(ax["phi"]), float(ax.get("a", 1.0)), box.axis(k)))
        pair = tuple(p - 1 for p in d.get("pair", (1, 2)))
        return cls(
            n=n,
            eta=E.parse(str(d.get("eta", "1"))),
            axes=tuple(axes),
            box=box,
            pair=pair,
            omega_sign=d.get("omega_sign"),
            **kw,
        )


def omega(spec: PoissonFamilySpec, i: int, j: int, x, check: bool = True):
    """``psi_i(x_i) - psi_j(x_j)``."""
    x = spec.require(x) if check else np.asarray(x, dtype=float)
    if i == j:
        out = np.zeros(x.shape[:-1])
        return float(out) if out.ndim == 0 else out
    out = np.asarray(spec._omega_unchecked(i, j, x), dtype=float)
    return float(out) if out.ndim == 0 else out


def _assemble(x: np.ndarray, upper) -> StructureMatrixValue:
    n = x.shape[-1]
    J = np.zeros(x.shape[:-1] + (n, n))
    for i in range(n):
        for j in range(i + 1, n):
            v = upper(i, j)
            J[..., i, j] = v
            J[..., j, i] = -v
    return StructureMatrixValue(point=x, entries=J)


def structure_matrix(spec: PoissonFamilySpec, x, check: bool = True) -> StructureMatrixValue:
    """``J_ij = eta * phi_i * phi_j * (psi_i - psi_j)``; exactly skew, zero diagonal.

    With ``check=False`` the point is not tested against the domain or the
    nonvanishing hypotheses (used for degenerate test points and stencils).
    """
    x = np.asarray(x, dtype=float)
    eta, phi, psi = spec.factors(x, check=check)
    return _assemble(
        x, lambda i, j: eta * phi[..., i] * phi[..., j] * (psi[..., i] - psi[..., j])
    )


def structure_matrix_alt(spec: PoissonFamilySpec, x, check: bool = True) -> StructureMatrixValue:
    """Same matrix written through psi and psi' only: ``eta*psi_i*psi_j/(psi_i'*psi_j')*(psi_i-psi_j)``."""
    x = np.asarray(x, dtype=float)
    eta, _, psi = spec.factors(x, check=check)
    dpsi = np.stack(
        [np.broadcast_to(ax.dpsi(x[..., k]), x.shape[:-1]) for k, ax in enumerate(spec.axes)],
        axis=-1,
    )
    if np.any(dpsi == 0):
        raise NumericError(f"psi' vanishes at {x.tolist()}")
    return _assemble(
        x,
        lambda i, j: eta * (psi[..., i] * psi[..., j] / (dpsi[..., i] * dpsi[..., j]))
        * (psi[..., i] - psi[..., j]),
    )


def make_spec(
    eta: E.Expr | str,
    axes: Sequence[AxisSpec],
    box: IntervalBox | Sequence[Sequence[float]],
    **kw,
) -> PoissonFamilySpec:
    """Convenience constructor taking text or trees."""
    if isinstance(eta, str):
        eta = E.parse(eta)
    if not isinstance(box, IntervalBox):
        box = IntervalBox(tuple(tuple(b) for b in box))
    return PoissonFamilySpec(n=len(axes), eta=eta, axes=tuple(axes), box=box, **kw)
