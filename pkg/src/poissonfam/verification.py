"""Numerical certification of the Poisson axioms at sample points."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import expr as E
from .family import PoissonFamilySpec, structure_matrix
from .numdiff import fd_gradient, fd_partials

__all__ = [
    "JacobiResidual",
    "bracket",
    "gradient",
    "jacobi_residual",
    "rank_at",
    "RANK_RTOL",
]

RANK_RTOL = 1e-10


def gradient(f, x, box=None) -> np.ndarray:
    """Gradient of an expression (symbolic) or a vectorized callable (central differences)."""
    x = np.asarray(x, dtype=float)
    if isinstance(f, E.Expr):
        n = x.shape[-1]
        cols = [np.broadcast_to(np.asarray(f.diff(i).at(x), dtype=float), x.shape[:-1]) for i in range(n)]
        return np.stack(cols, axis=-1)
    return fd_gradient(f, x, box)


def bracket(spec: PoissonFamilySpec, f, g, x, check: bool = True):
    """``{f, g}(x) = grad f . J . grad g``."""
    x = np.asarray(x, dtype=float)
    J = structure_matrix(spec, x, check=check).entries
    gf = gradient(f, x, spec.box)
    gg = gradient(g, x, spec.box)
    out = np.einsum("...i,...ij,...j->...", gf, J, gg)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class JacobiResidual:
    """Jacobi residuals ``R[i, j, k]`` at one point or a batch.

    ``scale`` is the larger of ``max |J|`` and ``max |dJ|`` at each point, so
    ``max_abs / scale`` is the dimensionless figure compared against tolerances.
    """

    point: np.ndarray
    R: np.ndarray
    max_abs: float | np.ndarray
    scale: float | np.ndarray
    one_sided: bool = False

    @property
    def relative(self):
        return self.max_abs / self.scale


def _spec_matrix(spec: PoissonFamilySpec):
    return lambda pts: structure_matrix(spec, pts, check=False).entries


def jacobi_residual(
    spec: PoissonFamilySpec | None,
    x,
    structure: Callable[[np.ndarray], np.ndarray] | None = None,
) -> JacobiResidual:
    """Residual of the Jacobi identities with ``dJ`` from central differences.

    ``structure`` overrides the matrix field (a vectorized map ``(m, n) ->
    (m, n, n)``), which lets non-family matrices be checked; ``spec`` may then
    be None.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    box = None
    if spec is not None:
        spec.require(pts)
        box = spec.box
    field = structure if structure is not None else _spec_matrix(spec)
    J = field(pts)
    dJ, flagged = fd_partials(field, pts, box)  # dJ[:, l, a, b] = d_l J_ab
    R = (
        np.einsum("mli,mljk->mijk", J, dJ)
        + np.einsum("mlj,mlki->mijk", J, dJ)
        + np.einsum("mlk,mlij->mijk", J, dJ)
    )
    max_abs = np.max(np.abs(R), axis=(1, 2, 3))
    scale = np.maximum(np.max(np.abs(J), axis=(1, 2)), np.max(np.abs(dJ), axis=(1, 2, 3)))
    scale = np.maximum(scale, np.finfo(float).tiny)
    if single:
        return JacobiResidual(x, R[0], float(max_abs[0]), float(scale[0]), flagged)
    return JacobiResidual(pts, R, max_abs, scale, flagged)


def matrix_rank(J: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray | int:
    """Singular-value rank with threshold ``rtol * sigma_max`` (0 for the zero matrix)."""
    s = np.linalg.svd(np.asarray(J, dtype=float), compute_uv=False)
    top = s[..., :1]
    r = np.sum((s > rtol * top) & (top > 0), axis=-1)
    return int(r) if np.ndim(r) == 0 else r


def rank_at(spec: PoissonFamilySpec, x, check: bool = True):
    """Numerical rank of ``J(x)``."""
    return matrix_rank(structure_matrix(spec, x, check=check).entries)
