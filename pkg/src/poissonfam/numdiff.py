"""Central finite differences that respect an interval box."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .scalar import IntervalBox

__all__ = ["fd_step", "fd_partials", "fd_gradient"]

_CBRT_EPS = float(np.cbrt(np.finfo(float).eps))
_MAX_SHRINK = 8


def fd_step(x) -> np.ndarray:
    """``cbrt(eps) * max(1, |x|)``."""
    return _CBRT_EPS * np.maximum(1.0, np.abs(np.asarray(x, dtype=float)))


def fd_partials(
    f: Callable[[np.ndarray], np.ndarray],
    x,
    box: IntervalBox | None = None,
) -> tuple[np.ndarray, bool]:
    """Partial derivatives of a vectorized ``f`` at points ``x`` (shape ``(m, n)``).

    ``f`` maps ``(m, n)`` to ``(m, *out)``; the result has shape ``(m, n, *out)``
    with ``[:, l]`` the derivative along coordinate ``l``. Stencils that would
    leave ``box`` are shrunk, then replaced by second-order one-sided
    differences; the returned flag reports whether that happened.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    m, n = x.shape
    f0 = None
    flagged = False
    cols = []
    for l in range(n):
        h = fd_step(x[:, l])
        if box is not None:
            lo, hi = box.axis(l)
            for _ in range(_MAX_SHRINK):
                bad = (x[:, l] - h <= lo) | (x[:, l] + h >= hi)
                if not bad.any():
                    break
                h = np.where(bad, h / 2.0, h)
            fwd_ok = x[:, l] + 2 * h < hi
            bwd_ok = x[:, l] - 2 * h > lo
            central = (x[:, l] - h > lo) & (x[:, l] + h < hi)
        else:
            central = np.ones(m, dtype=bool)
            fwd_ok = bwd_ok = central
        e = np.zeros(n)
        e[l] = 1.0
        col = None
        idx = np.flatnonzero(central)
        if idx.size:
            hp = h[idx][:, None]
            d = (f(x[idx] + hp * e) - f(x[idx] - hp * e))
            d = d / (2.0 * h[idx].reshape((-1,) + (1,) * (d.ndim - 1)))
            col = np.zeros((m,) + d.shape[1:])
            col[idx] = d
        rest = np.flatnonzero(~central)
        if rest.size:
            flagged = True
            if f0 is None:
                f0 = f(x)
            for sgn, ok in ((1.0, fwd_ok), (-1.0, bwd_ok)):
                sel = rest[ok[rest]]
                if not sel.size:
                    continue
                hs = (sgn * h[sel])[:, None]
                f1 = f(x[sel] + hs * e)
                f2 = f(x[sel] + 2 * hs * e)
                d = (-3.0 * f0[sel] + 4.0 * f1 - f2)
                d = d / (2.0 * (sgn * h[sel]).reshape((-1,) + (1,) * (d.ndim - 1)))
                if col is None:
                    col = np.zeros((m,) + d.shape[1:])
                col[sel] = d
                rest = rest[~ok[rest]]
            if rest.size:
                raise ValueError("box too thin for a finite-difference stencil")
        cols.append(col)
    return np.stack(cols, axis=1), flagged


def fd_gradient(f: Callable[[np.ndarray], np.ndarray], x, box: IntervalBox | None = None) -> np.ndarray:
    """Gradient of a scalar vectorized ``f``; shape ``(m, n)`` (or ``(n,)`` for one point)."""
    x = np.asarray(x, dtype=float)
    g, _ = fd_partials(f, np.atleast_2d(x), box)
    return g[0] if x.ndim == 1 else g
