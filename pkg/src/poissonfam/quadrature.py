"""Vectorized adaptive Simpson quadrature."""

from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = ["adaptive_simpson", "cumulative_simpson"]

_MAX_DEPTH = 40


def _simpson(fa, fm, fb, width):
    return width / 6.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(
    f: Callable[[np.ndarray], np.ndarray],
    a: np.ndarray | float,
    b: np.ndarray | float,
    tol: float = 1e-13,
) -> np.ndarray:
    """Integrate ``f`` over each segment ``[a[k], b[k]]`` independently.

    ``f`` must accept and return 1-D arrays. Segments that fail the Richardson
    test are bisected with half the tolerance until ``_MAX_DEPTH``.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    a, b = np.broadcast_arrays(a, b)
    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    whole = _simpson(fa, fm, fb, b - a)
    tols = np.full(a.shape, tol) * np.maximum(1.0, np.abs(whole))
    out = np.zeros(a.shape)
    owner = np.arange(a.size)

    # each work item: (a, m, b, fa, fm, fb, whole, tol, owner)
    work = (a.ravel(), m.ravel(), b.ravel(), fa.ravel(), fm.ravel(), fb.ravel(),
            whole.ravel(), tols.ravel(), owner)
    flat = out.ravel()
    for _ in range(_MAX_DEPTH):
        a_, m_, b_, fa_, fm_, fb_, wh_, tol_, own_ = work
        lm = 0.5 * (a_ + m_)
        rm = 0.5 * (m_ + b_)
        flm, frm = f(lm), f(rm)
        left = _simpson(fa_, flm, fm_, m_ - a_)
        right = _simpson(fm_, frm, fb_, b_ - m_)
        delta = left + right - wh_
        done = np.abs(delta) <= 15.0 * tol_
        np.add.at(flat, own_[done], (left + right + delta / 15.0)[done])
        keep = ~done
        if not keep.any():
            return out
        k = keep
        work = (
            np.concatenate([a_[k], m_[k]]),
            np.concatenate([lm[k], rm[k]]),
            np.concatenate([m_[k], b_[k]]),
            np.concatenate([fa_[k], fm_[k]]),
            np.concatenate([flm[k], frm[k]]),
            np.concatenate([fm_[k], fb_[k]]),
            np.concatenate([left[k], right[k]]),
            np.concatenate([tol_[k], tol_[k]]) / 2.0,
            np.concatenate([own_[k], own_[k]]),
        )
    # depth exhausted: accept the current estimates
    a_, m_, b_, fa_, fm_, fb_, wh_, tol_, own_ = work
    np.add.at(flat, own_, wh_)
    return out


def cumulative_simpson(f, knots: np.ndarray, tol: float = 1e-13) -> np.ndarray:
    """Running integral of ``f`` from ``knots[0]`` to every knot."""
    seg = adaptive_simpson(f, knots[:-1], knots[1:], tol)
    return np.concatenate([[0.0], np.cumsum(seg)])
