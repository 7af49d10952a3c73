"""Reproducible quasi-random sampling of interval boxes."""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.stats import qmc

from .scalar import IntervalBox

__all__ = ["halton_points"]


def halton_points(
    box: IntervalBox,
    count: int,
    seed: int = 0,
    accept: Callable[[np.ndarray], np.ndarray] | None = None,
    max_draws: int | None = None,
) -> np.ndarray:
    """``count`` scrambled-Halton points of ``box``, shape ``(count, n)``.

    The scrambling is seeded, so the same ``(box, count, seed)`` always gives
    the same points. With ``accept`` the sequence is continued and filtered
    until enough points pass.
    """
    if count <= 0:
        return np.empty((0, len(box)))
    engine = qmc.Halton(d=len(box), scramble=True, seed=seed)
    tiny = np.finfo(float).eps
    if accept is None:
        u = np.clip(engine.random(count), tiny, 1.0 - tiny)
        return box.from_unit(u)
    max_draws = max_draws or 200 * count
    kept: list[np.ndarray] = []
    have = drawn = 0
    while have < count:
        if drawn >= max_draws:
            raise ValueError(
                f"only {have} of {count} sample points satisfy the domain constraints "
                f"after {drawn} draws"
            )
        chunk = max(count, 256)
        u = np.clip(engine.random(chunk), tiny, 1.0 - tiny)
        drawn += chunk
        pts = box.from_unit(u)
        ok = np.asarray(accept(pts), dtype=bool)
        kept.append(pts[ok])
        have += int(ok.sum())
    return np.concatenate(kept)[:count]
