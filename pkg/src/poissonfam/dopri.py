"""Dormand-Prince 5(4) with error control, dense output and a domain guard."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, HypothesisError, NumericError, OutOfChartError

__all__ = ["DopriResult", "DenseOutput", "dopri5"]

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# fifth-order minus embedded fourth-order weights, over all seven stages
E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# quartic interpolant coefficients (Shampine's continuous extension)
P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
_EVAL_ERRORS = (DomainError, HypothesisError, NumericError, OutOfChartError, FloatingPointError)


@dataclass
class DenseOutput:
    """Piecewise quartic interpolant over the accepted steps."""

    t0: list[float] = field(default_factory=list)
    h: list[float] = field(default_factory=list)
    y0: list[np.ndarray] = field(default_factory=list)
    Q: list[np.ndarray] = field(default_factory=list)

    def add(self, t, h, y, K):
        self.t0.append(t)
        self.h.append(h)
        self.y0.append(y)
        self.Q.append(K.T @ P)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if not self.t0:
            raise ValueError("empty dense output")
        starts = np.array(self.t0)
        ends = starts + np.array(self.h)
        lo = np.minimum(starts, ends).min()
        hi = np.maximum(starts, ends).max()
        out = []
        for tt in np.atleast_1d(t):
            if not lo - 1e-12 * max(1.0, abs(lo)) <= tt <= hi + 1e-12 * max(1.0, abs(hi)):
                raise ValueError(f"time {tt} outside the integrated interval [{lo}, {hi}]")
            if self.h[0] > 0:
                k = int(np.clip(np.searchsorted(starts, tt, side="right") - 1, 0, len(starts) - 1))
            else:
                k = int(np.clip(np.searchsorted(-starts, -tt, side="right") - 1, 0, len(starts) - 1))
            x = (tt - self.t0[k]) / self.h[k]
            p = np.cumprod(np.full(4, x))
            out.append(self.y0[k] + self.h[k] * (self.Q[k] @ p))
        out = np.array(out)
        return out[0] if t.ndim == 0 else out


@dataclass
class DopriResult:
    times: np.ndarray
    states: np.ndarray
    status: str
    message: str
    accepted: int
    rejected: int
    fevals: int
    dense: DenseOutput | None = None


def _rms(v: np.ndarray) -> float:
    return float(np.sqrt(np.mean(v * v)))


def _initial_step(f, t0, y0, f0, direction, rtol, atol) -> float:
    scale = atol + np.abs(y0) * rtol
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    try:
        f1 = f(t0 + direction * h0, y0 + direction * h0 * f0)
        d2 = _rms((f1 - f0) / scale) / h0
    except _EVAL_ERRORS:
        return h0 / 100
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def dopri5(
    f: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0,
    t_end: float,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    inside: Callable[[np.ndarray], bool] | None = None,
    dense: bool = False,
    max_steps: int = 200_000,
) -> DopriResult:
    """Integrate ``y' = f(t, y)`` from ``t0`` to ``t_end`` (either direction).

    A step whose stages or end state leave the region accepted by ``inside``
    (or raise a domain error) is rejected and halved; once the step would have
    to drop below a relative ``1e-12`` of ``t`` the run stops with status
    ``"domain_exit"``. Other outcomes: ``"completed"``, ``"step_underflow"``,
    ``"max_steps"``. The result always holds every accepted state.
    """
    y = np.array(y0, dtype=float)
    t = float(t0)
    direction = 1.0 if t_end >= t0 else -1.0
    n = y.size
    ts, ys = [t], [y.copy()]
    out = DenseOutput() if dense else None
    acc = rej = nfev = 0

    def done(status, msg):
        return DopriResult(np.array(ts), np.array(ys).reshape(-1, n), status, msg, acc, rej, nfev, out)

    if t == t_end:
        return done("completed", "")
    fy = f(t, y)
    nfev += 1
    h = _initial_step(f, t, y, fy, direction, rtol, atol)
    nfev += 1
    K = np.empty((7, n))
    prev_rejected = False
    while direction * (t_end - t) > 0:
        if acc + rej >= max_steps:
            return done("max_steps", f"step budget {max_steps} exhausted at t={t}")
        min_step = 10 * np.abs(np.nextafter(t, direction * np.inf) - t)
        if h < min_step:
            return done("step_underflow", f"step size underflow at t={t}")
        h = min(h, abs(t_end - t))
        hs = direction * h
        t_new = t + hs if h < abs(t_end - t) else t_end
        hs = t_new - t
        K[0] = fy
        ok = True
        try:
            for s in range(1, 6):
                ys_ = y + hs * (A[s] @ K[:s])
                if inside is not None and not inside(ys_):
                    ok = False
                    break
                K[s] = f(t + C[s] * hs, ys_)
            if ok:
                y_new = y + hs * (B @ K[:6])
                if inside is not None and not inside(y_new):
                    ok = False
                else:
                    f_new = f(t_new, y_new)
                    K[6] = f_new
            nfev += 6
        except _EVAL_ERRORS:
            ok = False
        if ok and not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(f_new))):
            ok = False
        if not ok:
            rej += 1
            if h < 1e-12 * max(1.0, abs(t)):
                return done("domain_exit", f"trajectory leaves the domain near t={t}")
            h *= 0.5
            prev_rejected = True
            continue
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = _rms(hs * (K.T @ E) / scale)
        if err < 1.0:
            factor = MAX_FACTOR if err == 0 else min(MAX_FACTOR, SAFETY * err ** -0.2)
            if prev_rejected:
                factor = min(1.0, factor)
            if out is not None:
                out.add(t, hs, y.copy(), K.copy())
            t, y, fy = t_new, y_new, f_new
            ts.append(t)
            ys.append(y.copy())
            acc += 1
            h *= factor
            prev_rejected = False
        else:
            rej += 1
            h *= max(MIN_FACTOR, SAFETY * err ** -0.2)
            prev_rejected = True
    return done("completed", "")
