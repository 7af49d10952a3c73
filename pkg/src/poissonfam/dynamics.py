"""Poisson systems x' = J(x) grad H(x), their integration and the reduced flow."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import expr as E
from .darboux import CasimirSet, DarbouxChart, darboux_inverse
from .dopri import DenseOutput, dopri5
from .errors import DomainExit, HypothesisError, IntegrationError, StepSizeUnderflow
from .family import PoissonFamilySpec, structure_matrix
from .numdiff import fd_partials

__all__ = [
    "PoissonSystem",
    "TrajectoryRecord",
    "integrate",
    "integrate_reduced",
    "level_set_deviation",
    "reduced_consistency",
    "relative_drift",
    "vector_field",
]

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12
TWO_PATH_RTOL = 1e-6


def _relative_dev(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-point ``max|a - b| / max(|a|, |b|)`` (0 when both vanish)."""
    num = np.max(np.abs(a - b), axis=-1)
    den = np.maximum(np.max(np.abs(a), axis=-1), np.max(np.abs(b), axis=-1))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(num == 0, 0.0, num / den)


@dataclass(frozen=True, eq=False)
class PoissonSystem:
    """A family member together with a Hamiltonian.

    ``hamiltonian`` is an expression (gradient taken symbolically) or a
    vectorized callable (central differences). ``override`` is an explicit
    right-hand side; when given, it must agree with ``J grad H`` to a relative
    ``1e-6`` at ``check_points`` sample points.
    """

    spec: PoissonFamilySpec
    hamiltonian: E.Expr | Callable[[np.ndarray], np.ndarray]
    override: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = ""
    check_points: int = 100
    params: dict = field(default_factory=dict)
    _grad: tuple | None = field(init=False, repr=False, default=None)

    def __post_init__(self):
        if self.hamiltonian is None:
            raise ValueError("a Poisson system needs a Hamiltonian")
        if isinstance(self.hamiltonian, E.Expr):
            if any(v >= self.spec.n for v in self.hamiltonian.variables()):
                raise ValueError(f"Hamiltonian uses variables beyond x{self.spec.n}")
            object.__setattr__(self, "_grad", tuple(self.hamiltonian.diff(l) for l in range(self.spec.n)))
        if self.override is not None and self.check_points > 0:
            dev = self.two_path_deviation(self.spec.sample(self.check_points))
            if dev > TWO_PATH_RTOL:
                raise HypothesisError(
                    f"explicit right-hand side differs from J grad H by {dev:.3g} (relative)"
                )

    @property
    def n(self) -> int:
        return self.spec.n

    def H(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        if isinstance(self.hamiltonian, E.Expr):
            v = np.broadcast_to(np.asarray(self.hamiltonian.at(x), dtype=float), x.shape[:-1])
        else:
            v = np.asarray(self.hamiltonian(np.atleast_2d(x)), dtype=float)
            v = v[0] if x.ndim == 1 else v
        return float(v) if np.ndim(v) == 0 else np.array(v)

    def grad_H(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._grad is not None:
            return np.stack(
                [np.broadcast_to(np.asarray(g.at(x), dtype=float), x.shape[:-1]) for g in self._grad],
                axis=-1,
            )
        g, _ = fd_partials(self.hamiltonian, np.atleast_2d(x), self.spec.box)
        return g[0] if x.ndim == 1 else g

    def explicit_field(self, x) -> np.ndarray:
        if self.override is None:
            raise ValueError(f"system {self.name!r} has no explicit right-hand side")
        x = np.asarray(x, dtype=float)
        v = np.asarray(self.override(np.atleast_2d(x)), dtype=float)
        return v[0] if x.ndim == 1 else v

    def two_path_deviation(self, points) -> float:
        """Largest per-point relative gap between ``J grad H`` and the explicit field."""
        pts = np.atleast_2d(points)
        return float(np.max(_relative_dev(vector_field(self, pts), self.explicit_field(pts))))


def vector_field(sys: PoissonSystem, x, check: bool = True) -> np.ndarray:
    """``J(x) . grad H(x)``."""
    x = np.asarray(x, dtype=float)
    J = structure_matrix(sys.spec, x, check=check).entries
    return np.einsum("...ij,...j->...i", J, sys.grad_H(x))


def relative_drift(values) -> float:
    """``max_t |Q(t) - Q(0)| / max(1, |Q(0)|)``."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return 0.0
    return float(np.max(np.abs(v - v[0])) / max(1.0, abs(v[0])))


@dataclass
class TrajectoryRecord:
    """Accepted steps of one run with the first integrals at every step.

    For reduced runs ``times`` is the reduced time, ``states`` are chart
    coordinates and ``physical_time`` / ``physical_states`` carry the original
    time and coordinates.
    """

    times: np.ndarray
    states: np.ndarray
    hamiltonian: np.ndarray
    casimirs: np.ndarray
    casimir_labels: list[str]
    stats: dict
    status: str = "completed"
    message: str = ""
    physical_time: np.ndarray | None = None
    physical_states: np.ndarray | None = None
    dense: DenseOutput | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def hamiltonian_drift(self) -> float:
        return relative_drift(self.hamiltonian)

    def casimir_drifts(self) -> dict[str, float]:
        return {lab: relative_drift(self.casimirs[:, c]) for c, lab in enumerate(self.casimir_labels)}

    def max_drift(self) -> float:
        return max([self.hamiltonian_drift(), *self.casimir_drifts().values()])

    def header(self) -> list[str]:
        if self.physical_time is None:
            return ["t", *[f"x{k + 1}" for k in range(self.n)], "H", *self.casimir_labels]
        return ["tau", *[f"y{k + 1}" for k in range(self.n)], "H", "t"]

    def rows(self) -> np.ndarray:
        if self.physical_time is None:
            return np.column_stack([self.times, self.states, self.hamiltonian, self.casimirs])
        return np.column_stack([self.times, self.states, self.hamiltonian, self.physical_time])

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            for row in self.rows():
                w.writerow([repr(float(v)) for v in row])
        return path


def _raise_for(status: str, message: str, record: TrajectoryRecord) -> None:
    if status == "completed":
        return
    if status == "domain_exit":
        raise DomainExit(message, record)
    if status == "step_underflow":
        raise StepSizeUnderflow(message, record)
    raise IntegrationError(message, record)


def _full_run(sys, x0, t_end, rtol, atol, dense, max_steps):
    spec = sys.spec
    x0 = spec.require(np.asarray(x0, dtype=float))
    spec.factors(x0)
    f = lambda t, x: vector_field(sys, x, check=False)  # noqa: E731
    res = dopri5(f, 0.0, x0, t_end, rtol, atol, inside=spec.contains, dense=dense, max_steps=max_steps)
    cs = CasimirSet(spec)
    rec = TrajectoryRecord(
        times=res.times,
        states=res.states,
        hamiltonian=np.atleast_1d(sys.H(res.states)),
        casimirs=cs.values(res.states, check=False),
        casimir_labels=cs.labels,
        stats={"accepted": res.accepted, "rejected": res.rejected, "fevals": res.fevals},
        status=res.status,
        message=res.message,
        dense=res.dense,
    )
    return rec


def integrate(
    sys: PoissonSystem,
    x0,
    t_end: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    dense: bool = False,
    max_steps: int = 200_000,
) -> TrajectoryRecord:
    """Adaptive Dormand-Prince integration of ``x' = J grad H`` on ``[0, t_end]``.

    ``H`` and every Casimir of the distinguished pair are recorded at each
    accepted step. Leaving the domain raises :class:`DomainExit`; a collapsing
    step raises :class:`StepSizeUnderflow`. Both carry the partial record.
    """
    if not t_end > 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    rec = _full_run(sys, x0, float(t_end), rtol, atol, dense, max_steps)
    _raise_for(rec.status, rec.message, rec)
    return rec


def integrate_reduced(
    sys: PoissonSystem,
    chart: DarbouxChart,
    y0,
    tau_end: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    max_steps: int = 200_000,
) -> TrajectoryRecord:
    """Integrate the canonical flow ``y' = J_D grad H*(y)`` in reduced time.

    Only the pair coordinates move; the Casimir coordinates are copied from
    ``y0`` unchanged. The physical time is carried along through
    ``dt/dtau = 1 / J_ij(x(y))``.
    """
    spec = sys.spec
    if chart.spec is not spec:
        raise ValueError("chart belongs to a different spec")
    if chart.hamiltonian is None:
        chart = DarbouxChart(spec, chart.pair, sys.hamiltonian)
    i, j = chart.pair
    y0 = np.asarray(y0, dtype=float).copy()
    x0 = darboux_inverse(chart, y0)
    spec.factors(x0)
    if tau_end == 0:
        raise ValueError("tau_end must be nonzero")

    def full(z):
        y = y0.copy()
        y[i], y[j] = z[0], z[1]
        return y

    def rhs(tau, z):
        y = full(z)
        x = darboux_inverse(chart, y)
        eta, phi, psi = spec.factors(x)
        mu = eta * phi[i] * phi[j] * (psi[i] - psi[j])
        g = chart.reduced_gradient(y, x)
        return np.array([g[j], -g[i], 1.0 / mu])

    def inside(z):
        try:
            darboux_inverse(chart, full(z))
        except Exception:  # noqa: BLE001 - any chart failure means outside the image
            return False
        return True

    z0 = np.array([y0[i], y0[j], 0.0])
    res = dopri5(rhs, 0.0, z0, float(tau_end), rtol, atol, inside=inside, max_steps=max_steps)
    m = len(res.times)
    Y = np.repeat(y0[None, :], m, axis=0)
    Y[:, i] = res.states[:, 0]
    Y[:, j] = res.states[:, 1]
    X = darboux_inverse(chart, Y)
    rec = TrajectoryRecord(
        times=res.times,
        states=Y,
        hamiltonian=np.atleast_1d(sys.H(X)),
        casimirs=Y[:, list(chart.casimirs.indices)],
        casimir_labels=[f"y{k + 1}" for k in chart.casimirs.indices],
        stats={"accepted": res.accepted, "rejected": res.rejected, "fevals": res.fevals},
        status=res.status,
        message=res.message,
        physical_time=res.states[:, 2].copy(),
        physical_states=X,
    )
    _raise_for(rec.status, rec.message, rec)
    return rec


def reduced_consistency(
    sys: PoissonSystem,
    reduced: TrajectoryRecord,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> float:
    """Compare a reduced run, mapped back and retimed, with a direct run.

    The direct run starts at the same physical state and covers the same
    physical time span; its dense output is read at the physical times of the
    reduced steps. Returns ``max |x_reduced - x_full| / max(1, |x_full|)``.
    """
    X = reduced.physical_states
    T = reduced.physical_time
    if X is None or T is None:
        raise ValueError("not a reduced trajectory")
    rec = _full_run(sys, X[0], float(T[-1]), rtol, atol, True, 200_000)
    _raise_for(rec.status, rec.message, rec)
    Xf = rec.dense(T)
    err = np.max(np.abs(X - Xf), axis=1) / np.maximum(1.0, np.max(np.abs(Xf), axis=1))
    return float(err.max())


def level_set_deviation(sys: PoissonSystem, chart: DarbouxChart, reduced: TrajectoryRecord) -> float:
    """Distance of the mapped-back reduced states from ``{C_k = y0_k, H = H(x0)}``.

    Each quantity is measured relative to ``max(1, |level|)``.
    """
    X = reduced.physical_states
    y0 = reduced.states[0]
    H = np.atleast_1d(sys.H(X))
    dev = [np.max(np.abs(H - H[0])) / max(1.0, abs(H[0]))]
    C = chart.casimirs.values(X)
    for c, k in enumerate(chart.casimirs.indices):
        dev.append(np.max(np.abs(C[:, c] - y0[k])) / max(1.0, abs(y0[k])))
    return float(max(dev))
