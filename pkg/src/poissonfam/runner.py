"""Execute a scenario and write ``report.json`` (plus ``trajectory.csv`` when integrating)."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import expr as E
from .catalog import build
from .darboux import DarbouxChart, canonical_check, casimir_gradient_check, independence_check, reparam_factor
from .dynamics import PoissonSystem, integrate, integrate_reduced, level_set_deviation, reduced_consistency
from .errors import DomainError, HypothesisError, IntegrationError, NumericError, OutOfChartError
from .family import PoissonFamilySpec
from .scenario import Check, Report, Scenario
from .verification import jacobi_residual, rank_at

__all__ = ["OUTPUT_ENV", "ScenarioError", "RunResult", "build_system", "output_dir", "run"]

OUTPUT_ENV = "POISSONFAM_OUTPUT_DIR"
DEFAULT_OUTPUT = "poissonfam-out"

JACOBI_TOL = 1e-6
CASIMIR_TOL = 1e-6
CANONICAL_TOL = 1e-6
ROUNDTRIP_TOL = 1e-9
TWO_PATH_TOL = 1e-6
DRIFT_TOL = 1e-6
INDEPENDENCE_TOL = 1e-10


class ScenarioError(ValueError):
    """The scenario cannot be turned into a valid system (exit status 2)."""


@dataclass
class RunResult:
    exit_code: int
    report: dict
    paths: dict[str, Path] = field(default_factory=dict)


def output_dir(explicit: str | None = None) -> Path:
    """Explicit directory, else ``$POISSONFAM_OUTPUT_DIR``, else ``./poissonfam-out``."""
    return Path(explicit or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)


def build_system(scn: Scenario) -> tuple[PoissonFamilySpec, PoissonSystem | None, dict]:
    ref = scn.system
    try:
        if ref.catalog is not None:
            params = {
                "n": ref.n if ref.catalog == "nlv" else None,
                "a": ref.a,
                "b": ref.b,
                "c": tuple(ref.c) if ref.c is not None else None,
                "k": ref.k,
                "box": ref.box,
                "omega_sign": ref.omega_sign,
            }
            obj = build(ref.catalog, **params)
            name = ref.catalog
        else:
            obj = PoissonFamilySpec.from_dict(ref.spec)
            name = "inline"
        if isinstance(obj, PoissonSystem):
            spec, system = obj.spec, obj
            info = {"name": name, "params": dict(obj.params)}
        else:
            spec, system = obj, None
            info = {"name": name, "params": {}}
        if ref.hamiltonian is not None:
            system = PoissonSystem(spec, E.parse(ref.hamiltonian), name=name)
            info["hamiltonian"] = ref.hamiltonian
        elif system is not None and isinstance(system.hamiltonian, E.Expr):
            info["hamiltonian"] = system.hamiltonian.to_text()
    except (KeyError, ValueError, TypeError, HypothesisError, DomainError, NumericError) as exc:
        raise ScenarioError(f"invalid system: {exc}") from exc
    info["spec"] = spec.to_dict()
    return spec, system, info


def _clean(v: Any):
    """JSON-ready copy: numpy scalars to Python, nonfinite floats to strings."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_clean(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    return v


def _check(checks: list[Check], name: str, value, tol: float | None, passed: bool | None = None):
    if passed is None:
        passed = bool(np.isfinite(value) and value <= tol)
    checks.append(Check(name=name, value=_clean(value), tolerance=tol, passed=bool(passed)))


def _verify(spec: PoissonFamilySpec, system, scn: Scenario, checks: list[Check]) -> dict:
    pts = spec.sample(scn.sampling.points, scn.sampling.seed)
    out: dict[str, Any] = {"points": len(pts), "seed": scn.sampling.seed}

    jr = jacobi_residual(spec, pts)
    out["jacobi_max_abs"] = float(np.max(jr.max_abs))
    out["jacobi_max_relative"] = float(np.max(jr.relative))
    out["jacobi_one_sided"] = jr.one_sided
    _check(checks, "jacobi_residual", out["jacobi_max_relative"], JACOBI_TOL)

    ranks = np.atleast_1d(rank_at(spec, pts))
    values, counts = np.unique(ranks, return_counts=True)
    out["rank_histogram"] = {str(int(v)): int(c) for v, c in zip(values, counts)}
    _check(checks, "rank_is_2", bool(np.all(ranks == 2)), None, bool(np.all(ranks == 2)))

    chart = DarbouxChart(spec)
    cs = chart.casimirs
    if cs.indices:
        rel = max(float(np.max(casimir_gradient_check(cs, k, pts).relative)) for k in cs.indices)
        out["casimir_gradient_max_relative"] = rel
        _check(checks, "casimir_gradient", rel, CASIMIR_TOL)
        ind = independence_check(cs, pts)
        out["independence_min_scaled_diagonal"] = ind.min_scaled_diagonal
        out["independence_max_off_diagonal"] = ind.max_off_diagonal
        _check(checks, "casimir_independence", ind.ok, None, ind.ok)

    sub = pts[: min(len(pts), 500)]
    back = chart.inverse(chart.forward(sub))
    rt = float(np.max(np.max(np.abs(back - sub), axis=1) / np.maximum(1.0, np.max(np.abs(sub), axis=1))))
    out["chart_roundtrip_max_relative"] = rt
    _check(checks, "chart_roundtrip", rt, ROUNDTRIP_TOL)

    ys = chart.forward(pts[: min(len(pts), 50)])
    cc = float(np.max(canonical_check(spec, chart, ys)))
    out["canonical_check_max"] = cc
    _check(checks, "canonical_form", cc, CANONICAL_TOL)

    if system is not None and system.override is not None:
        tp = system.two_path_deviation(pts[: min(len(pts), 100)])
        out["two_path_max_relative"] = tp
        _check(checks, "two_path_field", tp, TWO_PATH_TOL)
    return out


def _default_point(spec: PoissonFamilySpec, seed: int) -> np.ndarray:
    return spec.sample(1, seed)[0]


def _reduce(spec, system, scn: Scenario, checks: list[Check]) -> dict:
    x = np.asarray(scn.reduce.x, dtype=float) if scn.reduce.x is not None else _default_point(spec, scn.sampling.seed)
    H = system.hamiltonian if system is not None else None
    chart = DarbouxChart(spec, hamiltonian=H)
    try:
        y = chart.forward(x)
    except (DomainError, HypothesisError) as exc:
        raise ScenarioError(f"reduce point rejected: {exc}") from exc
    back = chart.inverse(y)
    rt = float(np.max(np.abs(back - x)) / max(1.0, float(np.max(np.abs(x)))))
    cc = float(canonical_check(spec, chart, y))
    out: dict[str, Any] = {
        "x": x.tolist(),
        "y": y.tolist(),
        "roundtrip": rt,
        "reparam_factor": float(reparam_factor(chart, y)),
        "canonical_deviation": cc,
    }
    _check(checks, "reduce_roundtrip", rt, ROUNDTRIP_TOL)
    _check(checks, "reduce_canonical_form", cc, CANONICAL_TOL)
    if scn.reduce.tau_end is not None:
        if system is None:
            raise ScenarioError("the reduced flow needs a Hamiltonian")
        flow: dict[str, Any] = {"tau_end": scn.reduce.tau_end}
        try:
            rec = integrate_reduced(system, chart, y, scn.reduce.tau_end, scn.integration.rtol, scn.integration.atol)
            flow["status"] = rec.status
        except IntegrationError as exc:
            rec = exc.record
            flow["status"] = rec.status
            flow["message"] = str(exc)
        flow["steps"] = rec.stats
        flow["tau_final"] = float(rec.times[-1])
        flow["t_final"] = float(rec.physical_time[-1])
        flow["hamiltonian_drift"] = rec.hamiltonian_drift()
        flow["level_set_deviation"] = level_set_deviation(system, chart, rec)
        _check(checks, "reduced_flow_completed", rec.status == "completed", None, rec.status == "completed")
        _check(checks, "reduced_level_set", flow["level_set_deviation"], DRIFT_TOL)
        if rec.status == "completed" and len(rec.times) > 1:
            flow["full_flow_consistency"] = reduced_consistency(system, rec, scn.integration.rtol, scn.integration.atol)
            _check(checks, "reduced_vs_full", flow["full_flow_consistency"], DRIFT_TOL)
        out["reduced_flow"] = flow
    return out


def _integrate(spec, system, scn: Scenario, checks: list[Check], out_dir: Path, paths: dict) -> dict:
    if system is None:
        raise ScenarioError("integration needs a Hamiltonian (system.hamiltonian)")
    ctl = scn.integration
    x0 = np.asarray(ctl.x0, dtype=float) if ctl.x0 is not None else _default_point(spec, scn.sampling.seed)
    if not spec.contains(x0):
        raise ScenarioError(f"x0 = {x0.tolist()} lies outside the domain")
    out: dict[str, Any] = {"x0": x0.tolist(), "t_end": ctl.t_end, "rtol": ctl.rtol, "atol": ctl.atol}
    try:
        rec = integrate(system, x0, ctl.t_end, ctl.rtol, ctl.atol)
        out["message"] = ""
    except IntegrationError as exc:
        rec = exc.record
        out["message"] = str(exc)
    out["status"] = rec.status
    out["steps"] = rec.stats
    out["t_final"] = float(rec.times[-1])
    out["final_state"] = rec.final_state.tolist()
    drift = {"H": rec.hamiltonian_drift(), **rec.casimir_drifts()}
    out["drift"] = drift
    csv_path = rec.to_csv(out_dir / "trajectory.csv")
    paths["trajectory"] = csv_path
    out["trajectory_csv"] = csv_path.name
    done = rec.status == "completed"
    _check(checks, "integration_completed", done, None, done)
    for key, v in drift.items():
        _check(checks, f"drift_{key}", v, DRIFT_TOL)
    return out


def run(scn: Scenario, out: str | Path | None = None) -> RunResult:
    """Run ``scn``; exit code 0 when every check passes, 1 otherwise.

    Raises :class:`ScenarioError` for inputs that do not describe a valid
    system or point; no report is written in that case.
    """
    out_dir = output_dir(str(out) if out is not None else scn.output.dir)
    spec, system, info = build_system(scn)
    checks: list[Check] = []
    paths: dict[str, Path] = {}
    sections: dict[str, Any] = {}
    out_dir.mkdir(parents=True, exist_ok=True)
    act = scn.action
    try:
        if act in ("verify", "all"):
            sections["verify"] = _verify(spec, system, scn, checks)
        if act in ("reduce", "all"):
            sections["reduce"] = _reduce(spec, system, scn, checks)
        if act in ("integrate", "all"):
            sections["integrate"] = _integrate(spec, system, scn, checks, out_dir, paths)
    except (DomainError, OutOfChartError) as exc:
        raise ScenarioError(str(exc)) from exc
    passed = all(c.passed for c in checks)
    report = Report(action=act, system=_clean(info), checks=checks, passed=passed, **_clean(sections))
    doc = report.model_dump(mode="json")
    path = out_dir / "report.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    paths["report"] = path
    return RunResult(0 if passed else 1, doc, paths)
