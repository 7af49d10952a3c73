"""Scenario and report documents (pydantic models double as the published schemas)."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

__all__ = ["Report", "Scenario", "load_scenario", "schemas"]

Action = Literal["verify", "reduce", "integrate", "all"]
CatalogName = Literal["lv3", "qp-lv3", "circle-maps", "nlv"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SystemRef(_Strict):
    """A catalog system with parameters, or an inline spec.

    Inline specs use the structured form of ``PoissonFamilySpec.to_dict``:
    ``n``, ``eta`` (prefix text), ``axes`` (``{"psi": text}`` or
    ``{"phi": text, "a": number}``), ``box``, ``pair`` (1-based) and
    ``omega_sign``.
    """

    catalog: CatalogName | None = None
    n: int | None = Field(default=None, ge=3)
    a: list[float] | None = None
    b: list[float] | None = None
    c: list[float] | None = None
    k: float | None = None
    box: list[tuple[float, float]] | None = None
    omega_sign: Literal[-1, 1] | None = None
    spec: dict[str, Any] | None = None
    hamiltonian: str | None = Field(default=None, description="prefix-notation text, variables x1..xn")

    @model_validator(mode="after")
    def _consistent(self):
        if (self.catalog is None) == (self.spec is None):
            raise ValueError("give exactly one of 'catalog' and 'spec'")
        if self.catalog == "nlv":
            n = self.n
            for key in ("a", "b"):
                v = getattr(self, key)
                if v is not None:
                    if n is None:
                        n = len(v)
                    if len(v) != n:
                        raise ValueError(f"'{key}' has {len(v)} entries but n = {n}")
            if n is None:
                raise ValueError("nlv needs 'n' (or 'a'/'b')")
            self.n = n
        elif self.catalog is not None:
            if self.n not in (None, 3):
                raise ValueError(f"{self.catalog} is three-dimensional")
            if self.a is not None or self.b is not None:
                raise ValueError(f"{self.catalog} takes no 'a'/'b'")
        if self.c is not None:
            if self.catalog != "qp-lv3":
                raise ValueError("'c' applies to qp-lv3 only")
            if len(self.c) != 3 or any(v == 0 for v in self.c):
                raise ValueError("'c' needs three nonzero exponents")
        if self.k is not None and self.catalog not in ("lv3", "qp-lv3"):
            raise ValueError("'k' applies to lv3 and qp-lv3 only")
        if self.catalog == "circle-maps" and self.omega_sign is not None:
            raise ValueError("circle-maps takes no omega_sign")
        return self

    def dimension(self) -> int:
        if self.spec is not None:
            return int(self.spec.get("n", 0))
        return self.n or 3


class Sampling(_Strict):
    points: int = Field(default=1000, ge=1)
    seed: int = Field(default=0, ge=0)


class Integration(_Strict):
    x0: list[float] | None = None
    t_end: float = Field(default=10.0, gt=0)
    rtol: float = Field(default=1e-9, gt=0)
    atol: float = Field(default=1e-12, gt=0)


class Reduction(_Strict):
    x: list[float] | None = None
    tau_end: float | None = Field(default=None, description="if set, also run the reduced flow")


class Output(_Strict):
    dir: str | None = None


class Scenario(_Strict):
    """One run: a system, an action and its controls."""

    system: SystemRef
    action: Action = "all"
    sampling: Sampling = Sampling()
    integration: Integration = Integration()
    reduce: Reduction = Reduction()
    output: Output = Output()

    @model_validator(mode="after")
    def _arity(self):
        n = self.system.dimension()
        for label, v in (("integration.x0", self.integration.x0), ("reduce.x", self.reduce.x)):
            if v is not None and len(v) != n:
                raise ValueError(f"{label} has {len(v)} entries but the system has n = {n}")
        return self


class Check(BaseModel):
    """One pass/fail line: ``value <= tolerance`` (or a boolean with tolerance null)."""

    name: str
    value: float | bool | None
    tolerance: float | None
    passed: bool


class Report(BaseModel):
    """Diagnostics document written as ``report.json``.

    ``verify``: ``points``, ``seed``, ``jacobi_max_abs``, ``jacobi_max_relative``
    (residual over ``max(max|J|, max|dJ|)``), ``jacobi_one_sided``,
    ``rank_histogram``, ``casimir_gradient_max_relative``,
    ``independence_min_scaled_diagonal``, ``chart_roundtrip_max_relative``,
    ``canonical_check_max``, ``two_path_max_relative``.
    ``reduce``: ``x``, ``y``, ``roundtrip``, ``reparam_factor``,
    ``canonical_deviation`` and optionally ``reduced_flow``.
    ``integrate``: ``x0``, ``t_end``, ``status``, ``message``, ``steps``,
    ``t_final``, ``drift`` (relative drift of ``H`` and each Casimir),
    ``trajectory_csv``.
    """

    schema_version: int = 1
    action: Action
    system: dict[str, Any]
    verify: dict[str, Any] | None = None
    reduce: dict[str, Any] | None = None
    integrate: dict[str, Any] | None = None
    checks: list[Check]
    passed: bool


def load_scenario(path: str | Path) -> Scenario:
    """Read a YAML or JSON scenario file (JSON is valid YAML)."""
    data = yaml.safe_load(Path(path).read_text())
    return Scenario.model_validate(data)


def schemas() -> dict[str, dict]:
    return {"scenario": Scenario.model_json_schema(), "report": Report.model_json_schema()}
