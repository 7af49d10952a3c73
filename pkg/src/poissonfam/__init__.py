"""Numerical toolkit for the psi-difference family of Poisson structures."""

from .catalog import (
    QPTransform,
    circle_map_casimirs,
    make_circle_maps,
    make_lv3,
    make_nlv,
    make_qp_lv,
    qp_pullback_check,
)
from .darboux import (
    CasimirSet,
    DarbouxChart,
    canonical_check,
    casimir_eval,
    casimir_gradient_check,
    darboux_forward,
    darboux_inverse,
    pushforward_structure,
    reparam_factor,
)
from .dynamics import PoissonSystem, TrajectoryRecord, integrate, integrate_reduced, vector_field
from .expr import parse
from .family import AxisSpec, PoissonFamilySpec, StructureMatrixValue, make_spec, omega, structure_matrix, structure_matrix_alt
from .scalar import IntervalBox, derivative, evaluate, inverse, psi_from_phi
from .verification import JacobiResidual, bracket, jacobi_residual, rank_at

__all__ = [
    "AxisSpec",
    "CasimirSet",
    "DarbouxChart",
    "IntervalBox",
    "JacobiResidual",
    "PoissonFamilySpec",
    "PoissonSystem",
    "QPTransform",
    "StructureMatrixValue",
    "TrajectoryRecord",
    "bracket",
    "canonical_check",
    "casimir_eval",
    "casimir_gradient_check",
    "circle_map_casimirs",
    "darboux_forward",
    "darboux_inverse",
    "derivative",
    "evaluate",
    "integrate",
    "integrate_reduced",
    "inverse",
    "jacobi_residual",
    "make_circle_maps",
    "make_lv3",
    "make_nlv",
    "make_qp_lv",
    "make_spec",
    "omega",
    "parse",
    "psi_from_phi",
    "pushforward_structure",
    "qp_pullback_check",
    "rank_at",
    "reparam_factor",
    "structure_matrix",
    "structure_matrix_alt",
    "vector_field",
]
