"""Periodic homogenization of two-phase, high-contrast, Hall-perturbed conductivities."""

from .cell_solver import EffectiveTensor, NonConvergence, SolverConfig, effective_tensor
from .closed_forms import LimitPhases, cross_formula, fiber_formula_3d, triaxial_formula
from .microstructure import (
    CellGeometry,
    ConductivityField,
    PhaseMask,
    assemble_conductivity,
    build_checkerboard,
    build_cross_cell,
    build_fiber_cell_3d,
    build_laminate,
    build_triaxial_fiber_cell,
)
from .tensor_core import (
    DegenerateTransform,
    DykhneCoefficients,
    NonRealTransform,
    PerturbedPhase,
    dykhne_coefficients,
    keller_dual,
    perturbed_tensor,
)

__version__ = "0.1.0"

__all__ = [
    "CellGeometry",
    "ConductivityField",
    "DegenerateTransform",
    "DykhneCoefficients",
    "EffectiveTensor",
    "LimitPhases",
    "NonConvergence",
    "NonRealTransform",
    "PerturbedPhase",
    "PhaseMask",
    "SolverConfig",
    "assemble_conductivity",
    "build_checkerboard",
    "build_cross_cell",
    "build_fiber_cell_3d",
    "build_laminate",
    "build_triaxial_fiber_cell",
    "cross_formula",
    "dykhne_coefficients",
    "effective_tensor",
    "fiber_formula_3d",
    "keller_dual",
    "perturbed_tensor",
    "triaxial_formula",
]
