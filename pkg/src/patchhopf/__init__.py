"""Delay-induced Hopf bifurcations of a single species dispersing on a lossy patch network."""

from .equilibrium import (
    DstarExpansion,
    EquilibriumPoint,
    dstar_expansion,
    du_at_zero,
    equilibrium_branch,
    solve_equilibrium,
    solve_u0,
)
from .model import (
    CallableLaw,
    DispersionMatrix,
    GrowthLaw,
    Logistic,
    ModelConfig,
    as_model,
    classify_patches,
    partials_at,
    validate_dispersion,
    validate_growth_law,
)
from .spectral import PerronData, find_dstar, project_X1, spectral_bound

__version__ = "0.1.0"

__all__ = [
    "DstarExpansion", "EquilibriumPoint", "dstar_expansion", "du_at_zero", "equilibrium_branch",
    "solve_equilibrium", "solve_u0", "CallableLaw", "DispersionMatrix", "GrowthLaw", "Logistic",
    "ModelConfig", "as_model", "classify_patches", "partials_at", "validate_dispersion",
    "validate_growth_law", "PerronData", "find_dstar", "project_X1", "spectral_bound",
]
