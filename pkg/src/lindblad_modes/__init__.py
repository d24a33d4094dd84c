"""Open-system dynamics of damped bosonic modes and a two-level system through
Liouvillian eigenmode expansions, with closed-form and direct-integration checks."""

from .eigenbasis import (
    EigenTable,
    coherent_coefficients,
    convergence_diagnostic,
    eigenstate_explicit,
    eigenstate_ladder,
    expansion_coefficients,
    reconstruct,
    steady_state,
)
from .errors import (
    ConfigError,
    DegenerateSpectrumError,
    DimensionCapError,
    DivergenceError,
    LindbladModesError,
    TruncationError,
)
from .evolution import (
    EvolutionResult,
    TimeGrid,
    closed_form,
    evolve_eigenmode,
    evolve_oracle,
    observables,
)
from .models import ModelSpec, ladder_set, liouvillian, two_mode_coefficients
from .operators import FockOperator, StateSpec, build_state, trace_distance
from .superalgebra import Superoperator

__all__ = [
    "ConfigError", "DegenerateSpectrumError", "DimensionCapError", "DivergenceError",
    "EigenTable", "EvolutionResult", "FockOperator", "LindbladModesError", "ModelSpec",
    "StateSpec", "Superoperator", "TimeGrid", "TruncationError", "build_state", "closed_form",
    "coherent_coefficients", "convergence_diagnostic", "eigenstate_explicit",
    "eigenstate_ladder", "evolve_eigenmode", "evolve_oracle", "expansion_coefficients",
    "ladder_set", "liouvillian", "observables", "reconstruct", "steady_state",
    "trace_distance", "two_mode_coefficients",
]
