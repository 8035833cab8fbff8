"""
FBTumor - Free-Boundary Tumor Growth Solver

Solver library and CLI for a spherically symmetric tumor whose nutrient
supply crosses the surface through a Robin (vascular transfer)
condition, with a necrotic core forming below the concentration sigma_D.

Components:
    - model_core: Rate functions, parameters, assumption checks
    - profile_solver: Stationary nutrient profile by shooting
    - free_boundary: Critical radius, necrotic fraction, state assembly
    - stationary: Growth functional, dormant radius, thresholds
    - evolution: Radius dynamics, phase transitions, long-time fate
    - cli: Command-line front end

Usage:
    from fbtumor import ModelParams, RateFunction, critical_radius

    p = ModelParams(
        f=RateFunction.linear(1.0),
        g=RateFunction.proliferation_linear(mu=1.0, sigma_tilde=0.6),
        sigma_bar=1.0, beta=1.0, nu=1.0, sigma_D=0.5,
    )
    R_c = critical_radius(p)

Version: 1.0.0
"""

from fbtumor.exceptions import (
    AssumptionViolationError,
    BracketError,
    ConvergenceError,
    DomainError,
    FBTumorError,
    InternalConsistencyError,
    SolverError,
    ValidationError,
)

from fbtumor.model_core import (
    AssumptionCheck,
    ModelParams,
    RateFunction,
    RateKind,
    RateRole,
    ValidationGrid,
    ValidationReport,
    ensure_valid,
    validate_params,
)

from fbtumor.profile_solver import (
    NutrientProfile,
    center_value,
    closed_form_linear,
    profile_from_center,
    solve_profile,
    threshold_residual,
)

from fbtumor.free_boundary import (
    Phase,
    TumorState,
    assemble_state,
    critical_radius,
    necrotic_fraction,
    radius_for_fraction,
)

from fbtumor.stationary import (
    Classification,
    GrowthBreakdown,
    StationaryResult,
    Thresholds,
    classify,
    growth_breakdown,
    growth_functional,
    sigma_star,
    stationary_radius,
    thresholds,
)

from fbtumor.evolution import (
    Direction,
    EvolutionOptions,
    FateResult,
    GrowthCache,
    Sample,
    Trajectory,
    Transition,
    Verdict,
    VerdictKind,
    evolve,
    fate,
    transient_profile,
)

__version__ = "1.0.0"

__all__ = [
    # Errors
    "FBTumorError",
    "ValidationError",
    "DomainError",
    "AssumptionViolationError",
    "SolverError",
    "ConvergenceError",
    "BracketError",
    "InternalConsistencyError",
    # Model
    "RateFunction",
    "RateKind",
    "RateRole",
    "ModelParams",
    "ValidationGrid",
    "ValidationReport",
    "AssumptionCheck",
    "validate_params",
    "ensure_valid",
    # Profiles
    "NutrientProfile",
    "solve_profile",
    "center_value",
    "threshold_residual",
    "profile_from_center",
    "closed_form_linear",
    # Free boundary
    "Phase",
    "TumorState",
    "critical_radius",
    "necrotic_fraction",
    "radius_for_fraction",
    "assemble_state",
    # Stationary
    "Classification",
    "GrowthBreakdown",
    "StationaryResult",
    "Thresholds",
    "growth_functional",
    "growth_breakdown",
    "stationary_radius",
    "sigma_star",
    "thresholds",
    "classify",
    # Evolution
    "Direction",
    "EvolutionOptions",
    "FateResult",
    "GrowthCache",
    "Sample",
    "Trajectory",
    "Transition",
    "Verdict",
    "VerdictKind",
    "evolve",
    "transient_profile",
    "fate",
]
