"""
FBTumor - Free Boundary

Critical radius R_c, necrotic fraction eta(R), its inverse R(eta), and
the assembled physical profile sigma(r, R).

All three root problems read the sign of F(eta, R) = U(eta, eta, R) - sigma_D
from a single shot started at sigma_D (see ``threshold_residual``), so
no nested shooting is needed.

Version: 1.0.0
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Any, Dict, List, Union

import numpy as np

from fbtumor.exceptions import BracketError, DomainError
from fbtumor.model_core import ModelParams, ensure_valid
from fbtumor.monitoring import timed
from fbtumor.profile_solver import (
    SOLVER_DEFAULTS,
    NutrientProfile,
    profile_from_center,
    residual_tolerance,
    solve_profile,
    threshold_residual,
)
from fbtumor.rootfind import bisect, find_bracket

logger = logging.getLogger(__name__)

FREE_BOUNDARY_DEFAULTS: Dict[str, Any] = {
    "start_radius": 1.0,
    "max_doublings": 60,
    "eta_ceiling": 1.0 - 1e-6,
    "rel_width": 1e-14,
    "export_points": 1025,
}


class Phase(Enum):
    """Tumor phase; R <= R_c is nonnecrotic."""
    NONNECROTIC = "nonnecrotic"
    NECROTIC = "necrotic"


@dataclass(frozen=True)
class TumorState:
    """
    Stationary nutrient distribution inside a tumor of radius R.

    Attributes:
        R: Tumor radius
        phase: Nonnecrotic iff R <= R_c
        eta: Necrotic fraction (0 when nonnecrotic)
        profile: U(., eta, R) on [eta, 1]
        sigma_D: Concentration held in the necrotic core
    """
    R: float
    phase: Phase
    eta: float
    profile: NutrientProfile
    sigma_D: float

    @property
    def rho(self) -> float:
        """Necrotic core radius eta * R."""
        return self.eta * self.R

    @property
    def center_value(self) -> float:
        return float(self.sigma_of_r(0.0))

    def sigma_of_r(self, r: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """
        Physical concentration at radius r in [0, R].

        sigma_D on the necrotic core [0, rho], U(r/R, eta, R) outside it.

        Raises:
            DomainError: r outside [0, R]
        """
        values = np.asarray(r, dtype=float)
        if np.any(values < 0.0) or np.any(values > self.R * (1.0 + 1e-12)):
            raise DomainError("r", r, f"must lie in [0, {self.R:.6g}]")
        s = np.clip(values / self.R, self.eta, 1.0)
        out = np.asarray(self.profile.u_at(s), dtype=float)
        if self.phase is Phase.NECROTIC and self.rho > 0.0:
            out = np.where(values <= self.rho, self.sigma_D, out)
        return float(out) if np.ndim(r) == 0 else out

    def to_rows(self, points: int = FREE_BOUNDARY_DEFAULTS["export_points"]) -> List[List[float]]:
        """CSV rows r, sigma on a uniform grid over [0, R]."""
        radii = np.linspace(0.0, self.R, points)
        sigma = self.sigma_of_r(radii)
        return [[float(a), float(b)] for a, b in zip(radii, sigma)]

    def summary(self) -> Dict[str, Any]:
        return {
            "R": self.R,
            "phase": self.phase.value,
            "eta": self.eta,
            "rho": self.rho,
            "center_value": self.center_value,
        }


# =============================================================================
# CRITICAL RADIUS
# =============================================================================

def critical_radius(p: ModelParams, tol: float = SOLVER_DEFAULTS["tol"]) -> float:
    """
    Radius R_c at which the nonnecrotic center value equals sigma_D.

    Memoized per (parameters, tolerance).

    Args:
        p: Model parameters
        tol: Residual tolerance

    Returns:
        R_c > 0

    Raises:
        BracketError: No sign change within 60 doublings from R = 1
    """
    ensure_valid(p)
    return _critical_radius(p, tol)


@lru_cache(maxsize=512)
@timed("critical_radius_seconds")
def _critical_radius(p: ModelParams, tol: float) -> float:
    def residual(R: float) -> float:
        return threshold_residual(0.0, R, p, tol)

    bracket = find_bracket(
        residual,
        FREE_BOUNDARY_DEFAULTS["start_radius"],
        increasing=True,
        operation="critical_radius",
        max_expansions=FREE_BOUNDARY_DEFAULTS["max_doublings"],
    )
    if bracket.lower == bracket.upper:
        return bracket.lower
    result = bisect(
        residual,
        bracket.lower,
        bracket.upper,
        operation="critical_radius",
        f_tol=residual_tolerance(bracket.lower, p, tol),
        f_lower=bracket.f_lower,
        f_upper=bracket.f_upper,
        rel_width=FREE_BOUNDARY_DEFAULTS["rel_width"],
    )
    logger.debug(f"critical_radius: R_c={result.root:.12g} after {result.iterations} iterations")
    return result.root


# =============================================================================
# NECROTIC FRACTION
# =============================================================================

def necrotic_fraction(R: float, p: ModelParams, tol: float = SOLVER_DEFAULTS["tol"]) -> float:
    """
    Necrotic fraction eta(R), the unique zero of F(., R) in [0, 1).

    Args:
        R: Radius, R >= R_c
        p: Model parameters
        tol: Residual tolerance

    Returns:
        eta in [0, 1); exactly 0 at R = R_c

    Raises:
        DomainError: R < R_c (no necrotic core exists)
        BracketError: F does not turn positive below eta = 1 - 1e-6
    """
    if not (R > 0.0 and math.isfinite(R)):
        raise DomainError("R", R, "must be positive and finite")
    R_c = critical_radius(p, tol)
    if R < R_c:
        raise DomainError("R", R, f"below the critical radius {R_c:.12g}; no necrotic core exists")
    if R == R_c:
        return 0.0

    def residual(eta: float) -> float:
        return threshold_residual(eta, R, p, tol)

    f_zero = residual(0.0)
    if f_zero <= 0.0:
        # F(0, R) >= 0 to solver accuracy: the core has not opened yet.
        return 0.0
    ceiling = FREE_BOUNDARY_DEFAULTS["eta_ceiling"]
    f_ceiling = residual(ceiling)
    if f_ceiling >= 0.0:
        raise BracketError("necrotic_fraction", 0.0, ceiling, 1)

    result = bisect(
        residual,
        0.0,
        ceiling,
        operation="necrotic_fraction",
        f_tol=residual_tolerance(R, p, tol),
        f_lower=f_zero,
        f_upper=f_ceiling,
        abs_width=FREE_BOUNDARY_DEFAULTS["rel_width"],
    )
    logger.debug(f"necrotic_fraction R={R:.6g}: eta={result.root:.12g} residual={result.value:.3e}")
    return result.root


def radius_for_fraction(eta: float, p: ModelParams, tol: float = SOLVER_DEFAULTS["tol"]) -> float:
    """
    Radius R(eta) whose necrotic fraction is eta; R(0) = R_c.

    Raises:
        DomainError: eta outside [0, 1)
        BracketError: No sign change within 60 doublings
    """
    if not (0.0 <= eta < 1.0):
        raise DomainError("eta", eta, "must lie in [0, 1)")
    if eta == 0.0:
        return critical_radius(p, tol)
    ensure_valid(p)

    def residual(R: float) -> float:
        return threshold_residual(eta, R, p, tol)

    bracket = find_bracket(
        residual,
        FREE_BOUNDARY_DEFAULTS["start_radius"],
        increasing=True,
        operation="radius_for_fraction",
        max_expansions=FREE_BOUNDARY_DEFAULTS["max_doublings"],
    )
    if bracket.lower == bracket.upper:
        return bracket.lower
    result = bisect(
        residual,
        bracket.lower,
        bracket.upper,
        operation="radius_for_fraction",
        f_tol=residual_tolerance(bracket.lower, p, tol),
        f_lower=bracket.f_lower,
        f_upper=bracket.f_upper,
        rel_width=FREE_BOUNDARY_DEFAULTS["rel_width"],
    )
    return result.root


# =============================================================================
# STATE ASSEMBLY
# =============================================================================

def assemble_state(R: float, p: ModelParams, tol: float = SOLVER_DEFAULTS["tol"]) -> TumorState:
    """
    Build the stationary state of a tumor with radius R.

    R <= R_c gives a nonnecrotic state solved on [0, 1]. Otherwise eta
    is located and the profile is the shot from sigma_D on [eta, 1]; if
    that shot misses the boundary condition by more than tol (bisection
    ended on width) the profile is re-solved by full shooting.
    """
    if not (R > 0.0 and math.isfinite(R)):
        raise DomainError("R", R, "must be positive and finite")
    R_c = critical_radius(p, tol)

    if R <= R_c:
        profile = solve_profile(0.0, R, p, tol)
        return TumorState(R=R, phase=Phase.NONNECROTIC, eta=0.0, profile=profile, sigma_D=p.sigma_D)

    eta = necrotic_fraction(R, p, tol)
    if eta == 0.0:
        profile = solve_profile(0.0, R, p, tol)
    else:
        profile = profile_from_center(eta, R, p, p.sigma_D, tol)
        if abs(profile.robin_residual) > residual_tolerance(R, p, tol):
            profile = solve_profile(eta, R, p, tol)
    return TumorState(R=R, phase=Phase.NECROTIC, eta=eta, profile=profile, sigma_D=p.sigma_D)
