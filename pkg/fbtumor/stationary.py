"""
FBTumor - Stationary Tumors

Growth functional G(R), the stationary (dormant) radius R_s, and the
nutrient thresholds sigma_tilde and sigma* that classify dormant tumors.

Version: 1.0.0
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from scipy.integrate import simpson

from fbtumor.exceptions import BracketError, InternalConsistencyError
from fbtumor.free_boundary import Phase, TumorState, assemble_state, critical_radius
from fbtumor.model_core import FLAT_BRANCH_THRESHOLD, ModelParams, ensure_valid
from fbtumor.profile_solver import SOLVER_DEFAULTS
from fbtumor.rootfind import bisect, find_bracket

logger = logging.getLogger(__name__)

STATIONARY_DEFAULTS: Dict[str, Any] = {
    "start_radius": 1.0,
    "max_doublings": 60,
    "rel_width": 1e-14,
    # G-root residual stop in units of tol; |G'| near R_s can be well below 1.
    "residual_factor": 1e-2,
    "sigma_star_offset": 1e-9,
}


class Classification(Enum):
    """Dormant-tumor trichotomy."""
    NO_DORMANT = "no_dormant"
    NONNECROTIC_DORMANT = "nonnecrotic_dormant"
    NECROTIC_DORMANT = "necrotic_dormant"


@dataclass(frozen=True)
class GrowthBreakdown:
    """
    Terms of the growth functional at one radius.

    Attributes:
        R: Radius
        proliferation: Integral of g(U(s)) s^2 over [eta, 1]
        dissolution: nu * eta^3 / 3 (0 when nonnecrotic)
        G: proliferation - dissolution
        volume_rate: R^3 G, i.e. R^2 dR/dt
        state: The assembled state the integral was taken over
    """
    R: float
    proliferation: float
    dissolution: float
    G: float
    volume_rate: float
    state: TumorState


@dataclass(frozen=True)
class Thresholds:
    """sigma_tilde, sigma* and R_c evaluated at sigma_bar = sigma*."""
    sigma_tilde: float
    sigma_star: float
    R_c_at_sigma_star: float

    def to_dict(self) -> Dict[str, float]:
        return {
            "sigma_tilde": self.sigma_tilde,
            "sigma_star": self.sigma_star,
            "R_c_at_sigma_star": self.R_c_at_sigma_star,
        }


@dataclass(frozen=True)
class StationaryResult:
    """
    Existence and structure of the dormant tumor.

    Attributes:
        exists: True iff sigma_bar > sigma_tilde
        R_s: Stationary radius when it exists
        state: Stationary state when it exists
        sigma_tilde: Proliferation-neutral concentration
        sigma_star: Necrotic-dormancy threshold (None when not requested)
        classification: Trichotomy label
        R_c: Critical radius of the parameter set
        flags: Numerical caveats (e.g. a near-flat necrotic branch)
    """
    exists: bool
    R_s: Optional[float]
    state: Optional[TumorState]
    sigma_tilde: float
    sigma_star: Optional[float]
    classification: Classification
    R_c: float
    flags: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        """Output schema of the ``stationary`` command."""
        return {
            "exists": self.exists,
            "R_s": self.R_s,
            "eta": self.state.eta if self.state is not None else None,
            "rho": self.state.rho if self.state is not None else None,
            "classification": self.classification.value,
            "sigma_tilde": self.sigma_tilde,
            "sigma_star": self.sigma_star,
            "R_c": self.R_c,
            "flags": list(self.flags),
        }


# =============================================================================
# GROWTH FUNCTIONAL
# =============================================================================

def growth_breakdown(R: float, p: ModelParams, tol: float = SOLVER_DEFAULTS["tol"]) -> GrowthBreakdown:
    """
    Evaluate G(R) term by term.

    Simpson quadrature of g(U(s)) s^2 on the profile grid; the
    dissolution term nu eta^3 / 3 is subtracted on the necrotic branch.
    At R = R_c the nonnecrotic branch is used.
    """
    state = assemble_state(R, p, tol)
    profile = state.profile
    integrand = np.asarray(p.g.eval(profile.u)) * profile.s_grid ** 2
    proliferation = float(simpson(integrand, x=profile.s_grid))
    dissolution = p.nu * state.eta ** 3 / 3.0 if state.phase is Phase.NECROTIC else 0.0
    G = proliferation - dissolution
    return GrowthBreakdown(
        R=R,
        proliferation=proliferation,
        dissolution=dissolution,
        G=G,
        volume_rate=R ** 3 * G,
        state=state,
    )


def growth_functional(R: float, p: ModelParams, tol: float = SOLVER_DEFAULTS["tol"]) -> float:
    """Normalized net growth rate G(R) = R'(t) / R(t)."""
    return growth_breakdown(R, p, tol).G


# =============================================================================
# STATIONARY RADIUS AND THRESHOLDS
# =============================================================================

def stationary_radius(p: ModelParams, tol: float = SOLVER_DEFAULTS["tol"]) -> Optional[float]:
    """
    Unique positive root R_s of G, or None when sigma_bar <= sigma_tilde.

    Raises:
        BracketError: G keeps one sign over the doubling search
        InternalConsistencyError: G sampled non-monotone during bisection
    """
    ensure_valid(p)
    if p.sigma_bar <= p.sigma_tilde:
        return None

    def G(R: float) -> float:
        return growth_functional(R, p, tol)

    bracket = find_bracket(
        G,
        STATIONARY_DEFAULTS["start_radius"],
        increasing=False,
        operation="stationary_radius",
        max_expansions=STATIONARY_DEFAULTS["max_doublings"],
    )
    if bracket.lower == bracket.upper:
        return bracket.lower
    result = bisect(
        G,
        bracket.lower,
        bracket.upper,
        operation="stationary_radius",
        f_tol=STATIONARY_DEFAULTS["residual_factor"] * tol,
        f_lower=bracket.f_lower,
        f_upper=bracket.f_upper,
        rel_width=STATIONARY_DEFAULTS["rel_width"],
        monotone_slack=1e3 * tol,
    )
    logger.debug(f"stationary_radius: R_s={result.root:.12g} G={result.value:.3e}")
    return result.root


def _growth_at_critical(p: ModelParams, sigma_bar: float, tol: float) -> float:
    """G(R_c(sigma_bar)) with every other parameter fixed."""
    shifted = p.replace(sigma_bar=sigma_bar)
    return growth_functional(critical_radius(shifted, tol), shifted, tol)


def sigma_star(p: ModelParams, tol: float = SOLVER_DEFAULTS["tol"]) -> float:
    """
    Threshold sigma* > sigma_tilde where G(R_c(sigma_bar)) changes sign.

    The ``sigma_bar`` of ``p`` is ignored.

    Raises:
        InternalConsistencyError: G(R_c) is not negative just above sigma_tilde
        BracketError: G(R_c) stays negative over 60 doublings
    """
    ensure_valid(p)
    sigma_tilde = p.sigma_tilde
    lower = sigma_tilde * (1.0 + STATIONARY_DEFAULTS["sigma_star_offset"])
    f_lower = _growth_at_critical(p, lower, tol)
    if not f_lower < 0.0:
        raise InternalConsistencyError(
            "sigma_star",
            f"G(R_c) = {f_lower:.3e} is not negative at sigma_bar = sigma_tilde",
        )

    upper = 2.0 * sigma_tilde
    f_upper = _growth_at_critical(p, upper, tol)
    doublings = 0
    while f_upper <= 0.0:
        doublings += 1
        if doublings > STATIONARY_DEFAULTS["max_doublings"]:
            raise BracketError("sigma_star", lower, upper, doublings)
        lower, f_lower = upper, f_upper
        upper *= 2.0
        f_upper = _growth_at_critical(p, upper, tol)

    result = bisect(
        lambda sb: _growth_at_critical(p, sb, tol),
        lower,
        upper,
        operation="sigma_star",
        f_tol=STATIONARY_DEFAULTS["residual_factor"] * tol,
        f_lower=f_lower,
        f_upper=f_upper,
        rel_width=STATIONARY_DEFAULTS["rel_width"],
    )
    logger.info(f"sigma_star={result.root:.12g} (sigma_tilde={sigma_tilde:.6g})")
    return result.root


def thresholds(p: ModelParams, tol: float = SOLVER_DEFAULTS["tol"]) -> Thresholds:
    """sigma_tilde, sigma* and R_c(sigma*)."""
    star = sigma_star(p, tol)
    return Thresholds(
        sigma_tilde=p.sigma_tilde,
        sigma_star=star,
        R_c_at_sigma_star=critical_radius(p.replace(sigma_bar=star), tol),
    )


def classify(
    p: ModelParams,
    tol: float = SOLVER_DEFAULTS["tol"],
    with_sigma_star: bool = True
) -> StationaryResult:
    """
    Decide existence and structure of the dormant tumor.

    NonnecroticDormant iff R_s <= R_c, read off the phase of the
    assembled stationary state. sigma* does not depend on sigma_bar;
    sweeps over sigma_bar pass with_sigma_star=False to skip it.
    """
    ensure_valid(p)
    flags: List[str] = []
    if near_flat(p):
        flags.append("near_flat_necrotic_branch")
        logger.warning(
            f"|g(sigma_D) + nu| < {FLAT_BRANCH_THRESHOLD:g}: G is nearly flat on the necrotic branch; "
            "R_s accuracy is limited by the bisection tolerance"
        )

    star = sigma_star(p, tol) if with_sigma_star else None
    R_c = critical_radius(p, tol)
    R_s = stationary_radius(p, tol)
    if R_s is None:
        result = StationaryResult(
            exists=False,
            R_s=None,
            state=None,
            sigma_tilde=p.sigma_tilde,
            sigma_star=star,
            classification=Classification.NO_DORMANT,
            R_c=R_c,
            flags=flags,
        )
    else:
        state = assemble_state(R_s, p, tol)
        label = (
            Classification.NONNECROTIC_DORMANT
            if state.phase is Phase.NONNECROTIC
            else Classification.NECROTIC_DORMANT
        )
        result = StationaryResult(
            exists=True,
            R_s=R_s,
            state=state,
            sigma_tilde=p.sigma_tilde,
            sigma_star=star,
            classification=label,
            R_c=R_c,
            flags=flags,
        )
    logger.info(f"classify: {result.classification.value} R_s={R_s} R_c={R_c:.12g}")
    return result


def growth_limits(p: ModelParams) -> Dict[str, float]:
    """Limits of G: g(sigma_bar)/3 as R -> 0 and -nu/3 as R -> inf."""
    return {"small_radius": float(p.g.eval(p.sigma_bar)) / 3.0, "large_radius": -p.nu / 3.0}


def near_flat(p: ModelParams) -> bool:
    """True when |g(sigma_D) + nu| is below the flat-branch threshold."""
    return math.fabs(float(p.g.eval(p.sigma_D)) + p.nu) < FLAT_BRANCH_THRESHOLD
