"""
FBTumor - Nutrient Profile Solver

Solves the rescaled stationary nutrient problem

    u'' + (2/s) u' = R^2 f(u)  on (eta, 1),
    u'(eta) = 0,  u'(1) + beta R (u(1) - sigma_bar) = 0

by shooting on the center value a = u(eta).

Features:
- Log-domain shooting: state (ln u, u'/u), so center values far below
  the double range (large R) stay representable
- Geometric bisection of a with a sampled monotonicity check
- Early-exit shots once u leaves (0, 2 sigma_bar)
- Closed-form profile for linear consumption, used as a test oracle
- CSV / JSON sidecar export

Version: 1.0.0
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, NamedTuple, Optional, Union

import numpy as np
from scipy.integrate import OdeSolution, solve_ivp
from scipy.interpolate import CubicHermiteSpline

from fbtumor.exceptions import ConvergenceError, DomainError, InternalConsistencyError
from fbtumor.model_core import ModelParams, RateFunction, ensure_valid
from fbtumor.monitoring import METRICS
from fbtumor.rootfind import bisect

logger = logging.getLogger(__name__)

SOLVER_DEFAULTS: Dict[str, Any] = {
    "tol": 1e-10,
    "grid_points": 1025,
    "method": "DOP853",
    "width_floor": 1e-14,
    "width_residual_factor": 1e3,
    "lower_margin": 40.0,
    "lower_extensions": 4,
    "escape_factor": 2.0,
    "taylor_step": 1e-6,
}

# Largest argument math.exp accepts without overflow.
_EXP_LIMIT = 709.0


def _exp(w: float) -> float:
    return math.exp(w) if w < _EXP_LIMIT else math.inf


def _check_arguments(eta: float, R: float, tol: float) -> None:
    if not (0.0 <= eta < 1.0):
        raise DomainError("eta", eta, "must lie in [0, 1)")
    if not (R > 0.0 and math.isfinite(R)):
        raise DomainError("R", R, "must be positive and finite")
    if not (tol > 0.0):
        raise DomainError("tol", tol, "must be positive")


# =============================================================================
# PROFILE TYPE
# =============================================================================

@dataclass(frozen=True)
class NutrientProfile:
    """
    Solution u(s) = U(s, eta, R) of the stationary nutrient problem.

    Attributes:
        eta: Rescaled inner boundary (necrotic fraction), 0 <= eta < 1
        R: Tumor radius
        s_grid: Uniform grid on [eta, 1]
        u: Concentration on the grid
        u_prime: du/ds on the grid
        robin_residual: u'(1) + beta R (u(1) - sigma_bar), or u(1) - sigma_bar
            in the Dirichlet limit
        log_center: ln u(eta); finite even when u(eta) underflows
        tol: Solver tolerance used
        iterations: Shooting iterations (0 for a single shot)
    """
    eta: float
    R: float
    s_grid: np.ndarray
    u: np.ndarray
    u_prime: np.ndarray
    robin_residual: float
    log_center: float
    tol: float
    iterations: int = 0

    @property
    def center_value(self) -> float:
        """u(eta)."""
        return math.exp(self.log_center)

    def u_at(self, s: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """
        Evaluate u between grid points by cubic Hermite interpolation.

        Raises:
            DomainError: s outside [eta, 1]
        """
        values = np.asarray(s, dtype=float)
        slack = 1e-12
        if np.any(values < self.eta - slack) or np.any(values > 1.0 + slack):
            raise DomainError("s", s, f"must lie in [{self.eta:.6g}, 1]")
        spline = CubicHermiteSpline(self.s_grid, self.u, self.u_prime)
        out = spline(np.clip(values, self.eta, 1.0))
        return float(out) if np.ndim(s) == 0 else out

    def bound_violations(self, p: ModelParams, slack: Optional[float] = None) -> List[str]:
        """
        List violated structural bounds of the profile.

        Checks 0 < u < sigma_bar, u'(eta) = 0, u' > 0 inside, u
        nondecreasing, u' <= s R^2 f(u) / 3 and u'' >= u'/s, the last
        by finite differences with slack 10 * (grid spacing).

        Returns:
            Human-readable descriptions; empty when every bound holds
        """
        slack = 100.0 * self.tol if slack is None else slack
        problems: List[str] = []
        s, u, du = self.s_grid, self.u, self.u_prime
        ds = float(s[1] - s[0])

        if np.any(u <= 0.0) and self.log_center > -700.0:
            problems.append("u <= 0")
        # u(1) = sigma_bar is imposed in the Dirichlet limit.
        ceiling = p.sigma_bar + slack if p.dirichlet else p.sigma_bar
        if np.any(u >= ceiling):
            problems.append("u >= sigma_bar")
        if abs(du[0]) > slack:
            problems.append(f"u'(eta) = {du[0]:.3e}")
        if np.any(du[1:] < -slack):
            problems.append("u' < 0 inside")
        if np.any(np.diff(u) < -slack):
            problems.append("u decreasing")

        upper = s * self.R ** 2 * np.asarray(p.f.eval(u)) / 3.0
        if np.any(du > upper * (1.0 + 1e-6) + slack):
            problems.append("u' > s R^2 f(u) / 3")

        inner = slice(1, -1)
        second = (du[2:] - du[:-2]) / (2.0 * ds)
        ratio = du[inner] / s[inner]
        scale = max(1.0, float(np.max(np.abs(second))) if second.size else 1.0)
        if np.any(second < ratio - 10.0 * ds * scale):
            problems.append("u'' < u'/s")
        return problems

    def to_rows(self) -> List[List[float]]:
        """CSV rows s, u, u_prime."""
        return [[float(a), float(b), float(c)] for a, b, c in zip(self.s_grid, self.u, self.u_prime)]

    def sidecar(self) -> Dict[str, Any]:
        """JSON sidecar for the profile CSV."""
        return {
            "eta": self.eta,
            "R": self.R,
            "robin_residual": self.robin_residual,
            "tol": self.tol,
        }


# =============================================================================
# SHOOTING
# =============================================================================

def residual_tolerance(R: float, p: ModelParams, tol: float) -> float:
    """
    Bound on the match residual that also bounds it as a concentration.

    The Robin residual carries a factor beta R, so for beta R < 1 the
    concentration error (residual / (beta R)) is the binding quantity.
    """
    if p.dirichlet:
        return tol
    return tol * min(1.0, p.beta * R)


class _Shot(NamedTuple):
    residual: float
    escaped: bool
    solution: Optional[OdeSolution]
    start: float


def _taylor_step(eta: float) -> float:
    h = SOLVER_DEFAULTS["taylor_step"] * (1.0 - eta)
    if eta > 0.0:
        h = min(h, 1e-3 * eta)
    return h


def _shoot(
    eta: float,
    R: float,
    p: ModelParams,
    log_a: float,
    tol: float,
    dense: bool = False
) -> _Shot:
    """
    Integrate the initial value problem from u(eta) = exp(log_a).

    The state is (w, q) = (ln u, u'/u), for which

        w' = q,  q' = R^2 f(u)/u - 2q/s - q^2.
    """
    ratio = p.f.ratio_function()
    R2 = R * R

    h = _taylor_step(eta)
    curvature = R2 * ratio(_exp(log_a))
    if eta == 0.0:
        curvature /= 3.0
    # u(eta + h) / a = 1 + curvature h^2 / 2, u'(eta + h) / a = curvature h
    grow = 0.5 * curvature * h * h
    y0 = np.array([log_a + math.log1p(grow), curvature * h / (1.0 + grow)])
    s0 = eta + h

    def rhs(s: float, y: np.ndarray) -> np.ndarray:
        w, q = y[0], y[1]
        return np.array([q, R2 * ratio(_exp(w)) - 2.0 * q / s - q * q])

    log_escape = math.log(SOLVER_DEFAULTS["escape_factor"] * p.sigma_bar)

    def escape(s: float, y: np.ndarray) -> float:
        return y[0] - log_escape

    escape.terminal = True  # type: ignore[attr-defined]
    escape.direction = 1  # type: ignore[attr-defined]

    sol = solve_ivp(
        rhs,
        (s0, 1.0),
        y0,
        method=SOLVER_DEFAULTS["method"],
        rtol=tol / 10.0,
        atol=tol / 10.0,
        events=escape,
        dense_output=dense,
    )
    if sol.status == -1:
        raise ConvergenceError("solve_profile", sol.message, iterations=int(sol.nfev))
    if sol.status == 1:
        return _Shot(math.inf, True, sol.sol, s0)

    w1, q1 = float(sol.y[0, -1]), float(sol.y[1, -1])
    u1 = _exp(w1)
    if p.dirichlet:
        residual = u1 - p.sigma_bar
    else:
        residual = q1 * u1 + p.beta * R * (u1 - p.sigma_bar)
    return _Shot(residual, False, sol.sol, s0)


def _bisect_center(eta: float, R: float, p: ModelParams, tol: float) -> tuple:
    """Find ln a with |phi(a)| <= tol; returns (log_a, residual, iterations)."""
    def residual(log_a: float) -> float:
        return _shoot(eta, R, p, log_a, tol).residual

    log_hi = math.log(p.sigma_bar)
    f_hi = residual(log_hi)
    if not f_hi > 0.0:
        raise InternalConsistencyError(
            "solve_profile",
            f"match residual {f_hi:.3e} at a = sigma_bar is not positive",
        )

    span = math.sqrt(p.f.M) * R * (1.0 - eta) + SOLVER_DEFAULTS["lower_margin"]
    log_lo = log_hi - span
    f_lo = residual(log_lo)
    extensions = 0
    while not f_lo < 0.0:
        extensions += 1
        if extensions > SOLVER_DEFAULTS["lower_extensions"]:
            raise InternalConsistencyError(
                "solve_profile",
                f"match residual does not change sign on (0, sigma_bar) for eta={eta:.6g}, R={R:.6g}",
            )
        log_lo -= span
        f_lo = residual(log_lo)

    f_tol = residual_tolerance(R, p, tol)
    relaxed = SOLVER_DEFAULTS["width_residual_factor"] * f_tol
    result = bisect(
        residual,
        log_lo,
        log_hi,
        operation="solve_profile",
        f_tol=f_tol,
        f_lower=f_lo,
        f_upper=f_hi,
        abs_width=SOLVER_DEFAULTS["width_floor"],
        monotone_slack=relaxed,
    )
    if result.stopped_on == "width" and abs(result.value) > relaxed:
        raise ConvergenceError(
            "solve_profile",
            f"bracket collapsed with residual {result.value:.3e}",
            iterations=result.iterations,
        )
    METRICS.histogram("shooting_iterations", float(result.iterations))
    logger.debug(
        f"solve_profile eta={eta:.6g} R={R:.6g}: ln a={result.root:.12g} "
        f"residual={result.value:.3e} iterations={result.iterations}"
    )
    return result.root, result.value, result.iterations


def _build_profile(
    eta: float,
    R: float,
    p: ModelParams,
    log_a: float,
    tol: float,
    grid_points: int,
    iterations: int
) -> NutrientProfile:
    shot = _shoot(eta, R, p, log_a, tol, dense=True)
    if shot.escaped or shot.solution is None:
        raise InternalConsistencyError(
            "solve_profile",
            f"profile from ln a={log_a:.6g} leaves (0, 2 sigma_bar)",
        )
    s_grid = np.linspace(eta, 1.0, grid_points)
    inner = np.maximum(s_grid[1:], shot.start)
    states = shot.solution(inner)
    w = np.concatenate(([log_a], states[0]))
    q = np.concatenate(([0.0], states[1]))
    with np.errstate(under="ignore"):
        u = np.exp(w)
    return NutrientProfile(
        eta=eta,
        R=R,
        s_grid=s_grid,
        u=u,
        u_prime=q * u,
        robin_residual=shot.residual,
        log_center=log_a,
        tol=tol,
        iterations=iterations,
    )


# =============================================================================
# PUBLIC API
# =============================================================================

def solve_profile(
    eta: float,
    R: float,
    p: ModelParams,
    tol: float = SOLVER_DEFAULTS["tol"],
    grid_points: int = SOLVER_DEFAULTS["grid_points"]
) -> NutrientProfile:
    """
    Solve for U(., eta, R) by shooting on the center value.

    Args:
        eta: Inner boundary, 0 <= eta < 1
        R: Tumor radius
        p: Model parameters satisfying (A1)-(A3)
        tol: Residual tolerance; integrator tolerances are tol / 10
        grid_points: Output grid size (odd keeps Simpson exact on the grid)

    Returns:
        NutrientProfile

    Raises:
        DomainError: Arguments outside the preconditions
        AssumptionViolationError: Invalid parameters
        InternalConsistencyError: The match residual does not bracket
        ConvergenceError: Integrator or bisection failure
    """
    _check_arguments(eta, R, tol)
    ensure_valid(p)
    log_a, _, iterations = _bisect_center(eta, R, p, tol)
    return _build_profile(eta, R, p, log_a, tol, grid_points, iterations)


def center_value(eta: float, R: float, p: ModelParams, tol: float = SOLVER_DEFAULTS["tol"]) -> float:
    """U(eta, eta, R): the converged shooting parameter."""
    _check_arguments(eta, R, tol)
    ensure_valid(p)
    log_a, _, _ = _bisect_center(eta, R, p, tol)
    return math.exp(log_a)


def threshold_residual(eta: float, R: float, p: ModelParams, tol: float = SOLVER_DEFAULTS["tol"]) -> float:
    """
    Match residual of a single shot started at a = sigma_D.

    The residual is increasing in a, so U(eta, eta, R) > sigma_D exactly
    when the returned value is negative. Returns +inf when the shot
    escapes above 2 sigma_bar.
    """
    _check_arguments(eta, R, tol)
    ensure_valid(p)
    return _shoot(eta, R, p, math.log(p.sigma_D), tol).residual


def profile_from_center(
    eta: float,
    R: float,
    p: ModelParams,
    a: float,
    tol: float = SOLVER_DEFAULTS["tol"],
    grid_points: int = SOLVER_DEFAULTS["grid_points"]
) -> NutrientProfile:
    """
    Profile of one shot from a known center value (no bisection).

    The free-boundary layer uses this with a = sigma_D once the
    necrotic fraction has been located.
    """
    _check_arguments(eta, R, tol)
    if not (0.0 < a <= p.sigma_bar):
        raise DomainError("a", a, "center value must lie in (0, sigma_bar]")
    ensure_valid(p)
    return _build_profile(eta, R, p, math.log(a), tol, grid_points, 0)


def closed_form_linear(
    s: Union[float, np.ndarray],
    eta: float,
    R: float,
    beta: float,
    sigma_bar: float,
    lam: float = 1.0
) -> Union[float, np.ndarray]:
    """
    Exact U(s, eta, R) for linear consumption f(u) = lam * u.

    With k = R sqrt(lam) and b = beta / sqrt(lam):

        U(s) = (C / s) [eta k cosh((s - eta) k) + sinh((s - eta) k)]
        C = b sigma_bar / [(eta k - 1/k + b) sinh((1 - eta) k)
                           + (1 - eta + b eta k) cosh((1 - eta) k)]

    evaluated with scaled exponentials so large k does not overflow.
    beta = inf gives the Dirichlet limit; at s = 0 (eta = 0) the limit
    C k is returned.

    Raises:
        DomainError: Arguments outside 0 <= eta <= s <= 1, R, beta,
            sigma_bar, lam > 0
    """
    values = np.asarray(s, dtype=float)
    if not (0.0 <= eta < 1.0):
        raise DomainError("eta", eta, "must lie in [0, 1)")
    if np.any(values < eta - 1e-12) or np.any(values > 1.0 + 1e-12):
        raise DomainError("s", s, f"must lie in [{eta:.6g}, 1]")
    for name, value in (("R", R), ("beta", beta), ("sigma_bar", sigma_bar), ("lam", lam)):
        if not value > 0.0:
            raise DomainError(name, value, "must be positive")

    root = math.sqrt(lam)
    k = R * root
    b = beta / root
    span = 1.0 - eta
    decay = math.exp(-2.0 * span * k)

    if math.isinf(b):
        prefactor = sigma_bar
        denominator = (1.0 - decay) + eta * k * (1.0 + decay)
    else:
        prefactor = b * sigma_bar
        denominator = (eta * k - 1.0 / k + b) * (1.0 - decay) + (span + b * eta * k) * (1.0 + decay)

    x = np.clip(values - eta, 0.0, span) * k
    tail = np.exp(x - span * k)
    with np.errstate(divide="ignore", invalid="ignore"):
        numerator = eta * k * (1.0 + np.exp(-2.0 * x)) - np.expm1(-2.0 * x)
        out = prefactor * numerator * tail / (values * denominator)
    at_origin = values == 0.0
    if np.any(at_origin):
        out = np.where(at_origin, prefactor * 2.0 * k * math.exp(-span * k) / denominator, out)
    return float(out) if np.ndim(s) == 0 else out
