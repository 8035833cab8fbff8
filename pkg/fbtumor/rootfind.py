"""
Bracketing and bisection for the scalar root problems of the model.

Every root the library computes (center value, critical radius,
necrotic fraction, stationary radius, sigma*) is the sign change of a
residual that is monotone, or at least changes sign exactly once, in
its argument. Bisection is used throughout; it needs no derivatives and
tolerates residuals of +inf.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

from fbtumor.exceptions import BracketError, ConvergenceError, InternalConsistencyError

logger = logging.getLogger(__name__)

Residual = Callable[[float], float]

MAX_EXPANSIONS: int = 60
MAX_ITERATIONS: int = 400


@dataclass(frozen=True)
class Bracket:
    """An interval [lower, upper] across which the residual changes sign."""
    lower: float
    upper: float
    f_lower: float
    f_upper: float


@dataclass(frozen=True)
class BisectionResult:
    """
    Outcome of a bisection.

    Attributes:
        root: Best estimate of the sign change
        value: Residual at ``root``
        iterations: Residual evaluations spent inside the loop
        lower: Final bracket lower end
        upper: Final bracket upper end
        stopped_on: "residual" when |value| <= f_tol, "width" otherwise
    """
    root: float
    value: float
    iterations: int
    lower: float
    upper: float
    stopped_on: str


def _sign(value: float) -> int:
    return (value > 0.0) - (value < 0.0)


def find_bracket(
    func: Residual,
    start: float,
    *,
    increasing: bool,
    operation: str,
    factor: float = 2.0,
    max_expansions: int = MAX_EXPANSIONS
) -> Bracket:
    """
    Bracket the root of a sign-changing residual on (0, inf).

    Starting at ``start`` the argument is multiplied (or divided) by
    ``factor`` until the residual changes sign.

    Args:
        func: Residual, negative below the root when ``increasing``
        start: Positive starting point
        increasing: Direction of the sign change
        operation: Name used in errors and logs
        factor: Expansion factor (> 1)
        max_expansions: Give up after this many expansions

    Returns:
        Bracket with lower < upper (or lower == upper on an exact zero)

    Raises:
        BracketError: No sign change within the expansion budget
    """
    x0 = start
    f0 = func(x0)
    if f0 == 0.0:
        return Bracket(x0, x0, f0, f0)
    upward = (f0 < 0.0) == increasing
    x, fx = x0, f0
    for expansion in range(1, max_expansions + 1):
        nxt = x * factor if upward else x / factor
        f_nxt = func(nxt)
        if _sign(f_nxt) != _sign(fx):
            logger.debug(f"{operation}: bracketed after {expansion} expansions")
            if upward:
                return Bracket(x, nxt, fx, f_nxt)
            return Bracket(nxt, x, f_nxt, fx)
        x, fx = nxt, f_nxt
    lo, hi = (x0, x) if upward else (x, x0)
    raise BracketError(operation, lo, hi, max_expansions)


def bisect(
    func: Residual,
    lower: float,
    upper: float,
    *,
    operation: str,
    f_tol: float,
    f_lower: Optional[float] = None,
    f_upper: Optional[float] = None,
    rel_width: float = 0.0,
    abs_width: float = 0.0,
    monotone_slack: Optional[float] = None,
    max_iterations: int = MAX_ITERATIONS
) -> BisectionResult:
    """
    Bisect a sign change of ``func`` on [lower, upper].

    Stops when |func(mid)| <= f_tol or when the bracket width drops to
    max(abs_width, rel_width * max(|lower|, |upper|)).

    Args:
        func: Residual; +/-inf values are allowed
        lower: Bracket lower end
        upper: Bracket upper end
        operation: Name used in errors and logs
        f_tol: Residual tolerance
        f_lower: Known residual at ``lower`` (evaluated otherwise)
        f_upper: Known residual at ``upper`` (evaluated otherwise)
        rel_width: Relative width stopping criterion
        abs_width: Absolute width stopping criterion
        monotone_slack: When set, every sampled residual must lie between
            the residuals at the current bracket ends, up to this slack
        max_iterations: Evaluation budget

    Returns:
        BisectionResult

    Raises:
        InternalConsistencyError: No sign change, or a monotonicity breach
        ConvergenceError: Budget exhausted
    """
    lo, hi = lower, upper
    f_lo = func(lo) if f_lower is None else f_lower
    f_hi = func(hi) if f_upper is None else f_upper

    if f_lo == 0.0:
        return BisectionResult(lo, f_lo, 0, lo, hi, "residual")
    if f_hi == 0.0:
        return BisectionResult(hi, f_hi, 0, lo, hi, "residual")
    if _sign(f_lo) == _sign(f_hi):
        raise InternalConsistencyError(
            operation,
            f"residual does not change sign on [{lo:.6g}, {hi:.6g}] ({f_lo:.3e}, {f_hi:.3e})",
        )
    lo_sign = _sign(f_lo)

    for iteration in range(1, max_iterations + 1):
        mid = 0.5 * (lo + hi)
        f_mid = func(mid)

        if monotone_slack is not None and not math.isnan(f_mid):
            floor = min(f_lo, f_hi) - monotone_slack
            ceiling = max(f_lo, f_hi) + monotone_slack
            if not floor <= f_mid <= ceiling:
                raise InternalConsistencyError(
                    operation,
                    f"residual not monotone: {f_mid:.6e} at {mid:.15g} outside [{f_lo:.6e}, {f_hi:.6e}]",
                )

        if abs(f_mid) <= f_tol:
            return BisectionResult(mid, f_mid, iteration, lo, hi, "residual")

        if _sign(f_mid) == lo_sign:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid

        width_floor = max(abs_width, rel_width * max(abs(lo), abs(hi)))
        if hi - lo <= width_floor:
            # Report whichever end has the smaller residual.
            if abs(f_lo) <= abs(f_hi):
                return BisectionResult(lo, f_lo, iteration, lo, hi, "width")
            return BisectionResult(hi, f_hi, iteration, lo, hi, "width")

    raise ConvergenceError(operation, "bisection budget exhausted", iterations=max_iterations)
