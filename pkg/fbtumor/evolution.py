"""
FBTumor - Radius Evolution

Integrates R'(t) = R G(R), detects necrotic/nonnecrotic transitions
and decides the long-time fate of the tumor.

Features:
- Step-by-step RK45 on y = ln R, so decays by eight orders of
  magnitude keep full relative accuracy
- Per-trajectory G cache with monotone (PCHIP) interpolation
- Transition time located by bisection on the step's dense output
- Horizon extension for ``fate`` driven by tenacity retries

Version: 1.0.0
"""

from __future__ import annotations

import logging
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from enum import Enum
from itertools import count
from typing import Any, Dict, Iterable, Iterator, List, Optional, Set, Tuple

import numpy as np
from scipy.integrate import RK45
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from tenacity import Retrying, before_sleep_log, retry_if_result, stop_after_attempt, wait_none

from fbtumor.exceptions import ConvergenceError, DomainError
from fbtumor.free_boundary import Phase, TumorState, assemble_state, critical_radius
from fbtumor.model_core import ModelParams, ensure_valid
from fbtumor.monitoring import MetricsCollector
from fbtumor.stationary import growth_functional, stationary_radius

logger = logging.getLogger(__name__)

EVOLUTION_DEFAULTS: Dict[str, Any] = {
    "tol": 1e-8,
    "convergence_eps": 1e-6,
    "max_steps": 1_000_000,
    "solver_tol": 1e-10,
    "vanish_ratio": 1e-8,
    "seed_per_efold": 4.0,
    "seed_min": 9,
    "seed_max": 33,
    "horizon_scale": 30.0,
    "max_attempts": 30,
}


class Direction(Enum):
    """Direction of a phase transition."""
    NECROTIC_TO_NONNECROTIC = "necrotic_to_nonnecrotic"
    NONNECROTIC_TO_NECROTIC = "nonnecrotic_to_necrotic"


class VerdictKind(Enum):
    VANISHES = "vanishes"
    CONVERGES = "converges"
    MAX_TIME_REACHED = "max_time_reached"


@dataclass(frozen=True)
class Verdict:
    """Long-time behaviour; R_s is set for CONVERGES."""
    kind: VerdictKind
    R_s: Optional[float] = None

    @property
    def terminal(self) -> bool:
        return self.kind is not VerdictKind.MAX_TIME_REACHED


@dataclass(frozen=True)
class Sample:
    """One accepted step: time, radius, phase and G(R)."""
    t: float
    R: float
    phase: Phase
    growth: float


@dataclass(frozen=True)
class Transition:
    T: float
    direction: Direction
    R: float


@dataclass(frozen=True)
class EvolutionOptions:
    """
    Integration settings.

    Attributes:
        tol: Integrator rtol/atol on ln R; also the G-cache acceptance tolerance
        max_steps: Accepted-step budget
        convergence_eps: Relative distance to R_s counted as converged
        solver_tol: Tolerance of the nested profile and root solves
    """
    tol: float = EVOLUTION_DEFAULTS["tol"]
    max_steps: int = EVOLUTION_DEFAULTS["max_steps"]
    convergence_eps: float = EVOLUTION_DEFAULTS["convergence_eps"]
    solver_tol: float = EVOLUTION_DEFAULTS["solver_tol"]

    def __post_init__(self) -> None:
        for name in ("tol", "convergence_eps", "solver_tol"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise DomainError(name, value, "must be positive and finite")
        if int(self.max_steps) < 1:
            raise DomainError("max_steps", self.max_steps, "must be at least 1")


@dataclass(frozen=True)
class Trajectory:
    """
    Sampled solution of R'(t) = R G(R).

    Attributes:
        R0: Initial radius
        t_end: Requested horizon
        samples: Accepted steps (plus one sample at each transition)
        transitions: Phase changes, at most one
        verdict: Long-time classification reached within the horizon
        R_c: Critical radius used for the phase split
        R_s: Stationary radius, None when sigma_bar <= sigma_tilde
        steps: Accepted integrator steps
        diagnostics: Cache and integrator statistics
    """
    R0: float
    t_end: float
    samples: Tuple[Sample, ...]
    transitions: Tuple[Transition, ...]
    verdict: Verdict
    R_c: float
    R_s: Optional[float]
    steps: int
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def radii(self) -> np.ndarray:
        return np.array([s.R for s in self.samples])

    @property
    def final(self) -> Sample:
        return self.samples[-1]

    def to_rows(self) -> List[List[Any]]:
        """CSV rows t, R, phase."""
        return [[s.t, s.R, s.phase.value] for s in self.samples]

    def sidecar(self) -> Dict[str, Any]:
        """JSON sidecar for the trajectory CSV."""
        return {
            "verdict": self.verdict.kind.value,
            "R_s": self.R_s,
            "transitions": [{"T": tr.T, "direction": tr.direction.value} for tr in self.transitions],
            "R0": self.R0,
            "t_end": self.t_end,
        }


# =============================================================================
# GROWTH CACHE
# =============================================================================

class GrowthCache:
    """
    Memo of G on visited radii with monotone interpolation in ln R.

    A query inside a cached interval is answered by the PCHIP interpolant
    once that interval is trusted. An interval becomes trusted when an
    exact evaluation inside it agreed with the interpolant to within
    ``tol``, or when G differs by at most ``tol`` across it. Any other
    query is evaluated exactly and inserted as a new node.
    """

    def __init__(
        self,
        p: ModelParams,
        tol: float,
        solver_tol: float,
        metrics: Optional[MetricsCollector] = None
    ) -> None:
        self.p = p
        self.tol = tol
        self.solver_tol = solver_tol
        self.metrics = metrics or MetricsCollector()
        self._x: List[float] = []
        self._g: List[float] = []
        self._trusted: Set[Tuple[float, float]] = set()
        self._interpolant: Optional[PchipInterpolator] = None

    def __len__(self) -> int:
        return len(self._x)

    def __call__(self, R: float) -> float:
        return self.at_log(math.log(R))

    def seed(self, radii: Iterable[float]) -> None:
        """Evaluate and insert G at the given radii."""
        for R in radii:
            self.at_log(math.log(R))

    def exact(self, R: float) -> float:
        with self.metrics.timer("growth_eval_seconds"):
            value = growth_functional(R, self.p, self.solver_tol)
        self.metrics.increment("growth_exact")
        return value

    def at_log(self, x: float) -> float:
        """G(e^x), interpolated when the enclosing interval is trusted."""
        i = bisect_left(self._x, x)
        n = len(self._x)
        if i < n and self._x[i] == x:
            self.metrics.increment("growth_hits")
            return self._g[i]

        inside = 0 < i < n
        if inside:
            interval = (self._x[i - 1], self._x[i])
            if interval in self._trusted:
                self.metrics.increment("growth_hits")
                return float(self._spline()(x))

        value = self.exact(math.exp(x))
        agreed = False
        if inside:
            agreed = abs(float(self._spline()(x)) - value) <= self.tol
            self._trusted.discard(interval)

        self._x.insert(i, x)
        self._g.insert(i, value)
        self._interpolant = None
        for j in (i - 1, i):
            if 0 <= j < len(self._x) - 1:
                pair = (self._x[j], self._x[j + 1])
                if (inside and agreed) or abs(self._g[j + 1] - self._g[j]) <= self.tol:
                    self._trusted.add(pair)
        return value

    def _spline(self) -> PchipInterpolator:
        if self._interpolant is None:
            self._interpolant = PchipInterpolator(np.array(self._x), np.array(self._g))
        return self._interpolant

    def stats(self) -> Dict[str, float]:
        return {
            "nodes": float(len(self._x)),
            "exact": self.metrics.counter("growth_exact"),
            "hits": self.metrics.counter("growth_hits"),
        }


def _seed_radii(R0: float, R_s: Optional[float], R_c: float, vanish_floor: float) -> List[float]:
    """Coarse geometric grid spanning the path from R0 to its limit."""
    if R_s is not None:
        lower, upper = min(R0, R_s) / 1.05, max(R0, R_s) * 1.05
    else:
        lower, upper = vanish_floor * 0.9, R0 * 1.05
    efolds = math.log(upper / lower)
    points = int(np.clip(
        math.ceil(EVOLUTION_DEFAULTS["seed_per_efold"] * efolds) + 1,
        EVOLUTION_DEFAULTS["seed_min"],
        EVOLUTION_DEFAULTS["seed_max"],
    ))
    radii = list(np.geomspace(lower, upper, points))
    if lower < R_c < upper:
        radii.append(R_c)
    return sorted(radii)


# =============================================================================
# EVOLUTION
# =============================================================================

def _phase_of(R: float, R_c: float) -> Phase:
    return Phase.NONNECROTIC if R <= R_c else Phase.NECROTIC


def _locate_crossing(dense: Any, t_lo: float, t_hi: float, y_c: float, before: Phase, width: float) -> float:
    """First time in [t_lo, t_hi] at which the phase differs from ``before``."""
    def still_before(t: float) -> bool:
        y = float(dense(t)[0])
        return (y <= y_c) == (before is Phase.NONNECROTIC)

    while t_hi - t_lo > width:
        mid = 0.5 * (t_lo + t_hi)
        if still_before(mid):
            t_lo = mid
        else:
            t_hi = mid
    return t_hi


def evolve(
    R0: float,
    t_end: float,
    p: ModelParams,
    opts: Optional[EvolutionOptions] = None,
    cache: Optional[GrowthCache] = None
) -> Trajectory:
    """
    Integrate the radius from R0 up to t_end or an early verdict.

    Args:
        R0: Initial radius
        t_end: Horizon
        p: Model parameters
        opts: Integration settings
        cache: G cache to reuse (must belong to the same parameters)

    Returns:
        Trajectory; the verdict is CONVERGES once |R - R_s| / R_s <=
        convergence_eps, VANISHES once R <= 1e-8 R0, else MAX_TIME_REACHED

    Raises:
        DomainError: R0 or t_end not positive
        ConvergenceError: Step budget exhausted; ``partial`` holds the
            trajectory so far
    """
    opts = opts or EvolutionOptions()
    if not (R0 > 0.0 and math.isfinite(R0)):
        raise DomainError("R0", R0, "must be positive and finite")
    if not (t_end > 0.0 and math.isfinite(t_end)):
        raise DomainError("t_end", t_end, "must be positive and finite")
    ensure_valid(p)

    R_c = critical_radius(p, opts.solver_tol)
    R_s = stationary_radius(p, opts.solver_tol)
    vanish_floor = EVOLUTION_DEFAULTS["vanish_ratio"] * R0
    if cache is None:
        cache = GrowthCache(p, opts.tol, opts.solver_tol)
    if len(cache) == 0:
        cache.seed(_seed_radii(R0, R_s, R_c, vanish_floor))

    y_c = math.log(R_c)
    event_width = opts.tol * t_end
    phase = _phase_of(R0, R_c)
    samples: List[Sample] = [Sample(0.0, R0, phase, cache(R0))]
    transitions: List[Transition] = []
    verdict: Optional[Verdict] = None
    if R_s is not None and abs(R0 - R_s) / R_s <= opts.convergence_eps:
        verdict = Verdict(VerdictKind.CONVERGES, R_s)

    def build(final: Verdict, steps: int) -> Trajectory:
        return Trajectory(
            R0=R0,
            t_end=t_end,
            samples=tuple(samples),
            transitions=tuple(transitions),
            verdict=final,
            R_c=R_c,
            R_s=R_s,
            steps=steps,
            diagnostics=cache.stats(),
        )

    solver = RK45(
        lambda t, y: np.array([cache.at_log(float(y[0]))]),
        0.0,
        np.array([math.log(R0)]),
        t_end,
        rtol=opts.tol,
        atol=opts.tol,
    )
    steps = 0
    while verdict is None and solver.status == "running":
        if steps >= opts.max_steps:
            partial = build(Verdict(VerdictKind.MAX_TIME_REACHED), steps)
            raise ConvergenceError(
                "evolve",
                f"step budget exhausted at t={solver.t:.6g} < t_end={t_end:.6g}",
                iterations=steps,
                partial=partial,
            )
        message = solver.step()
        if solver.status == "failed":
            raise ConvergenceError(
                "evolve", str(message), iterations=steps, partial=build(Verdict(VerdictKind.MAX_TIME_REACHED), steps)
            )
        steps += 1
        y_start = float(solver.y_old[0])
        t, y = float(solver.t), float(solver.y[0])
        R = math.exp(y)

        new_phase = _phase_of(R, R_c)
        if new_phase is not phase and y_start == y_c:
            # Leaving R_c from the tie at R0 = R_c is not a crossing.
            phase = new_phase
        elif new_phase is not phase:
            dense = solver.dense_output()
            T = _locate_crossing(dense, float(solver.t_old), t, y_c, phase, event_width)
            direction = (
                Direction.NONNECROTIC_TO_NECROTIC
                if phase is Phase.NONNECROTIC
                else Direction.NECROTIC_TO_NONNECROTIC
            )
            R_T = math.exp(float(dense(T)[0]))
            transitions.append(Transition(T, direction, R_T))
            if T < t:
                samples.append(Sample(T, R_T, new_phase, cache(R_T)))
            logger.info(f"evolve: {direction.value} at T={T:.10g} (R={R_T:.10g})")
            phase = new_phase

        samples.append(Sample(t, R, phase, float(solver.f[0])))

        if R_s is not None and abs(R - R_s) / R_s <= opts.convergence_eps:
            verdict = Verdict(VerdictKind.CONVERGES, R_s)
        elif R <= vanish_floor:
            verdict = Verdict(VerdictKind.VANISHES)

    final = verdict or Verdict(VerdictKind.MAX_TIME_REACHED)
    trajectory = build(final, steps)
    logger.info(
        f"evolve R0={R0:.6g}: {final.kind.value} after {steps} steps "
        f"(t={samples[-1].t:.6g}, exact G evaluations={trajectory.diagnostics['exact']:.0f})"
    )
    return trajectory


def transient_profile(
    traj: Trajectory,
    t: float,
    p: ModelParams,
    tol: Optional[float] = None
) -> TumorState:
    """
    Quasi-static state sigma(r, t) at time t of a trajectory.

    R(t) is interpolated by cubic Hermite segments using R' = R G(R) at
    the neighbouring samples.

    Raises:
        DomainError: t outside [0, last sample time]
    """
    solver_tol = EVOLUTION_DEFAULTS["solver_tol"] if tol is None else tol
    times = traj.times()
    if not (0.0 <= t <= times[-1]):
        raise DomainError("t", t, f"must lie in [0, {times[-1]:.6g}]")

    k = int(np.searchsorted(times, t, side="left"))
    if k < len(times) and times[k] == t:
        R = traj.samples[k].R
    else:
        left, right = traj.samples[k - 1], traj.samples[k]
        segment = CubicHermiteSpline(
            [left.t, right.t],
            [left.R, right.R],
            [left.R * left.growth, right.R * right.growth],
        )
        R = float(segment(t))
    return assemble_state(R, p, solver_tol)


# =============================================================================
# FATE
# =============================================================================

@dataclass(frozen=True)
class FateResult:
    """
    Long-time fate of a tumor.

    Attributes:
        verdict: Terminal verdict, or MAX_TIME_REACHED when the cap hit
        T_transition: Time of the single phase transition, if any
        direction: Direction of that transition
        trajectory: The last trajectory computed
        attempts: Number of horizons tried
        horizon: Last horizon used
        diagnostics: Why the search stopped, when it did not reach a verdict
    """
    verdict: Verdict
    T_transition: Optional[float]
    direction: Optional[Direction]
    trajectory: Optional[Trajectory]
    attempts: int
    horizon: float
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict.kind.value,
            "R_s": self.verdict.R_s,
            "T_transition": self.T_transition,
            "direction": self.direction.value if self.direction else None,
            "attempts": self.attempts,
            "horizon": self.horizon,
            "diagnostics": self.diagnostics,
        }


def initial_horizon(p: ModelParams) -> float:
    """30 / rate, where rate = min(nu, |g(sigma_bar)|) (nu if g(sigma_bar) = 0)."""
    g_bar = abs(float(p.g.eval(p.sigma_bar)))
    rate = min(p.nu, g_bar) if g_bar > 0.0 else p.nu
    return EVOLUTION_DEFAULTS["horizon_scale"] / rate


def fate(
    R0: float,
    p: ModelParams,
    opts: Optional[EvolutionOptions] = None,
    horizon: Optional[float] = None,
    max_attempts: int = EVOLUTION_DEFAULTS["max_attempts"]
) -> FateResult:
    """
    Evolve with a doubling horizon until a terminal verdict.

    One G cache is shared by all attempts. A step-budget overflow ends
    the search with MAX_TIME_REACHED and diagnostics.

    Args:
        R0: Initial radius
        p: Model parameters
        opts: Integration settings
        horizon: First horizon (default ``initial_horizon(p)``)
        max_attempts: Maximum number of horizons

    Returns:
        FateResult
    """
    opts = opts or EvolutionOptions()
    ensure_valid(p)
    first = initial_horizon(p) if horizon is None else horizon
    if not (first > 0.0):
        raise DomainError("horizon", horizon, "must be positive")

    cache = GrowthCache(p, opts.tol, opts.solver_tol)
    horizons: Iterator[float] = (first * 2.0 ** k for k in count())
    attempts: List[float] = []

    def attempt() -> Trajectory:
        t_end = next(horizons)
        attempts.append(t_end)
        return evolve(R0, t_end, p, opts, cache)

    retrying = Retrying(
        stop=stop_after_attempt(max_attempts),
        retry=retry_if_result(lambda traj: not traj.verdict.terminal),
        wait=wait_none(),
        retry_error_callback=lambda state: state.outcome.result(),
        before_sleep=before_sleep_log(logger, logging.DEBUG),
        reraise=True,
    )
    try:
        trajectory: Optional[Trajectory] = retrying(attempt)
        diagnostics: Dict[str, Any] = {}
    except ConvergenceError as exc:
        logger.warning(f"fate R0={R0:.6g}: {exc.message}")
        trajectory = exc.partial
        diagnostics = {"reason": exc.message, "steps": exc.iterations}

    assert trajectory is not None
    verdict = trajectory.verdict
    if not verdict.terminal and not diagnostics:
        diagnostics = {"reason": f"no terminal verdict within {len(attempts)} horizons"}
    transition = trajectory.transitions[0] if trajectory.transitions else None
    return FateResult(
        verdict=verdict,
        T_transition=transition.T if transition else None,
        direction=transition.direction if transition else None,
        trajectory=trajectory,
        attempts=len(attempts),
        horizon=attempts[-1] if attempts else first,
        diagnostics=diagnostics,
    )
