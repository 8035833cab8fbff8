"""
FBTumor - Model Core

Rate functions, model parameters and the standing-assumption checks
(A1)-(A3) that every solver entry point relies on.

Features:
- Catalog rate functions with closed-form values and derivatives
- Custom rate functions with declared derivative bound M
- Sampling-based validation report for (A1)-(A3)
- JSON parameter schema round trip

Version: 1.0.0
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from fbtumor.exceptions import AssumptionViolationError, DomainError, ValidationError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Below this concentration f(u)/u is replaced by its limit f'(0).
RATIO_FLOOR: float = 1e-200

# Plateaus of g' longer than this share of the sampled range are reported.
PLATEAU_FRACTION: float = 0.01

# |g(sigma_D) + nu| below this makes the necrotic branch of G nearly flat.
FLAT_BRANCH_THRESHOLD: float = 1e-6


class RateRole(Enum):
    """Which model slot a rate function fills."""
    CONSUMPTION = "consumption"
    PROLIFERATION = "proliferation"


class RateKind(Enum):
    """Catalog of supported rate function families."""
    LINEAR = "linear"
    MICHAELIS_MENTEN = "michaelis_menten"
    PROLIFERATION_LINEAR = "proliferation_linear"
    CUSTOM = "custom"


def _require_positive(name: str, value: Any) -> float:
    """Coerce to float and reject non-positive or non-finite values."""
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a number", field=name, value=value, reason="not numeric")
    if not math.isfinite(number) or number <= 0.0:
        raise ValidationError(f"{name} must be positive and finite", field=name, value=value, reason="non-positive")
    return number


@dataclass(frozen=True)
class RateFunction:
    """
    A consumption rate f or proliferation rate g.

    Catalog kinds keep their coefficients in ``coefficients``:
    LINEAR (lambda,), MICHAELIS_MENTEN (vmax, k),
    PROLIFERATION_LINEAR (mu, sigma_tilde). CUSTOM kinds dispatch to
    ``func`` and, when supplied, ``deriv``.

    Attributes:
        kind: Family of the function
        role: Consumption (f) or proliferation (g)
        M: Declared upper bound of the derivative on [0, inf)
        coefficients: Catalog coefficients, empty for CUSTOM
        sigma_tilde: Declared root of a proliferation function
        func: Value callable for CUSTOM kinds
        deriv: Optional derivative callable for CUSTOM kinds
    """
    kind: RateKind
    role: RateRole
    M: float
    coefficients: Tuple[float, ...] = ()
    sigma_tilde: Optional[float] = None
    func: Optional[Callable[[float], float]] = field(default=None, repr=False)
    deriv: Optional[Callable[[float], float]] = field(default=None, repr=False)

    # -------------------------------------------------------------------------
    # Constructors
    # -------------------------------------------------------------------------

    @classmethod
    def linear(cls, lam: float = 1.0) -> "RateFunction":
        """Linear consumption f(u) = lambda * u."""
        lam = _require_positive("lambda", lam)
        return cls(kind=RateKind.LINEAR, role=RateRole.CONSUMPTION, M=lam, coefficients=(lam,))

    @classmethod
    def michaelis_menten(cls, vmax: float, k: float) -> "RateFunction":
        """Michaelis-Menten consumption f(u) = vmax * u / (k + u)."""
        vmax = _require_positive("vmax", vmax)
        k = _require_positive("k", k)
        return cls(
            kind=RateKind.MICHAELIS_MENTEN,
            role=RateRole.CONSUMPTION,
            M=vmax / k,
            coefficients=(vmax, k),
        )

    @classmethod
    def proliferation_linear(cls, mu: float, sigma_tilde: float) -> "RateFunction":
        """Linear proliferation g(u) = mu * (u - sigma_tilde)."""
        mu = _require_positive("mu", mu)
        sigma_tilde = _require_positive("sigma_tilde", sigma_tilde)
        return cls(
            kind=RateKind.PROLIFERATION_LINEAR,
            role=RateRole.PROLIFERATION,
            M=mu,
            coefficients=(mu, sigma_tilde),
            sigma_tilde=sigma_tilde,
        )

    @classmethod
    def custom(
        cls,
        role: RateRole,
        func: Callable[[float], float],
        M: float,
        deriv: Optional[Callable[[float], float]] = None,
        sigma_tilde: Optional[float] = None
    ) -> "RateFunction":
        """
        Wrap user callables as a rate function.

        Args:
            role: Consumption or proliferation slot
            func: Value callable, s -> rate
            M: Declared bound on the derivative (trusted, verified on sampling)
            deriv: Optional derivative callable; central differences otherwise
            sigma_tilde: Declared root, required for proliferation functions

        Returns:
            RateFunction of kind CUSTOM
        """
        if not callable(func):
            raise ValidationError("custom rate needs a callable", field="func", value=func, reason="not callable")
        M = _require_positive("M", M)
        if role is RateRole.PROLIFERATION:
            if sigma_tilde is None:
                raise ValidationError(
                    "proliferation functions must declare sigma_tilde",
                    field="sigma_tilde",
                    reason="missing",
                )
            sigma_tilde = _require_positive("sigma_tilde", sigma_tilde)
        return cls(
            kind=RateKind.CUSTOM,
            role=role,
            M=M,
            sigma_tilde=sigma_tilde,
            func=func,
            deriv=deriv,
        )

    # -------------------------------------------------------------------------
    # Evaluation
    # -------------------------------------------------------------------------

    def eval(self, s: ArrayLike) -> ArrayLike:
        """
        Evaluate the rate at concentration(s) s >= 0.

        Args:
            s: Scalar or array of concentrations

        Returns:
            Rate value(s), same shape as the input
        """
        values = self._check_domain(s)
        if self.kind is RateKind.LINEAR:
            (lam,) = self.coefficients
            out = lam * values
        elif self.kind is RateKind.MICHAELIS_MENTEN:
            vmax, k = self.coefficients
            out = vmax * values / (k + values)
        elif self.kind is RateKind.PROLIFERATION_LINEAR:
            mu, sigma_tilde = self.coefficients
            out = mu * (values - sigma_tilde)
        else:
            assert self.func is not None
            out = np.array([float(self.func(float(v))) for v in values.ravel()]).reshape(values.shape)
        return float(out) if np.ndim(s) == 0 else out

    def eval_deriv(self, s: ArrayLike) -> ArrayLike:
        """
        Evaluate the derivative of the rate at s >= 0.

        CUSTOM kinds without a derivative use central differences with
        step h = max(1e-6, 1e-6 * s); a forward difference replaces it
        where s < h so the stencil stays in the domain.

        Args:
            s: Scalar or array of concentrations

        Returns:
            Derivative value(s), same shape as the input
        """
        values = self._check_domain(s)
        if self.kind is RateKind.LINEAR:
            out = np.full_like(values, self.coefficients[0])
        elif self.kind is RateKind.MICHAELIS_MENTEN:
            vmax, k = self.coefficients
            out = vmax * k / (k + values) ** 2
        elif self.kind is RateKind.PROLIFERATION_LINEAR:
            out = np.full_like(values, self.coefficients[0])
        elif self.deriv is not None:
            out = np.array([float(self.deriv(float(v))) for v in values.ravel()]).reshape(values.shape)
        else:
            out = np.array([self._finite_difference(float(v)) for v in values.ravel()]).reshape(values.shape)
        return float(out) if np.ndim(s) == 0 else out

    def ratio_function(self) -> Callable[[float], float]:
        """
        Return a fast scalar callable u -> f(u)/u.

        The shooting solver works with ln u, so it needs the consumption
        per unit concentration; at u = 0 the limit f'(0) is used.
        """
        if self.kind is RateKind.LINEAR:
            lam = self.coefficients[0]
            return lambda u: lam
        if self.kind is RateKind.MICHAELIS_MENTEN:
            vmax, k = self.coefficients
            return lambda u: vmax / (k + u)

        slope_at_zero = float(self.eval_deriv(0.0))
        func = self.func if self.kind is RateKind.CUSTOM else None

        def ratio(u: float) -> float:
            if u < RATIO_FLOOR:
                return slope_at_zero
            if func is not None:
                return float(func(u)) / u
            return float(self.eval(u)) / u

        return ratio

    def _finite_difference(self, s: float) -> float:
        assert self.func is not None
        h = max(1e-6, 1e-6 * s)
        if s < h:
            return (float(self.func(s + h)) - float(self.func(s))) / h
        return (float(self.func(s + h)) - float(self.func(s - h))) / (2.0 * h)

    @staticmethod
    def _check_domain(s: ArrayLike) -> np.ndarray:
        values = np.asarray(s, dtype=float)
        if np.any(values < 0.0) or np.any(np.isnan(values)):
            raise DomainError("s", s, "concentration must be non-negative")
        return values

    # -------------------------------------------------------------------------
    # Serialization
    # -------------------------------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        """Serialize a catalog function to the JSON parameter schema."""
        if self.kind is RateKind.LINEAR:
            return {"kind": "linear", "lambda": self.coefficients[0]}
        if self.kind is RateKind.MICHAELIS_MENTEN:
            return {"kind": "michaelis_menten", "vmax": self.coefficients[0], "k": self.coefficients[1]}
        if self.kind is RateKind.PROLIFERATION_LINEAR:
            return {"kind": "proliferation_linear", "mu": self.coefficients[0], "sigma_tilde": self.coefficients[1]}
        raise ValidationError("custom rate functions are not serializable", field="kind", value="custom")

    @classmethod
    def from_dict(cls, data: Dict[str, Any], role: RateRole) -> "RateFunction":
        """
        Build a catalog rate function from its JSON form.

        Args:
            data: Mapping with a "kind" key and the kind's coefficients
            role: Slot the function must fill

        Returns:
            RateFunction

        Raises:
            ValidationError: Unknown kind, missing coefficient, or wrong role
        """
        if not isinstance(data, dict):
            raise ValidationError("rate function must be an object", field=role.value, value=data, reason="not an object")
        kind = data.get("kind")
        builders: Dict[str, Tuple[Callable[..., RateFunction], Tuple[str, ...]]] = {
            "linear": (cls.linear, ("lambda",)),
            "michaelis_menten": (cls.michaelis_menten, ("vmax", "k")),
            "proliferation_linear": (cls.proliferation_linear, ("mu", "sigma_tilde")),
        }
        if kind not in builders:
            raise ValidationError(f"unknown rate kind {kind!r}", field="kind", value=kind, reason="unknown kind")
        builder, keys = builders[kind]
        missing = [key for key in keys if key not in data]
        if missing:
            raise ValidationError(
                f"rate kind {kind} is missing {', '.join(missing)}",
                field=missing[0],
                reason="missing",
            )
        rate = builder(*(data[key] for key in keys))
        if rate.role is not role:
            raise ValidationError(
                f"{kind} cannot be used as a {role.value} rate",
                field="kind",
                value=kind,
                reason="wrong role",
            )
        return rate


@dataclass(frozen=True)
class ModelParams:
    """
    Full parameter set of the free-boundary model.

    Attributes:
        f: Nutrient consumption rate
        g: Cell proliferation rate (declares sigma_tilde)
        sigma_bar: External nutrient concentration
        beta: Vascular transfer coefficient; math.inf selects the Dirichlet limit
        nu: Dissolution rate of necrotic cells
        sigma_D: Necrosis threshold concentration
    """
    f: RateFunction
    g: RateFunction
    sigma_bar: float
    beta: float
    nu: float
    sigma_D: float

    def __post_init__(self) -> None:
        if self.f.role is not RateRole.CONSUMPTION:
            raise ValidationError("f must be a consumption rate", field="f", value=self.f.kind.value, reason="wrong role")
        if self.g.role is not RateRole.PROLIFERATION or self.g.sigma_tilde is None:
            raise ValidationError("g must be a proliferation rate", field="g", value=self.g.kind.value, reason="wrong role")
        for name in ("sigma_bar", "nu", "sigma_D"):
            object.__setattr__(self, name, _require_positive(name, getattr(self, name)))
        beta = float(self.beta)
        if not (beta > 0.0):
            raise ValidationError("beta must be positive", field="beta", value=self.beta, reason="non-positive")
        object.__setattr__(self, "beta", beta)

    @property
    def sigma_tilde(self) -> float:
        """Proliferation-neutral concentration, g(sigma_tilde) = 0."""
        assert self.g.sigma_tilde is not None
        return self.g.sigma_tilde

    @property
    def dirichlet(self) -> bool:
        """True in the beta = inf limit, where u(1) = sigma_bar is imposed."""
        return math.isinf(self.beta)

    def replace(self, **changes: Any) -> "ModelParams":
        """Return a copy with some fields changed."""
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        """Serialize to the JSON parameter schema."""
        return {
            "f": self.f.to_dict(),
            "g": self.g.to_dict(),
            "sigma_bar": self.sigma_bar,
            "beta": "inf" if self.dirichlet else self.beta,
            "nu": self.nu,
            "sigma_D": self.sigma_D,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelParams":
        """
        Build parameters from the JSON parameter schema.

        Raises:
            ValidationError: Missing keys or invalid values
        """
        required = ("f", "g", "sigma_bar", "beta", "nu", "sigma_D")
        missing = [key for key in required if key not in data]
        if missing:
            raise ValidationError(
                f"parameter set is missing {', '.join(missing)}",
                field=missing[0],
                reason="missing",
            )
        beta: Any = data["beta"]
        if isinstance(beta, str):
            if beta.strip().lower() not in ("inf", "infinity"):
                raise ValidationError("beta must be a number or 'inf'", field="beta", value=beta, reason="not numeric")
            beta = math.inf
        elif not (isinstance(beta, float) and math.isinf(beta) and beta > 0.0):
            beta = _require_positive("beta", beta)
        return cls(
            f=RateFunction.from_dict(data["f"], RateRole.CONSUMPTION),
            g=RateFunction.from_dict(data["g"], RateRole.PROLIFERATION),
            sigma_bar=data["sigma_bar"],
            beta=beta,
            nu=data["nu"],
            sigma_D=data["sigma_D"],
        )


# =============================================================================
# ASSUMPTION VALIDATION
# =============================================================================

@dataclass(frozen=True)
class ValidationGrid:
    """Sampling of [0, sigma_max] used to check custom rate functions."""
    sigma_max: float
    points: int = 2001

    @classmethod
    def for_params(cls, p: ModelParams) -> "ValidationGrid":
        """Default grid: [0, 2 * max(sigma_bar, sigma_tilde)], 2001 points."""
        return cls(sigma_max=2.0 * max(p.sigma_bar, p.sigma_tilde))

    def samples(self) -> np.ndarray:
        return np.linspace(0.0, self.sigma_max, self.points)


@dataclass(frozen=True)
class AssumptionCheck:
    """Outcome of one assumption check."""
    name: str
    assumption: str
    passed: bool
    message: str = ""
    first_violation: Optional[float] = None
    warning: bool = False


@dataclass(frozen=True)
class ValidationReport:
    """
    Pass/fail report for (A1)-(A3).

    Attributes:
        checks: Every check performed, in order
        sampled_range: The concentration range sampled for CUSTOM kinds
        points: Number of samples
    """
    checks: Tuple[AssumptionCheck, ...]
    sampled_range: Tuple[float, float]
    points: int

    @property
    def failures(self) -> List[AssumptionCheck]:
        return [c for c in self.checks if not c.passed and not c.warning]

    @property
    def warnings(self) -> List[AssumptionCheck]:
        return [c for c in self.checks if c.warning]

    @property
    def ok(self) -> bool:
        return not self.failures

    def by_assumption(self, assumption: str) -> List[AssumptionCheck]:
        return [c for c in self.checks if c.assumption == assumption]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ok": self.ok,
            "sampled_range": list(self.sampled_range),
            "points": self.points,
            "checks": [
                {
                    "name": c.name,
                    "assumption": c.assumption,
                    "passed": c.passed,
                    "warning": c.warning,
                    "message": c.message,
                    "first_violation": c.first_violation,
                }
                for c in self.checks
            ],
        }


def _first(samples: np.ndarray, mask: np.ndarray) -> Optional[float]:
    """First sample where mask is True, or None."""
    hits = np.flatnonzero(mask)
    return float(samples[hits[0]]) if hits.size else None


def _check_consumption(f: RateFunction, samples: np.ndarray) -> List[AssumptionCheck]:
    checks: List[AssumptionCheck] = []
    if f.kind is not RateKind.CUSTOM:
        # Catalog consumption kinds satisfy (A1) by construction.
        checks.append(AssumptionCheck("f(0)=0", "A1", True, "closed form"))
        checks.append(AssumptionCheck("f'>0", "A1", True, "closed form"))
        checks.append(AssumptionCheck("f'<=M", "A1", True, f"M={f.M:.6g} is the exact supremum"))
        return checks

    f0 = float(f.eval(0.0))
    checks.append(AssumptionCheck(
        "f(0)=0", "A1", abs(f0) <= 1e-14 * max(1.0, f.M),
        f"f(0)={f0:.3e}", 0.0 if f0 != 0.0 else None,
    ))
    slopes = np.asarray(f.eval_deriv(samples))
    bad = slopes <= 0.0
    checks.append(AssumptionCheck(
        "f'>0", "A1", not bad.any(), "sampled", _first(samples, bad),
    ))
    over = slopes > f.M * (1.0 + 1e-9)
    checks.append(AssumptionCheck(
        "f'<=M", "A1", not over.any(), f"declared M={f.M:.6g}, sampled max={slopes.max():.6g}",
        _first(samples, over),
    ))
    return checks


def _check_proliferation(g: RateFunction, samples: np.ndarray) -> List[AssumptionCheck]:
    checks: List[AssumptionCheck] = []
    sigma_tilde = g.sigma_tilde
    assert sigma_tilde is not None
    if g.kind is not RateKind.CUSTOM:
        checks.append(AssumptionCheck("g'>=0", "A2", True, "closed form"))
        checks.append(AssumptionCheck("g(sigma_tilde)=0", "A2", True, "closed form"))
        return checks

    slopes = np.asarray(g.eval_deriv(samples))
    negative = slopes < 0.0
    checks.append(AssumptionCheck("g'>=0", "A2", not negative.any(), "sampled", _first(samples, negative)))

    values = np.asarray(g.eval(samples))
    scale = max(1.0, float(np.max(np.abs(values))))
    at_root = float(g.eval(sigma_tilde))
    checks.append(AssumptionCheck(
        "g(sigma_tilde)=0", "A2", abs(at_root) <= 1e-12 * scale,
        f"g({sigma_tilde:.6g})={at_root:.3e}",
        sigma_tilde if abs(at_root) > 1e-12 * scale else None,
    ))
    wrong_side = ((samples < sigma_tilde) & (values > 0.0)) | ((samples > sigma_tilde) & (values < 0.0))
    checks.append(AssumptionCheck(
        "unique root", "A2", not wrong_side.any(), "sign pattern around sigma_tilde",
        _first(samples, wrong_side),
    ))

    # g' vanishing on an interval cannot be decided by sampling; long runs are warnings.
    flat = slopes == 0.0
    longest, run, start, worst = 0, 0, 0, None
    for i, is_flat in enumerate(flat):
        if is_flat:
            if run == 0:
                start = i
            run += 1
            if run > longest:
                longest, worst = run, float(samples[start])
        else:
            run = 0
    span = samples[-1] - samples[0]
    plateau = longest > 1 and (longest - 1) * (span / (len(samples) - 1)) > PLATEAU_FRACTION * span
    if plateau:
        checks.append(AssumptionCheck(
            "g' plateau", "A2", False,
            f"g' vanishes on {longest} consecutive samples", worst, warning=True,
        ))
    return checks


def _check_coupling(p: ModelParams) -> List[AssumptionCheck]:
    checks: List[AssumptionCheck] = []
    bound = min(p.sigma_tilde, p.sigma_bar)
    ok = p.sigma_D < bound
    checks.append(AssumptionCheck(
        "sigma_D<min(sigma_tilde,sigma_bar)", "A3", ok,
        f"sigma_D={p.sigma_D:.6g}, min={bound:.6g}", None if ok else p.sigma_D,
    ))
    balance = float(p.g.eval(p.sigma_D)) + p.nu
    checks.append(AssumptionCheck(
        "g(sigma_D)+nu>=0", "A3", balance >= 0.0,
        f"g(sigma_D)+nu={balance:.6g}", None if balance >= 0.0 else p.sigma_D,
    ))
    if 0.0 <= balance < FLAT_BRANCH_THRESHOLD:
        checks.append(AssumptionCheck(
            "near-flat necrotic branch", "A3", False,
            f"|g(sigma_D)+nu|={balance:.3e} < {FLAT_BRANCH_THRESHOLD:g}", p.sigma_D, warning=True,
        ))
    return checks


def validate_params(p: ModelParams, grid: Optional[ValidationGrid] = None) -> ValidationReport:
    """
    Check the standing assumptions (A1)-(A3).

    Catalog kinds are checked analytically, CUSTOM kinds by sampling
    the grid. A report is always produced; downstream operations refuse
    parameters whose report has failures (see ``ensure_valid``).

    Args:
        p: Model parameters
        grid: Sampling of [0, sigma_max]; sigma_max >= 2 * sigma_bar and
            at least 1000 points

    Returns:
        ValidationReport listing each check

    Raises:
        DomainError: The grid does not cover the required range
    """
    grid = grid or ValidationGrid.for_params(p)
    if grid.sigma_max < 2.0 * p.sigma_bar:
        raise DomainError("sigma_max", grid.sigma_max, "must be at least 2 * sigma_bar")
    if grid.points < 1000:
        raise DomainError("points", grid.points, "need at least 1000 samples")

    samples = grid.samples()
    checks = _check_consumption(p.f, samples) + _check_proliferation(p.g, samples) + _check_coupling(p)
    report = ValidationReport(checks=tuple(checks), sampled_range=(0.0, grid.sigma_max), points=grid.points)

    for warning in report.warnings:
        logger.warning(f"Assumption {warning.assumption} warning: {warning.name} ({warning.message})")
    for failure in report.failures:
        logger.debug(f"Assumption {failure.assumption} failed: {failure.name} ({failure.message})")
    return report


@lru_cache(maxsize=256)
def _cached_report(p: ModelParams) -> ValidationReport:
    return validate_params(p)


def ensure_valid(p: ModelParams) -> ValidationReport:
    """
    Return the default-grid report, raising if any assumption fails.

    Reports are memoized per parameter set so nested solver loops can
    call this at every public entry point.

    Raises:
        AssumptionViolationError: Some (A1)-(A3) check failed
    """
    report = _cached_report(p)
    if not report.ok:
        raise AssumptionViolationError(report)
    return report
