"""
Pytest configuration and shared fixtures for fbtumor tests.

The linear-consumption oracle below evaluates the model from the closed
form of the nutrient profile with scipy's brentq and Simpson rule, so it
shares no code path with the shooting solver.
"""

import math
from typing import Any, Callable, Dict

import numpy as np
import pytest
from scipy.integrate import simpson
from scipy.optimize import brentq

from fbtumor.model_core import ModelParams, RateFunction
from fbtumor.profile_solver import closed_form_linear

LINEAR_DEFAULTS: Dict[str, float] = {
    "lam": 1.0,
    "mu": 1.0,
    "sigma_tilde": 0.6,
    "sigma_bar": 1.0,
    "beta": 1.0,
    "nu": 1.0,
    "sigma_D": 0.5,
}


def build_linear_params(**overrides: Any) -> ModelParams:
    values = {**LINEAR_DEFAULTS, **overrides}
    return ModelParams(
        f=RateFunction.linear(values["lam"]),
        g=RateFunction.proliferation_linear(values["mu"], values["sigma_tilde"]),
        sigma_bar=values["sigma_bar"],
        beta=values["beta"],
        nu=values["nu"],
        sigma_D=values["sigma_D"],
    )


class LinearOracle:
    """Closed-form evaluation of the model for f(u) = lam * u, g(u) = mu (u - sigma_tilde)."""

    def __init__(self, **overrides: Any) -> None:
        self.values = {**LINEAR_DEFAULTS, **overrides}
        for key, value in self.values.items():
            setattr(self, key, value)

    def with_sigma_bar(self, sigma_bar: float) -> "LinearOracle":
        return LinearOracle(**{**self.values, "sigma_bar": sigma_bar})

    def profile(self, s: np.ndarray, eta: float, R: float) -> np.ndarray:
        return closed_form_linear(s, eta, R, self.beta, self.sigma_bar, self.lam)

    def center(self, eta: float, R: float) -> float:
        return float(closed_form_linear(eta, eta, R, self.beta, self.sigma_bar, self.lam))

    def critical_radius(self) -> float:
        return brentq(lambda R: self.center(0.0, R) - self.sigma_D, 1e-8, 1e3, xtol=1e-15, rtol=1e-14)

    def necrotic_fraction(self, R: float) -> float:
        if R <= self.critical_radius():
            return 0.0
        return brentq(lambda e: self.center(e, R) - self.sigma_D, 0.0, 1.0 - 1e-9, xtol=1e-15, rtol=1e-14)

    def growth(self, R: float) -> float:
        eta = self.necrotic_fraction(R)
        s = np.linspace(eta, 1.0, 4097)
        u = self.profile(s, eta, R)
        integral = simpson(self.mu * (u - self.sigma_tilde) * s ** 2, x=s)
        return float(integral - self.nu * eta ** 3 / 3.0)

    def stationary_radius(self) -> float:
        """Scan G on a log grid, then refine the sign change with brentq."""
        radii = np.geomspace(1e-3, 1e3, 61)
        values = [self.growth(R) for R in radii]
        for k in range(len(radii) - 1):
            if values[k] > 0.0 >= values[k + 1]:
                return brentq(self.growth, radii[k], radii[k + 1], xtol=1e-13, rtol=1e-12)
        raise AssertionError("no sign change of G on [1e-3, 1e3]")

    def growth_at_critical(self, sigma_bar: float) -> float:
        shifted = self.with_sigma_bar(sigma_bar)
        return shifted.growth(shifted.critical_radius())

    def sigma_star(self) -> float:
        grid = np.linspace(self.sigma_tilde * (1.0 + 1e-9), 8.0 * self.sigma_tilde, 40)
        values = [self.growth_at_critical(sb) for sb in grid]
        for k in range(len(grid) - 1):
            if values[k] < 0.0 <= values[k + 1]:
                return brentq(self.growth_at_critical, grid[k], grid[k + 1], xtol=1e-12, rtol=1e-12)
        raise AssertionError("no sign change of G(R_c) over the sigma_bar grid")


@pytest.fixture
def linear_params() -> ModelParams:
    """f(u) = u, g(u) = u - 0.6, sigma_bar = beta = nu = 1, sigma_D = 0.5."""
    return build_linear_params()


@pytest.fixture
def make_linear_params() -> Callable[..., ModelParams]:
    """Factory for linear-catalog parameters with overrides."""
    return build_linear_params


@pytest.fixture
def mm_params() -> ModelParams:
    """Michaelis-Menten consumption with linear proliferation."""
    return ModelParams(
        f=RateFunction.michaelis_menten(vmax=2.0, k=0.5),
        g=RateFunction.proliferation_linear(mu=1.0, sigma_tilde=0.6),
        sigma_bar=1.0,
        beta=2.0,
        nu=1.0,
        sigma_D=0.4,
    )


@pytest.fixture
def linear_oracle() -> LinearOracle:
    return LinearOracle()


@pytest.fixture
def make_linear_oracle() -> Callable[..., LinearOracle]:
    return LinearOracle


@pytest.fixture
def params_file(tmp_path: Any) -> Callable[..., Any]:
    """Write a parameter JSON file and return its path."""
    import json

    def write(**overrides: Any) -> Any:
        data: Dict[str, Any] = {
            "f": {"kind": "linear", "lambda": 1.0},
            "g": {"kind": "proliferation_linear", "mu": 1.0, "sigma_tilde": 0.6},
            "sigma_bar": 1.0,
            "beta": 1.0,
            "nu": 1.0,
            "sigma_D": 0.5,
        }
        data.update(overrides)
        path = tmp_path / "params.json"
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return write


def envelope_bounds(R0: float, t: float, p: ModelParams) -> tuple:
    """Lower and upper radius envelope at time t."""
    g_bar = float(p.g.eval(p.sigma_bar))
    return R0 * math.exp(-p.nu * t / 3.0), R0 * math.exp(g_bar * t / 3.0)
