"""
FBTumor - Model Core Tests

Rate functions, parameter sets and the (A1)-(A3) validation report.

Run with: pytest tests/test_model_core.py -v
"""

import math
from typing import Any

import numpy as np
import pytest


class TestRateFunctions:
    """Tests for catalog and custom rate functions."""

    def test_linear_values_and_derivative(self) -> None:
        """Test f(u) = lambda * u and its constant slope."""
        from fbtumor.model_core import RateFunction, RateRole

        f = RateFunction.linear(2.5)

        assert f.role is RateRole.CONSUMPTION
        assert f.M == 2.5
        assert f.eval(0.4) == pytest.approx(1.0)
        assert f.eval_deriv(3.0) == 2.5

    def test_michaelis_menten_values(self) -> None:
        """Test vmax u / (k + u), its derivative and M = vmax / k."""
        from fbtumor.model_core import RateFunction

        f = RateFunction.michaelis_menten(vmax=2.0, k=0.5)

        assert f.M == pytest.approx(4.0)
        assert f.eval(0.5) == pytest.approx(1.0)
        assert f.eval_deriv(0.0) == pytest.approx(4.0)
        assert f.eval_deriv(0.5) == pytest.approx(1.0)

    def test_vectorized_evaluation_keeps_shape(self) -> None:
        """Test arrays in, arrays of the same shape out."""
        from fbtumor.model_core import RateFunction

        g = RateFunction.proliferation_linear(mu=2.0, sigma_tilde=0.6)
        s = np.array([[0.0, 0.6], [1.0, 2.0]])

        values = g.eval(s)

        assert values.shape == (2, 2)
        np.testing.assert_allclose(values, [[-1.2, 0.0], [0.8, 2.8]])

    def test_negative_concentration_rejected(self) -> None:
        """Test that s < 0 raises DomainError."""
        from fbtumor.exceptions import DomainError
        from fbtumor.model_core import RateFunction

        with pytest.raises(DomainError):
            RateFunction.linear(1.0).eval(-1e-3)

    def test_custom_finite_difference_derivative(self) -> None:
        """Test central differences inside the domain and forward differences at 0."""
        from fbtumor.model_core import RateFunction, RateRole

        f = RateFunction.custom(RateRole.CONSUMPTION, lambda u: u / (1.0 + u), M=1.0)

        assert f.eval_deriv(1.0) == pytest.approx(0.25, abs=1e-8)
        assert f.eval_deriv(0.0) == pytest.approx(1.0, abs=1e-5)

    def test_custom_supplied_derivative_is_used(self) -> None:
        """Test that an explicit derivative callable wins over differencing."""
        from fbtumor.model_core import RateFunction, RateRole

        f = RateFunction.custom(RateRole.CONSUMPTION, lambda u: u, M=1.0, deriv=lambda u: 0.75)

        assert f.eval_deriv(0.3) == 0.75

    def test_ratio_function(self) -> None:
        """Test f(u)/u with the f'(0) limit at u = 0."""
        from fbtumor.model_core import RateFunction, RateRole

        assert RateFunction.linear(3.0).ratio_function()(0.7) == 3.0
        assert RateFunction.michaelis_menten(2.0, 0.5).ratio_function()(1.5) == pytest.approx(1.0)

        custom = RateFunction.custom(RateRole.CONSUMPTION, lambda u: 2.0 * u / (1.0 + u), M=2.0)
        ratio = custom.ratio_function()
        assert ratio(0.0) == pytest.approx(2.0, abs=1e-5)
        assert ratio(1.0) == pytest.approx(1.0)

    def test_custom_proliferation_needs_sigma_tilde(self) -> None:
        """Test that a custom g without a declared root is rejected."""
        from fbtumor.exceptions import ValidationError
        from fbtumor.model_core import RateFunction, RateRole

        with pytest.raises(ValidationError) as exc_info:
            RateFunction.custom(RateRole.PROLIFERATION, lambda u: u - 0.6, M=1.0)

        assert exc_info.value.field == "sigma_tilde"

    @pytest.mark.parametrize("lam", [0.0, -1.0, math.inf, "abc"])
    def test_non_positive_coefficients_rejected(self, lam: Any) -> None:
        """Test coefficient validation in the catalog constructors."""
        from fbtumor.exceptions import ValidationError
        from fbtumor.model_core import RateFunction

        with pytest.raises(ValidationError):
            RateFunction.linear(lam)


class TestRateSerialization:
    """Tests for the JSON form of rate functions."""

    def test_from_dict_builds_catalog_kinds(self) -> None:
        """Test each catalog kind from its JSON object."""
        from fbtumor.model_core import RateFunction, RateKind, RateRole

        f = RateFunction.from_dict({"kind": "michaelis_menten", "vmax": 1.0, "k": 2.0}, RateRole.CONSUMPTION)
        g = RateFunction.from_dict({"kind": "proliferation_linear", "mu": 1.0, "sigma_tilde": 0.6}, RateRole.PROLIFERATION)

        assert f.kind is RateKind.MICHAELIS_MENTEN
        assert g.sigma_tilde == 0.6
        assert f.to_dict() == {"kind": "michaelis_menten", "vmax": 1.0, "k": 2.0}

    def test_unknown_kind(self) -> None:
        """Test rejection of an unknown kind."""
        from fbtumor.exceptions import ValidationError
        from fbtumor.model_core import RateFunction, RateRole

        with pytest.raises(ValidationError) as exc_info:
            RateFunction.from_dict({"kind": "hill", "n": 2}, RateRole.CONSUMPTION)

        assert exc_info.value.reason == "unknown kind"

    def test_missing_coefficient(self) -> None:
        """Test the missing coefficient is named."""
        from fbtumor.exceptions import ValidationError
        from fbtumor.model_core import RateFunction, RateRole

        with pytest.raises(ValidationError) as exc_info:
            RateFunction.from_dict({"kind": "michaelis_menten", "vmax": 1.0}, RateRole.CONSUMPTION)

        assert exc_info.value.field == "k"

    def test_wrong_role(self) -> None:
        """Test a consumption kind cannot fill the proliferation slot."""
        from fbtumor.exceptions import ValidationError
        from fbtumor.model_core import RateFunction, RateRole

        with pytest.raises(ValidationError) as exc_info:
            RateFunction.from_dict({"kind": "linear", "lambda": 1.0}, RateRole.PROLIFERATION)

        assert exc_info.value.reason == "wrong role"

    def test_custom_not_serializable(self) -> None:
        """Test custom kinds refuse to_dict."""
        from fbtumor.exceptions import ValidationError
        from fbtumor.model_core import RateFunction, RateRole

        f = RateFunction.custom(RateRole.CONSUMPTION, lambda u: u, M=1.0)

        with pytest.raises(ValidationError):
            f.to_dict()


class TestModelParams:
    """Tests for parameter sets."""

    def test_schema_round_trip(self, linear_params: Any) -> None:
        """Test to_dict / from_dict reproduce the parameters."""
        from fbtumor.model_core import ModelParams

        again = ModelParams.from_dict(linear_params.to_dict())

        assert again == linear_params
        assert again.sigma_tilde == 0.6

    @pytest.mark.parametrize("beta", ["inf", "Infinity", math.inf])
    def test_dirichlet_beta(self, linear_params: Any, beta: Any) -> None:
        """Test beta = inf selects the Dirichlet limit."""
        from fbtumor.model_core import ModelParams

        data = linear_params.to_dict()
        data["beta"] = beta

        p = ModelParams.from_dict(data)

        assert p.dirichlet
        assert p.to_dict()["beta"] == "inf"

    @pytest.mark.parametrize("field,value", [
        ("beta", 0.0),
        ("beta", "large"),
        ("nu", -1.0),
        ("sigma_bar", 0.0),
        ("sigma_D", math.nan),
    ])
    def test_invalid_scalars(self, linear_params: Any, field: str, value: Any) -> None:
        """Test scalar validation names the field."""
        from fbtumor.exceptions import ValidationError
        from fbtumor.model_core import ModelParams

        data = linear_params.to_dict()
        data[field] = value

        with pytest.raises(ValidationError) as exc_info:
            ModelParams.from_dict(data)

        assert exc_info.value.field == field

    def test_missing_key(self, linear_params: Any) -> None:
        """Test a missing parameter is reported."""
        from fbtumor.exceptions import ValidationError
        from fbtumor.model_core import ModelParams

        data = linear_params.to_dict()
        del data["nu"]

        with pytest.raises(ValidationError) as exc_info:
            ModelParams.from_dict(data)

        assert exc_info.value.field == "nu"

    def test_roles_enforced(self) -> None:
        """Test f and g cannot be swapped."""
        from fbtumor.exceptions import ValidationError
        from fbtumor.model_core import ModelParams, RateFunction

        with pytest.raises(ValidationError):
            ModelParams(
                f=RateFunction.proliferation_linear(1.0, 0.6),
                g=RateFunction.linear(1.0),
                sigma_bar=1.0, beta=1.0, nu=1.0, sigma_D=0.5,
            )

    def test_replace_revalidates(self, linear_params: Any) -> None:
        """Test replace returns a validated copy."""
        from fbtumor.exceptions import ValidationError

        shifted = linear_params.replace(sigma_bar=2.0)

        assert shifted.sigma_bar == 2.0
        assert linear_params.sigma_bar == 1.0
        with pytest.raises(ValidationError):
            linear_params.replace(nu=0.0)


class TestValidationReport:
    """Tests for the (A1)-(A3) checks."""

    def test_catalog_parameters_pass(self, linear_params: Any, mm_params: Any) -> None:
        """Test catalog kinds pass every check."""
        from fbtumor.model_core import validate_params

        for p in (linear_params, mm_params):
            report = validate_params(p)
            assert report.ok
            assert report.warnings == []
            assert {c.assumption for c in report.checks} == {"A1", "A2", "A3"}

    def test_default_grid(self, linear_params: Any) -> None:
        """Test the default sampling covers [0, 2 max(sigma_bar, sigma_tilde)]."""
        from fbtumor.model_core import validate_params

        report = validate_params(linear_params.replace(sigma_bar=3.0))

        assert report.sampled_range == (0.0, 6.0)
        assert report.points == 2001

    def test_sigma_D_above_sigma_tilde_fails_A3(self, make_linear_params: Any) -> None:
        """Test sigma_D = 1.2 violates sigma_D < min(sigma_tilde, sigma_bar)."""
        from fbtumor.model_core import validate_params

        report = validate_params(make_linear_params(sigma_D=1.2))

        assert not report.ok
        names = [c.name for c in report.failures]
        assert names == ["sigma_D<min(sigma_tilde,sigma_bar)"]
        assert report.failures[0].first_violation == 1.2

    def test_dissolution_balance_fails_A3(self, make_linear_params: Any) -> None:
        """Test g(sigma_D) + nu < 0 is reported."""
        from fbtumor.model_core import validate_params

        report = validate_params(make_linear_params(sigma_D=0.1, nu=0.2))

        assert [c.name for c in report.failures] == ["g(sigma_D)+nu>=0"]

    def test_derivative_above_declared_bound_fails_A1(self, linear_params: Any) -> None:
        """Test a custom f with f' > M is caught by sampling."""
        from fbtumor.model_core import RateFunction, RateRole, validate_params

        f = RateFunction.custom(RateRole.CONSUMPTION, lambda u: 2.0 * u, M=1.0)

        report = validate_params(linear_params.replace(f=f))

        failed = report.by_assumption("A1")
        assert [c.name for c in failed if not c.passed] == ["f'<=M"]
        assert failed[-1].first_violation == 0.0

    def test_nonzero_f_at_origin_fails_A1(self, linear_params: Any) -> None:
        """Test f(0) != 0 is reported."""
        from fbtumor.model_core import RateFunction, RateRole, validate_params

        f = RateFunction.custom(RateRole.CONSUMPTION, lambda u: 0.1 + u, M=1.0)

        report = validate_params(linear_params.replace(f=f))

        assert "f(0)=0" in [c.name for c in report.failures]

    def test_decreasing_g_fails_A2(self, linear_params: Any) -> None:
        """Test a decreasing g fails monotonicity and the sign pattern."""
        from fbtumor.model_core import RateFunction, RateRole, validate_params

        g = RateFunction.custom(RateRole.PROLIFERATION, lambda u: 0.6 - u, M=1.0, sigma_tilde=0.6)

        report = validate_params(linear_params.replace(g=g, nu=2.0))

        names = {c.name for c in report.failures}
        assert {"g'>=0", "unique root"} <= names

    def test_wrong_declared_root_fails_A2(self, linear_params: Any) -> None:
        """Test g(sigma_tilde) != 0 is reported."""
        from fbtumor.model_core import RateFunction, RateRole, validate_params

        g = RateFunction.custom(RateRole.PROLIFERATION, lambda u: u - 0.7, M=1.0, sigma_tilde=0.6)

        report = validate_params(linear_params.replace(g=g))

        assert "g(sigma_tilde)=0" in [c.name for c in report.failures]

    def test_plateau_is_a_warning(self, linear_params: Any) -> None:
        """Test a long flat stretch of g' warns without failing."""
        from fbtumor.model_core import RateFunction, RateRole, validate_params

        g = RateFunction.custom(RateRole.PROLIFERATION, lambda u: max(u - 0.6, 0.0), M=1.0, sigma_tilde=0.6)

        report = validate_params(linear_params.replace(g=g))

        assert report.ok
        assert [w.name for w in report.warnings] == ["g' plateau"]
        assert report.warnings[0].first_violation == 0.0

    def test_near_flat_branch_is_a_warning(self, make_linear_params: Any) -> None:
        """Test 0 <= g(sigma_D) + nu < 1e-6 warns."""
        from fbtumor.model_core import validate_params

        report = validate_params(make_linear_params(nu=0.1 + 1e-9))

        assert report.ok
        assert [w.name for w in report.warnings] == ["near-flat necrotic branch"]

    def test_grid_must_cover_twice_sigma_bar(self, linear_params: Any) -> None:
        """Test undersized grids are rejected."""
        from fbtumor.exceptions import DomainError
        from fbtumor.model_core import ValidationGrid, validate_params

        with pytest.raises(DomainError):
            validate_params(linear_params, ValidationGrid(sigma_max=1.5))
        with pytest.raises(DomainError):
            validate_params(linear_params, ValidationGrid(sigma_max=2.0, points=500))

    def test_report_serializes(self, make_linear_params: Any) -> None:
        """Test the report dictionary lists every check."""
        from fbtumor.model_core import validate_params

        report = validate_params(make_linear_params(sigma_D=1.2))
        data = report.to_dict()

        assert data["ok"] is False
        assert len(data["checks"]) == len(report.checks)
        assert data["sampled_range"] == [0.0, 2.0]

    def test_ensure_valid_raises(self, make_linear_params: Any) -> None:
        """Test ensure_valid raises with the failing report attached."""
        from fbtumor.exceptions import AssumptionViolationError
        from fbtumor.model_core import ensure_valid

        with pytest.raises(AssumptionViolationError) as exc_info:
            ensure_valid(make_linear_params(sigma_D=1.2))

        assert "sigma_D<min(sigma_tilde,sigma_bar)" in exc_info.value.message
        assert not exc_info.value.report.ok

    def test_ensure_valid_returns_report(self, linear_params: Any) -> None:
        """Test ensure_valid passes valid parameters through."""
        from fbtumor.model_core import ensure_valid

        assert ensure_valid(linear_params).ok
