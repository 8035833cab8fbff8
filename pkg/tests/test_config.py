"""
FBTumor - Configuration Tests

Parameter files, flag overrides and environment settings.

Run with: pytest tests/test_config.py -v
"""

import json
import math
from typing import Any

import pytest


class TestParseJsonObject:
    """Tests for parse_json_object."""

    def test_valid_object(self) -> None:
        """Test a JSON object parses."""
        from fbtumor.config import parse_json_object

        assert parse_json_object('{"nu": 1.0}') == {"nu": 1.0}

    @pytest.mark.parametrize(
        "text,reason",
        [
            ("", "empty"),
            ("   ", "empty"),
            ("{broken", "malformed"),
            ("[1, 2]", "not an object"),
        ],
    )
    def test_rejected(self, text: str, reason: str) -> None:
        """Test empty, malformed and non-object input."""
        from fbtumor.config import parse_json_object
        from fbtumor.exceptions import ValidationError

        with pytest.raises(ValidationError) as exc_info:
            parse_json_object(text, "params.json")

        assert exc_info.value.details["reason"] == reason

    def test_size_limit(self, mocker: Any) -> None:
        """Test oversized text is rejected before parsing."""
        from fbtumor import config
        from fbtumor.exceptions import ValidationError

        mocker.patch.object(config, "MAX_CONFIG_SIZE", 10)
        loads = mocker.spy(json, "loads")

        with pytest.raises(ValidationError) as exc_info:
            config.parse_json_object('{"sigma_bar": 1.0}')

        assert exc_info.value.details["reason"] == "too large"
        assert loads.call_count == 0


class TestReadConfig:
    """Tests for read_config."""

    def test_reads_file(self, params_file: Any) -> None:
        """Test a parameter file round-trips into a dict."""
        from fbtumor.config import read_config

        raw = read_config(params_file(nu=2.0))

        assert raw["nu"] == 2.0
        assert raw["f"] == {"kind": "linear", "lambda": 1.0}

    def test_missing_file(self, tmp_path: Any) -> None:
        """Test a missing file is a ValidationError, not an OSError."""
        from fbtumor.config import read_config
        from fbtumor.exceptions import ValidationError

        with pytest.raises(ValidationError) as exc_info:
            read_config(tmp_path / "nope.json")

        assert exc_info.value.details["reason"] == "unreadable"


class TestOverrides:
    """Tests for apply_overrides and load_params."""

    def test_none_means_not_given(self) -> None:
        """Test None values leave the file value alone."""
        from fbtumor.config import apply_overrides

        merged = apply_overrides({"nu": 1.0, "beta": 2.0}, {"nu": None, "beta": 5.0})

        assert merged == {"nu": 1.0, "beta": 5.0}

    def test_unknown_field(self) -> None:
        """Test only sigma_bar, beta, nu, sigma_D can be overridden."""
        from fbtumor.config import apply_overrides
        from fbtumor.exceptions import ValidationError

        with pytest.raises(ValidationError) as exc_info:
            apply_overrides({}, {"lam": 2.0})

        assert exc_info.value.details["field"] == "lam"

    def test_load_params_precedence(self, params_file: Any) -> None:
        """Test flags win over the file."""
        from fbtumor.config import load_params

        p = load_params(params_file(sigma_bar=1.0, nu=1.0), {"sigma_bar": 2.0, "nu": None})

        assert p.sigma_bar == 2.0
        assert p.nu == 1.0
        assert p.sigma_D == 0.5

    def test_load_params_beta_string(self, params_file: Any) -> None:
        """Test "inf" in the file selects the Dirichlet condition."""
        from fbtumor.config import load_params

        assert math.isinf(load_params(params_file(beta="inf")).beta)

    def test_load_params_missing_key(self, tmp_path: Any) -> None:
        """Test a file without rate functions is rejected."""
        from fbtumor.config import load_params
        from fbtumor.exceptions import ValidationError

        path = tmp_path / "partial.json"
        path.write_text(json.dumps({"sigma_bar": 1.0}), encoding="utf-8")

        with pytest.raises(ValidationError) as exc_info:
            load_params(path)

        assert exc_info.value.details["field"] == "f"

    def test_load_params_flags_only_missing(self) -> None:
        """Test flags alone cannot build a parameter set."""
        from fbtumor.config import load_params
        from fbtumor.exceptions import ValidationError

        with pytest.raises(ValidationError):
            load_params(None, {"sigma_bar": 1.0, "beta": 1.0, "nu": 1.0, "sigma_D": 0.5})


class TestParseBeta:
    """Tests for the --beta argument type."""

    @pytest.mark.parametrize("text", ["inf", "INF", " Infinity "])
    def test_infinity(self, text: str) -> None:
        """Test spellings of infinity."""
        from fbtumor.config import parse_beta

        assert parse_beta(text) == math.inf

    def test_number(self) -> None:
        """Test plain numbers."""
        from fbtumor.config import parse_beta

        assert parse_beta("2.5") == 2.5

    def test_garbage(self) -> None:
        """Test non-numeric text raises ValueError for argparse."""
        from fbtumor.config import parse_beta

        with pytest.raises(ValueError):
            parse_beta("steep")


class TestThreadLimit:
    """Tests for the FBTUMOR_THREADS setting."""

    def test_explicit(self) -> None:
        """Test an explicit positive integer."""
        from fbtumor.config import thread_limit

        assert thread_limit({"FBTUMOR_THREADS": "3"}) == 3

    def test_default_is_cpu_count(self, mocker: Any) -> None:
        """Test unset or empty falls back to the CPU count."""
        from fbtumor.config import thread_limit

        mocker.patch("fbtumor.config.os.cpu_count", return_value=6)

        assert thread_limit({}) == 6
        assert thread_limit({"FBTUMOR_THREADS": ""}) == 6

    def test_cpu_count_unknown(self, mocker: Any) -> None:
        """Test an unknown CPU count means one worker."""
        from fbtumor.config import thread_limit

        mocker.patch("fbtumor.config.os.cpu_count", return_value=None)

        assert thread_limit({}) == 1

    def test_reads_process_environment(self, monkeypatch: Any) -> None:
        """Test os.environ is used when no mapping is given."""
        from fbtumor.config import thread_limit

        monkeypatch.setenv("FBTUMOR_THREADS", "2")

        assert thread_limit() == 2

    @pytest.mark.parametrize("value", ["0", "-4", "two"])
    def test_invalid(self, value: str) -> None:
        """Test non-positive and non-integer values."""
        from fbtumor.config import thread_limit
        from fbtumor.exceptions import ValidationError

        with pytest.raises(ValidationError):
            thread_limit({"FBTUMOR_THREADS": value})
