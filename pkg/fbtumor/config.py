"""
FBTumor - Configuration

Parameter files, command-line overrides and environment settings.

Precedence: flags > parameter file. Every parameter must come from one
of the two; there are no built-in model defaults.

Version: 1.0.0
"""

from __future__ import annotations

import json
import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from fbtumor.exceptions import ValidationError
from fbtumor.model_core import ModelParams

logger = logging.getLogger(__name__)

# Parameter files are small; anything larger is rejected unread.
MAX_CONFIG_SIZE = 1024 * 1024

THREADS_ENV = "FBTUMOR_THREADS"

OVERRIDE_FIELDS = ("sigma_bar", "beta", "nu", "sigma_D")


def parse_json_object(text: str, source: str = "<string>") -> Dict[str, Any]:
    """
    Parse JSON text that must hold a single object.

    Raises:
        ValidationError: Too large, not JSON, or not an object
    """
    if not isinstance(text, str) or not text.strip():
        raise ValidationError(f"{source} is empty", field="config", value=source, reason="empty")
    if len(text) > MAX_CONFIG_SIZE:
        raise ValidationError(f"{source} exceeds {MAX_CONFIG_SIZE} bytes", field="config", value=source, reason="too large")
    try:
        parsed = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{source} is not valid JSON: {exc.msg}", field="config", value=source, reason="malformed")
    if not isinstance(parsed, dict):
        raise ValidationError(f"{source} must contain a JSON object", field="config", value=source, reason="not an object")
    return parsed


def read_config(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a parameter file into a raw dictionary."""
    path = Path(path)
    try:
        if path.stat().st_size > MAX_CONFIG_SIZE:
            raise ValidationError(f"{path} exceeds {MAX_CONFIG_SIZE} bytes", field="config", value=str(path), reason="too large")
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}", field="config", value=str(path), reason="unreadable")
    return parse_json_object(text, str(path))


def apply_overrides(raw: Mapping[str, Any], overrides: Mapping[str, Optional[Any]]) -> Dict[str, Any]:
    """
    Merge flag values over file values; None means "not given".

    Raises:
        ValidationError: Unknown override field
    """
    merged = dict(raw)
    for key, value in overrides.items():
        if key not in OVERRIDE_FIELDS:
            raise ValidationError(f"{key} cannot be overridden", field=key, value=value, reason="unknown field")
        if value is not None:
            if key in merged and merged[key] != value:
                logger.debug(f"override {key}: {merged[key]!r} -> {value!r}")
            merged[key] = value
    return merged


def load_params(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Optional[Any]]] = None
) -> ModelParams:
    """
    Build ModelParams from a parameter file and/or flag overrides.

    Args:
        path: JSON parameter file (optional when flags supply everything)
        overrides: Values for sigma_bar, beta, nu, sigma_D

    Returns:
        ModelParams (assumptions are not checked here)

    Raises:
        ValidationError: Missing, malformed or out-of-range values
    """
    raw = read_config(path) if path is not None else {}
    merged = apply_overrides(raw, overrides or {})
    return ModelParams.from_dict(merged)


def parse_beta(text: str) -> float:
    """
    argparse type for --beta: a number or 'inf'.

    Raises ValueError so argparse reports it as a usage error.
    """
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    return float(text)


def thread_limit(env: Optional[Mapping[str, str]] = None) -> int:
    """
    Worker cap for sweeps: FBTUMOR_THREADS, else the CPU count.

    Raises:
        ValidationError: FBTUMOR_THREADS is not a positive integer
    """
    env = os.environ if env is None else env
    value = env.get(THREADS_ENV)
    if value is None or value == "":
        return os.cpu_count() or 1
    try:
        threads = int(value)
    except ValueError:
        raise ValidationError(f"{THREADS_ENV} must be an integer", field=THREADS_ENV, value=value, reason="not an integer")
    if threads < 1:
        raise ValidationError(f"{THREADS_ENV} must be at least 1", field=THREADS_ENV, value=value, reason="non-positive")
    return threads
