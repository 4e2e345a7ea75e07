"""
JSON configuration documents.

A document is a flat object with ``"schema": 1`` (optional) and any subset of
the :class:`~fas_keygen.channel.SystemConfig` fields. Powers and gains may
be given in logarithmic units through suffixed keys::

    {"schema": 1, "P_A_dBm": 30, "sigma2_dBm": -80, "gamma0_dB": -30, "N": 7}

Each quantity is accepted in exactly one unit; unknown keys are rejected.
"""

import json
import math
from pathlib import Path

from .channel import SystemConfig, dbm_to_watts, db_to_linear
from .errors import ConfigError

__all__ = ["SCHEMA_VERSION", "load_config", "config_from_dict", "config_to_dict"]

SCHEMA_VERSION = 1

_LOG_FIELDS = {
    "P_A_dBm": ("P_A", dbm_to_watts),
    "P_B_dBm": ("P_B", dbm_to_watts),
    "sigma2_dBm": ("sigma2", dbm_to_watts),
    "gamma0_dB": ("gamma0", db_to_linear),
}
_LINEAR_FIELDS = tuple(SystemConfig.__dataclass_fields__)


def config_from_dict(doc):
    """Build a validated :class:`SystemConfig` from a parsed document."""
    if not isinstance(doc, dict):
        raise ConfigError(f"configuration must be a JSON object, got {type(doc).__name__}")
    doc = dict(doc)
    schema = doc.pop("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {schema!r} (expected {SCHEMA_VERSION})")
    values = {}
    for key, raw in doc.items():
        if key in _LOG_FIELDS:
            name, convert = _LOG_FIELDS[key]
            if name in doc:
                raise ConfigError(f"{name} given both as {key!r} and {name!r}")
            if isinstance(raw, bool) or not isinstance(raw, (int, float)):
                raise ConfigError(f"{key} must be a number, got {raw!r}")
            values[name] = convert(float(raw))
        elif key in _LINEAR_FIELDS:
            values[key] = raw
        else:
            raise ConfigError(f"unknown configuration field {key!r}")
    try:
        return SystemConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path):
    """Read and validate a configuration file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(doc)


def config_to_dict(config):
    """Linear-unit document that :func:`config_from_dict` maps back to ``config``."""
    out = {"schema": SCHEMA_VERSION}
    for name in _LINEAR_FIELDS:
        value = getattr(config, name)
        if isinstance(value, tuple):
            value = list(value)
        if isinstance(value, float) and not math.isfinite(value):
            value = None
        out[name] = value
    return out
