from __future__ import annotations

import logging
from collections.abc import Mapping
from functools import lru_cache
from typing import Annotated, Any

from pydantic import TypeAdapter, ValidationError

from app.cli.schemas import LIST_FIELDS, POINT_LIST_FIELDS, ExperimentConfig
from app.utils.errors import ConfigError

logger = logging.getLogger(__name__)


@lru_cache(maxsize=None)
def _field_adapter(key: str) -> TypeAdapter[Any]:
    """Type and bounds of one config key, without the cross-field rules."""
    info = ExperimentConfig.model_fields[key]
    if info.metadata:
        return TypeAdapter(Annotated[(info.annotation, *info.metadata)])
    return TypeAdapter(info.annotation)


def _first_error(exc: ValidationError) -> tuple[str | None, str]:
    first = exc.errors()[0]
    location = first.get("loc") or ()
    return (str(location[0]) if location else None), first.get("msg", "invalid value")


def _split_value(key: str, raw: str) -> Any:
    """Lists are comma separated; point lists separate points with ';'."""
    if key in POINT_LIST_FIELDS:
        return [[item.strip() for item in point.split(",")] for point in raw.split(";") if point.strip()]
    if key in LIST_FIELDS:
        return [item.strip() for item in raw.split(",") if item.strip()]
    return raw


def _read_lines(text: str) -> tuple[dict[str, Any], dict[str, int]]:
    values: dict[str, Any] = {}
    lines: dict[str, int] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'key = value', got {stripped!r}", line=number)
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if not key:
            raise ConfigError("missing key before '='", line=number)
        if key in lines:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", line=number)
        if key not in ExperimentConfig.model_fields:
            raise ConfigError(f"unknown key {key!r}", line=number)
        if not raw:
            raise ConfigError(f"missing value for {key!r}", line=number)
        values[key] = _split_value(key, raw)
        try:
            _field_adapter(key).validate_python(values[key])
        except ValidationError as exc:
            raise ConfigError(f"{key}: {_first_error(exc)[1]}", line=number) from exc
        lines[key] = number
    return values, lines


def parse_config(text: str, overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
    """Parse and validate an experiment config.

    `overrides` (command-line flags) replace file values before validation.
    Errors name the offending key and the line it was set on.
    """
    values, lines = _read_lines(text)
    if "experiment" not in values:
        raise ConfigError("experiment required")
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    try:
        config = ExperimentConfig.model_validate(values)
    except ValidationError as exc:
        key, message = _first_error(exc)
        if key is None:
            raise ConfigError(message) from exc
        raise ConfigError(f"{key}: {message}", line=lines.get(key)) from exc
    logger.info("Config parsed experiment=%s model=%s keys=%s", config.experiment, config.model, len(values))
    return config


def _format_scalar(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def echo_config(config: ExperimentConfig) -> str:
    """Effective config with defaults resolved, in the input format.

    Floats use repr so parsing the echo reproduces the same values exactly.
    """
    out = []
    for key in ExperimentConfig.model_fields:
        value = getattr(config, key)
        if value is None:
            continue
        if key in POINT_LIST_FIELDS:
            text = "; ".join(", ".join(_format_scalar(v) for v in point) for point in value)
        elif key in LIST_FIELDS:
            text = ", ".join(_format_scalar(v) for v in value)
        else:
            text = _format_scalar(value)
        out.append(f"{key} = {text}")
    return "\n".join(out) + "\n"
