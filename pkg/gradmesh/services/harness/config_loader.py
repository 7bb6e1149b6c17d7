"""
TOML experiment configuration.

Sections [strategy], [model], [data], [training] and [run] flatten into top-level
ExperimentConfig fields; [pricing] and [latency] stay nested. `[strategy] name` maps to
the `strategy` field.
"""

from pathlib import Path
from typing import Any

import tomli
from loguru import logger
from pydantic import ValidationError

from gradmesh.core.exceptions import ConfigurationError
from gradmesh.models.experiment import ExperimentConfig

FLAT_SECTIONS = ("strategy", "model", "data", "training", "run")
NESTED_SECTIONS = ("pricing", "latency")
RENAMED_KEYS = {("strategy", "name"): "strategy"}


def parse_value(raw: str) -> Any:
    """A TOML literal when it parses as one (numbers, booleans, inf, arrays), else the raw string."""
    try:
        return tomli.loads(f"value = {raw}")["value"]
    except tomli.TOMLDecodeError:
        return raw.strip()


def _set_nested(target: dict, path: list[str], value: Any) -> None:
    for part in path[:-1]:
        node = target.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigurationError(f"cannot set '{'.'.join(path)}': '{part}' is not a section")
        target = node
    target[path[-1]] = value


def flatten_sections(document: dict[str, Any]) -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for section, body in document.items():
        if section in FLAT_SECTIONS and isinstance(body, dict):
            for key, value in body.items():
                flat[RENAMED_KEYS.get((section, key), key)] = value
        else:
            # nested sections and top-level keys pass through; unknown ones fail validation
            flat[section] = body
    return flat


def apply_override(flat: dict[str, Any], assignment: str) -> None:
    """Apply one `section.key=value` (or bare `key=value`) override in place."""
    if "=" not in assignment:
        raise ConfigurationError(f"override '{assignment}' is not of the form key=value")
    dotted, raw = assignment.split("=", 1)
    path = [part.strip() for part in dotted.strip().split(".") if part.strip()]
    if not path:
        raise ConfigurationError(f"override '{assignment}' has an empty key")
    value = parse_value(raw)
    if path[0] in NESTED_SECTIONS:
        _set_nested(flat, path, value)
        return
    if path[0] in FLAT_SECTIONS and len(path) == 2:
        flat[RENAMED_KEYS.get((path[0], path[1]), path[1])] = value
        return
    if len(path) == 1:
        flat[path[0]] = value
        return
    raise ConfigurationError(f"unknown configuration key '{dotted.strip()}'")


def build_config(flat: dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(flat)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in error['loc']) or 'config'}: {error['msg']}" for error in exc.errors()
        )
        raise ConfigurationError(f"invalid configuration: {problems}") from exc


def load_config(
    path: str | Path | None = None, overrides: list[str] | None = None, seed: int | None = None
) -> ExperimentConfig:
    """Read the TOML file (if any), apply overrides in order, then --seed, and validate.

    Raises:
        ConfigurationError: unreadable file, bad TOML, unknown keys or invalid values
    """
    flat: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as handle:
                flat = flatten_sections(tomli.load(handle))
        except OSError as exc:
            raise ConfigurationError(f"cannot read config file '{path}': {exc}") from exc
        except tomli.TOMLDecodeError as exc:
            raise ConfigurationError(f"config file '{path}' is not valid TOML: {exc}") from exc
        logger.debug(f"Loaded config from {path}")
    for assignment in overrides or []:
        apply_override(flat, assignment)
    if seed is not None:
        flat["seed"] = seed
    return build_config(flat)
