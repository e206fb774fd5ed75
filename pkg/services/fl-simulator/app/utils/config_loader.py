"""
Experiment config files: flat KEY=value text, one experiment per file.

Keys are case-insensitive; `#` starts a comment. Every problem is reported
with the line of the offending key.
"""

import os
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from dotenv import dotenv_values
from pydantic import ValidationError

from app.core.exceptions import ConfigError
from app.core.logging_config import get_logger
from app.models.schemas import SimConfig

logger = get_logger(__name__)

Diagnostic = Tuple[Optional[int], str, str]


def key_lines(path: Union[str, Path]) -> Dict[str, int]:
    """1-based line number of each key's last assignment."""
    lines: Dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for number, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#") or "=" not in text:
                continue
            key = text.split("=", 1)[0].strip()
            if key.startswith("export "):
                key = key[len("export "):].strip()
            lines[key.lower()] = number
    return lines


def read_values(path: Union[str, Path]) -> Tuple[Dict[str, str], Dict[str, int]]:
    """Raw values (lower-case keys, empty values dropped) and their line numbers."""
    if not os.path.exists(path):
        raise ConfigError([(None, "path", f"Config file not found: {path}")])
    raw = dotenv_values(path)
    values = {key.lower(): value for key, value in raw.items() if value not in (None, "")}
    return values, key_lines(path)


def check_values(
    values: Dict[str, str], lines: Optional[Dict[str, int]] = None
) -> Tuple[Optional[SimConfig], List[Diagnostic], List[Diagnostic]]:
    """
    Validate raw key/value pairs.

    Returns:
        (config or None, errors, warnings)
    """
    lines = {key.lower(): line for key, line in (lines or {}).items()}
    names = {name.lower(): name for name in SimConfig.model_fields}
    fields = {names.get(key.lower(), key): value for key, value in values.items()}
    try:
        config = SimConfig(**fields)
    except ValidationError as e:
        errors = []
        for err in e.errors():
            key = str(err["loc"][0]) if err["loc"] else "config"
            message = "unknown key" if err["type"] == "extra_forbidden" else err["msg"]
            errors.append((lines.get(key.lower()), key, message))
        return None, errors, []

    cross_errors, cross_warnings = config.cross_checks()
    errors = [(lines.get(key.lower()), key, message) for key, message in cross_errors]
    warnings = [(lines.get(key.lower()), key, message) for key, message in cross_warnings]
    return (None if errors else config), errors, warnings


def validate_config(path: Union[str, Path]) -> Tuple[List[Diagnostic], List[Diagnostic]]:
    """Parse and check a config file without running it; problems are returned, not raised."""
    try:
        values, lines = read_values(path)
    except ConfigError as e:
        return e.diagnostics, []
    _, errors, warnings = check_values(values, lines)
    return errors, warnings


def load_config(path: Union[str, Path]) -> SimConfig:
    """
    Load a config file.

    Raises:
        ConfigError: One diagnostic per problem
    """
    values, lines = read_values(path)
    config, errors, warnings = check_values(values, lines)
    for line, key, message in warnings:
        logger.warning(f"{path}: line {line}: {key}: {message}")
    if errors:
        raise ConfigError(errors)
    logger.info(f"Loaded config {path}: {config.downlink.value}/{config.uplink.value}, "
                f"M={config.num_devices}, T={config.rounds}")
    return config
