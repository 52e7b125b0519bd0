"""Config documents: defaults, JSON files and command-line overrides.

Every subcommand owns a default document. A user config file is merged on
top of it and must not introduce keys the defaults do not have, except
inside mappings whose default is empty (free-form maps such as model rate
overrides, validated by the engine that consumes them). Scalar leaves also
get a ``--flag`` each, and ``--set path=value`` reaches any leaf.
"""

from __future__ import annotations

import copy
import json
import math
from pathlib import Path
from typing import Any

SCHEMA_VERSION = 1
RESERVED = ("schema_version", "seed")


class CliError(Exception):
    """Error with an exit code and a machine-readable code for standard error."""

    exit_code = 1

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class UsageError(CliError):
    exit_code = 1


class ValidationError(CliError):
    exit_code = 2


class NumericalFailure(CliError):
    exit_code = 3


def load_config_file(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ValidationError("config_not_found", f"config file not found: {path}")
    try:
        doc = json.loads(p.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ValidationError("invalid_json", f"{path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError("invalid_config", "a config document must be a JSON object")
    return doc


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_leaf(path: str, default, value):
    if value is None or default is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ValidationError("invalid_type", f"{path} must be true or false")
        return value
    if isinstance(default, int):
        if _is_number(value) and float(value).is_integer():
            return int(value)
        raise ValidationError("invalid_type", f"{path} must be an integer")
    if isinstance(default, float):
        if not _is_number(value):
            raise ValidationError("invalid_type", f"{path} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ValidationError("invalid_type", f"{path} must be a string")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ValidationError("invalid_type", f"{path} must be a list")
        return value
    return value


def merge(defaults: dict, doc: dict, prefix: str = "") -> dict:
    """Overlay ``doc`` on ``defaults``, rejecting unknown keys and wrong types."""
    out = copy.deepcopy(defaults)
    for key, value in doc.items():
        path = f"{prefix}{key}"
        if key == "schema_version" and not prefix:
            if value != SCHEMA_VERSION:
                raise ValidationError("unsupported_schema_version",
                                      f"schema_version must be {SCHEMA_VERSION}, got {value!r}")
            continue
        if key not in defaults:
            raise ValidationError("unknown_config_key", f"unknown config key: {path}")
        default = defaults[key]
        if isinstance(default, dict):
            if not isinstance(value, dict):
                raise ValidationError("invalid_type", f"{path} must be an object")
            out[key] = merge(default, value, path + ".") if default else dict(value)
        else:
            out[key] = _check_leaf(path, default, value)
    return out


def leaves(doc: dict, prefix=()) -> list[tuple[tuple[str, ...], Any]]:
    """Scalar leaves as ``(path, default)``; empty mappings and lists are skipped."""
    found = []
    for key, value in doc.items():
        if isinstance(value, dict):
            found.extend(leaves(value, prefix + (key,)))
        elif not isinstance(value, list) and key not in RESERVED:
            found.append((prefix + (key,), value))
    return found


def flag_names(doc: dict) -> dict[str, tuple[str, ...]]:
    """Map ``--flag`` spellings to config paths, preferring the bare leaf name."""
    paths = [p for p, _ in leaves(doc)]
    counts: dict[str, int] = {}
    for p in paths:
        counts[p[-1]] = counts.get(p[-1], 0) + 1
    names = {}
    for p in paths:
        name = p[-1] if counts[p[-1]] == 1 else "-".join(p)
        names["--" + name.replace("_", "-")] = p
    return names


def parse_flag_value(text: str, default):
    """Interpret a command-line string using the type of the default."""
    if text.lower() in ("null", "none"):
        return None
    try:
        if isinstance(default, bool):
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, str):
            return text
    except ValueError:
        raise ValidationError("invalid_type", f"cannot read {text!r} as "
                              f"{type(default).__name__}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def get_path(doc: dict, path):
    for key in path:
        doc = doc[key]
    return doc


def apply_override(resolved: dict, defaults: dict, path, text: str) -> None:
    parent = resolved
    dparent = defaults
    for i, key in enumerate(path[:-1]):
        if key not in parent or not isinstance(parent[key], dict):
            raise ValidationError("unknown_config_key", f"unknown config key: {'.'.join(path)}")
        parent = parent[key]
        dparent = dparent.get(key, {}) if isinstance(dparent, dict) else {}
    leaf = path[-1]
    open_map = isinstance(dparent, dict) and not dparent and len(path) > 1
    if leaf not in parent and not open_map:
        raise ValidationError("unknown_config_key", f"unknown config key: {'.'.join(path)}")
    default = dparent.get(leaf) if isinstance(dparent, dict) else None
    if isinstance(default, dict):
        raise ValidationError("invalid_type", f"{'.'.join(path)} is an object; set its fields")
    value = parse_flag_value(text, default)
    parent[leaf] = _check_leaf(".".join(path), default, value)


def to_jsonable(value):
    """Plain JSON types; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if hasattr(value, "tolist"):
        return to_jsonable(value.tolist())
    if isinstance(value, complex):
        return [to_jsonable(value.real), to_jsonable(value.imag)]
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value  # enums
    return value
