"""Experiment configuration: JSON schema, validation and canonical hashing.

A config is validated in two passes.  The schema pass rejects unknown keys and
wrong types; the semantic pass builds every object the run will need (fields,
driver specs, test functions) so that range errors surface before any
computation starts.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import jsonschema

KINDS = ("fbm", "irregularity", "flow", "transport-residual", "duality-sweep", "convergence")


class ConfigError(ValueError):
    """Raised for any invalid configuration; the CLI maps it to exit status 2."""


_vector = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_matrix = {"type": "array", "items": _vector, "minItems": 1}
_posint = {"type": "integer", "minimum": 1}

_field = {
    "type": "object",
    "required": ["type"],
    "properties": {
        "type": {"enum": ["trig", "sincos", "linear", "constant", "sum"]},
        "modes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["k", "re"],
                "properties": {"k": _vector, "re": _vector, "im": _vector},
                "additionalProperties": False,
            },
        },
        "dim": _posint,
        "terms": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["k"],
                "properties": {"k": _vector, "cos": _vector, "sin": _vector},
                "additionalProperties": False,
            },
        },
        "matrix": _matrix,
        "vector": _vector,
        "parts": {"type": "array", "items": {"$ref": "#/$defs/field"}, "minItems": 1},
        "modulation": {
            "type": "object",
            "required": ["edges", "levels"],
            "properties": {"edges": {"type": "array", "items": {"type": "number"}}, "levels": _vector},
            "additionalProperties": False,
        },
        "scale": {"type": "number"},
    },
    "additionalProperties": False,
}

_driver = {
    "type": "object",
    "required": ["type"],
    "properties": {
        "type": {"enum": ["fbm", "linear", "sine", "zero"]},
        "hurst": {"type": "number"},
        "dim": _posint,
        "velocity": _vector,
        "amplitude": _vector,
        "frequency": {"type": "number"},
    },
    "additionalProperties": False,
}

_initial = {
    "type": "object",
    "required": ["type"],
    "properties": {
        "type": {"enum": ["constant", "gaussian", "cosine"]},
        "value": {"type": "number"},
        "center": _vector,
        "width": {"type": "number", "exclusiveMinimum": 0},
        "amplitude": {"type": "number"},
        "wavevector": _vector,
        "phase": {"type": "number"},
    },
    "additionalProperties": False,
}

_test_function = {
    "type": "object",
    "required": ["center", "radius"],
    "properties": {
        "center": _vector,
        "radius": {"type": "number", "exclusiveMinimum": 0},
        "degree": {"type": "integer", "minimum": 0},
    },
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {"field": _field},
    "type": "object",
    "required": ["kind", "grid", "driver"],
    "properties": {
        "kind": {"enum": list(KINDS)},
        "description": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "gamma": {"type": "number"},
        "output": {"type": "string"},
        "grid": {
            "type": "object",
            "required": ["n_points"],
            "properties": {
                "n_points": {"type": "integer", "minimum": 3},
                "horizon": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "driver": _driver,
        "field": {"$ref": "#/$defs/field"},
        "initial": _initial,
        # fbm
        "samples": _posint,
        "covariance_times": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        # irregularity
        "rho": {"type": "number"},
        "gamma_w": {"type": "number"},
        "magnitudes": _vector,
        "pair_stride": _posint,
        "split_magnitude": {"type": "number"},
        # flow
        "points": _matrix,
        "method": {"enum": ["rk4", "euler"]},
        "substeps": _posint,
        "with_derivative": {"type": "boolean"},
        # transport-residual and duality-sweep
        "test_functions": {"type": "array", "items": _test_function, "minItems": 1},
        "test_function": _test_function,
        "points_per_radius": {"type": "integer", "minimum": 4},
        "min_steps": _posint,
        "max_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "statistic": {"enum": ["max", "mean"]},
        "snapshot_points": _posint,
        "t0": {"type": "number", "exclusiveMinimum": 0},
        "epsilons": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        # convergence
        "quantity": {"enum": ["flow-endpoint", "rough-integral"]},
        "levels": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2},
    },
    "additionalProperties": False,
}

_REQUIRED_BY_KIND = {
    "fbm": [],
    "irregularity": ["rho"],
    "flow": ["field", "points"],
    "transport-residual": ["field", "initial", "test_functions"],
    "duality-sweep": ["field", "initial", "test_function", "epsilons"],
    "convergence": ["quantity", "levels"],
}

_validator = jsonschema.Draft202012Validator(SCHEMA)


def load(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def _where(error):
    return "/".join(str(p) for p in error.absolute_path) or "<root>"


def validate(config: dict) -> dict:
    """Schema and semantic validation.  Returns the config unchanged or raises ConfigError."""
    errors = sorted(_validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        raise ConfigError(f"{_where(first)}: {first.message}")
    missing = [k for k in _REQUIRED_BY_KIND[config["kind"]] if k not in config]
    if missing:
        raise ConfigError(f"kind {config['kind']!r} requires: {', '.join(missing)}")
    # building the run objects performs the remaining range checks
    from .experiments import prepare

    try:
        prepare(config)
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return config


def canonical_json(config: dict) -> str:
    return json.dumps(config, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()
