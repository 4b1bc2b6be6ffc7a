"""JSON model and run-config files.

Schema violations raise :class:`ConfigError` carrying a JSON pointer to
the offending member.
"""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np

from .discount import discount_from_dict
from .errors import ConfigError, ModelError
from .model import ConeParams, ModelSpec, SeparableReward, TabulatedReward, build_action_grid

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

MODEL_SCHEMA = {
    "type": "object",
    "required": ["states", "action", "discount", "reward", "kernel"],
    "properties": {
        "states": {"type": "integer", "minimum": 1},
        "name": {"type": "string"},
        "action": {
            "type": "object",
            "required": ["bounds", "per_dim"],
            "properties": {
                "bounds": {"type": "array", "minItems": 1,
                           "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": _NUM}},
                "per_dim": {"type": "integer", "minimum": 2},
                "include_vertices": {"type": "boolean"},
            },
            "additionalProperties": False,
        },
        "discount": {
            "type": "object",
            "required": ["family"],
            "properties": {"family": {"enum": ["exponential", "quasiHyperbolic", "exponentialMixture",
                                               "generalizedHyperbolic", "tabulated", "sampled"]}},
        },
        "reward": {
            "type": "object",
            "required": ["form"],
            "properties": {"form": {"enum": ["separable", "general"]}},
            "if": {"properties": {"form": {"const": "separable"}}},
            "then": {"required": ["g"], "properties": {"g": {"type": "array"}}},
            "else": {"required": ["times", "f"],
                     "properties": {"times": {"type": "array"}, "f": {"type": "array"},
                                    "tail_bound": {"type": "number", "minimum": 0}}},
        },
        "kernel": {
            "type": "object",
            "required": ["type", "data"],
            "properties": {"type": {"enum": ["transition", "generator"]}, "data": {"type": "array"}},
            "additionalProperties": False,
        },
        "cone": {"type": "object", "required": ["iota", "theta"],
                 "properties": {"iota": _POS, "theta": _POS}, "additionalProperties": False},
        "lipschitz": {"type": "number", "minimum": 0},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["model"],
    "properties": {
        "model": {"type": "string", "minLength": 1},
        "mode": {"enum": ["dt", "ct"]},
        "lambda": _POS,
        "seed": {"type": "integer", "minimum": 0},
        "schedule": {
            "type": "object",
            "properties": {"lambda0": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                           "factor": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                           "lambda_min": _POS},
            "additionalProperties": False,
        },
        "solver": {
            "type": "object",
            "properties": {"damping": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                           "tol": _POS,
                           "max_iter": {"type": "integer", "minimum": 1},
                           "anderson": {"type": "boolean"},
                           "multistart": {"type": "integer", "minimum": 0}},
            "additionalProperties": False,
        },
        "thresholds": {
            "type": "object",
            "properties": {"deviation_gap": _POS, "off_support_mass": _POS, "self_consistency": _POS},
            "additionalProperties": False,
        },
        "bridge": {
            "type": "object",
            "required": ["h_list"],
            "properties": {"h_list": {"type": "array", "minItems": 1, "items": _POS}},
            "additionalProperties": False,
        },
        "scan": {
            "type": "object",
            "properties": {"gap_tol": _POS, "cap": {"type": "integer", "minimum": 1}},
            "additionalProperties": False,
        },
        "verify": {
            "type": "object",
            "properties": {"tol": _POS},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


def _pointer(path):
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in path)


def validate_document(doc, schema):
    """Raise :class:`ConfigError` for the most relevant schema violation."""
    validator = jsonschema.Draft202012Validator(schema)
    error = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if error is None:
        return
    path = list(error.absolute_path)
    if error.validator == "required" and isinstance(error.instance, dict):
        missing = [k for k in error.validator_value if k not in error.instance]
        if missing:
            path.append(missing[0])
    raise ConfigError(error.message, _pointer(path))


def _array(doc, key, ndim, pointer):
    try:
        a = np.array(doc[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"not a numeric array: {exc}", pointer) from None
    if a.ndim != ndim:
        raise ConfigError(f"expected a {ndim}-dimensional array", pointer)
    return a


def model_from_dict(doc):
    """Build a :class:`ModelSpec` from a parsed model document."""
    validate_document(doc, MODEL_SCHEMA)
    act = doc["action"]
    try:
        grid = build_action_grid(act["bounds"], act["per_dim"], act.get("include_vertices", False))
    except ModelError as exc:
        raise ConfigError(str(exc), "/action") from None
    try:
        disc = discount_from_dict(doc["discount"])
    except (ModelError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad discount: {exc}", "/discount") from None
    rew = doc["reward"]
    d = doc["states"]
    if rew["form"] == "separable":
        g = _array(rew, "g", 2, "/reward/g")
        if g.shape != (d, grid.size):
            raise ConfigError(f"g must be {d} x {grid.size}", "/reward/g")
        reward = SeparableReward(disc, g)
    else:
        f = _array(rew, "f", 3, "/reward/f")
        if f.shape[1:] != (d, grid.size):
            raise ConfigError(f"f must be times x {d} x {grid.size}", "/reward/f")
        try:
            reward = TabulatedReward(disc, np.array(rew["times"], dtype=float), f, float(rew.get("tail_bound", 0.0)))
        except ModelError as exc:
            raise ConfigError(str(exc), "/reward") from None
    kern = _array(doc["kernel"], "data", 3, "/kernel/data")
    if kern.shape != (grid.size, d, d):
        raise ConfigError(f"kernel data must be {grid.size} x {d} x {d}", "/kernel/data")
    cone = None
    if "cone" in doc:
        try:
            cone = ConeParams(float(doc["cone"]["iota"]), float(doc["cone"]["theta"]))
        except ModelError as exc:
            raise ConfigError(str(exc), "/cone") from None
    return ModelSpec(grid, reward, kern, doc["kernel"]["type"], cone=cone,
                     lipschitz=doc.get("lipschitz"), name=doc.get("name", ""))


def model_to_dict(model):
    out = {"states": model.states}
    if model.name:
        out["name"] = model.name
    out["action"] = model.grid.to_dict()
    out["discount"] = model.discount.to_dict()
    out["reward"] = model.reward.to_dict()
    out["kernel"] = {"type": model.kernel_type, "data": model.kernel.tolist()}
    if model.cone is not None:
        out["cone"] = {"iota": model.cone.iota, "theta": model.cone.theta}
    if model.lipschitz is not None:
        out["lipschitz"] = model.lipschitz
    return out


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None


def load_model(path):
    return model_from_dict(read_json(path))


def dumps(obj):
    """Deterministic JSON: sorted keys, shortest round-trip floats."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def save_model(model, path):
    Path(path).write_text(dumps(model_to_dict(model)), encoding="utf-8")


def load_config(path):
    doc = read_json(path)
    validate_document(doc, CONFIG_SCHEMA)
    return doc
