"""JSON config format for protocols, models, and CLI runs.

Matrices are row-major lists of rows with each entry an ``[re, im]`` pair.
Time coefficients are tagged objects such as ``{"kind": "cos", ...}``.
Python's ``json`` writes floats with ``repr``, so parse-then-serialize
reproduces the same document byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import jsonschema
import numpy as np

from .errors import ProtocolError
from .lindblad import (
    DissipationChannel,
    LindbladGenerator,
    ModulatedGenerator,
    Protocol,
    Segment,
    coefficient_from_dict,
)
from .models import ModelSpec, builtin_model

_NUMBER = {"type": "number"}
_ENTRY = {"type": "array", "items": _NUMBER, "minItems": 2, "maxItems": 2}
_MATRIX = {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 1, "items": _ENTRY}}
_COEFF = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["const", "poly", "sin", "cos", "pow"]},
        "value": _NUMBER,
        "coeffs": {"type": "array", "items": _NUMBER, "minItems": 1, "maxItems": 5},
        "amplitude": _NUMBER,
        "frequency": _NUMBER,
        "phase": _NUMBER,
        "offset": _NUMBER,
        "scale": _NUMBER,
        "shift": _NUMBER,
        "exponent": _NUMBER,
    },
    "additionalProperties": False,
}
_SEGMENT = {
    "type": "object",
    "required": ["duration"],
    "properties": {
        "duration": {"type": "number", "exclusiveMinimum": 0},
        "hamiltonian": _MATRIX,
        "hamiltonian_terms": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["matrix", "coefficient"],
                "properties": {"matrix": _MATRIX, "coefficient": _COEFF},
                "additionalProperties": False,
            },
        },
        "channels": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["operator", "rate"],
                "properties": {"operator": _MATRIX, "rate": {"oneOf": [_NUMBER, _COEFF]}},
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}
_EXPECTED = {
    "type": "object",
    "properties": {
        "classification": {"type": "string"},
        "unit_eigenvalue_count": {"type": "integer", "minimum": 0},
        "conserved": {"type": "array", "items": _MATRIX},
        "theorem2": {"type": "boolean"},
        "relaxing": {"type": "boolean"},
    },
    "additionalProperties": False,
}
MODEL_SCHEMA = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "builtin": {"type": "string"},
        "params": {"type": "object"},
        "period": {"type": "number", "exclusiveMinimum": 0},
        "periodic": {"type": "boolean"},
        "segments": {"type": "array", "minItems": 1, "items": _SEGMENT},
        "expected": _EXPECTED,
        "model_params": {"type": "object"},
    },
    "oneOf": [{"required": ["builtin"]}, {"required": ["segments"]}],
    "additionalProperties": False,
}
TOLERANCE_KEYS = ("unit", "agreement", "slack", "threshold", "rate")
RUN_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "model": MODEL_SCHEMA,
        "samples": {"type": "integer", "minimum": 2},
        "slices": {"type": "integer", "minimum": 1},
        "horizon": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
        "periods": {"type": "integer", "minimum": 1},
        "rho0": {
            "oneOf": [
                _MATRIX,
                {"enum": ["mixed", "random", "anchor"]},
                {"type": "object", "required": ["level"], "properties": {"level": {"type": "integer", "minimum": 1}},
                 "additionalProperties": False},
            ]
        },
        "tolerances": {
            "type": "object",
            "properties": {k: {"type": "number", "exclusiveMinimum": 0} for k in TOLERANCE_KEYS},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """Malformed config; the message names the offending line or field."""


# ---------------------------------------------------------------------------
# matrices


def matrix_to_json(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(rows: list) -> np.ndarray:
    m = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ProtocolError(f"matrix must be square, got shape {m.shape}")
    return m


# ---------------------------------------------------------------------------
# protocols


def segment_to_dict(seg: Segment) -> dict:
    gen = seg.generator
    out: dict[str, Any] = {"duration": float(seg.duration)}
    if seg.constant:
        out["hamiltonian"] = matrix_to_json(gen.hamiltonian)
        out["channels"] = [
            {"operator": matrix_to_json(c.operator), "rate": float(c.rate)} for c in gen.channels
        ]
    else:
        out["hamiltonian_terms"] = [
            {"matrix": matrix_to_json(h), "coefficient": f.to_dict()} for h, f in gen.hamiltonian_terms
        ]
        out["channels"] = [{"operator": matrix_to_json(a), "rate": g.to_dict()} for a, g in gen.channels]
    return out


def segment_from_dict(spec: dict) -> Segment:
    duration = float(spec["duration"])
    chans = spec.get("channels", [])
    if "hamiltonian_terms" in spec or any(isinstance(c["rate"], dict) for c in chans):
        if "hamiltonian" in spec:
            raise ProtocolError("a segment takes either 'hamiltonian' or 'hamiltonian_terms', not both")
        terms = tuple(
            (matrix_from_json(t["matrix"]), coefficient_from_dict(t["coefficient"]))
            for t in spec.get("hamiltonian_terms", [])
        )
        channels = tuple(
            (matrix_from_json(c["operator"]),
             coefficient_from_dict(c["rate"] if isinstance(c["rate"], dict) else {"kind": "const", "value": c["rate"]}))
            for c in chans
        )
        if not terms and not channels:
            raise ProtocolError("modulated segment needs at least one term or channel")
        return Segment(duration, ModulatedGenerator(terms, channels))
    if "hamiltonian" not in spec:
        raise ProtocolError("constant segment needs a 'hamiltonian'")
    h = matrix_from_json(spec["hamiltonian"])
    channels = tuple(DissipationChannel(matrix_from_json(c["operator"]), float(c["rate"])) for c in chans)
    return Segment(duration, LindbladGenerator(h, channels))


def protocol_to_dict(protocol: Protocol) -> dict:
    return {
        "period": float(protocol.period),
        "periodic": bool(protocol.periodic),
        "segments": [segment_to_dict(s) for s in protocol.segments],
    }


def protocol_from_dict(spec: dict) -> Protocol:
    segments = tuple(segment_from_dict(s) for s in spec["segments"])
    return Protocol(segments, spec.get("period"), spec.get("periodic", True))


# ---------------------------------------------------------------------------
# models


def _expected_to_dict(expected: dict) -> dict:
    out = dict(expected)
    if "conserved" in out:
        out["conserved"] = [matrix_to_json(q) for q in out["conserved"]]
    return out


def _expected_from_dict(spec: dict) -> dict:
    out = dict(spec)
    if "conserved" in out:
        out["conserved"] = [matrix_from_json(q) for q in out["conserved"]]
    return out


def model_to_dict(model: ModelSpec) -> dict:
    out: dict[str, Any] = {"name": model.name, **protocol_to_dict(model.protocol)}
    if model.expected is not None:
        out["expected"] = _expected_to_dict(model.expected)
    if model.params:
        out["model_params"] = dict(model.params)
    return out


def model_from_dict(spec: dict) -> ModelSpec:
    if "builtin" in spec:
        return builtin_model(spec["builtin"], **spec.get("params", {}))
    expected = _expected_from_dict(spec["expected"]) if "expected" in spec else None
    return ModelSpec(spec.get("name", "custom"), protocol_from_dict(spec), expected, dict(spec.get("model_params", {})))


def dumps(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def serialize_model(model: ModelSpec) -> str:
    return dumps(model_to_dict(model))


def parse_model(text: str) -> ModelSpec:
    spec = load_json(text)
    _validate(spec, MODEL_SCHEMA)
    return model_from_dict(spec)


# ---------------------------------------------------------------------------
# run configs


@dataclass
class RunConfig:
    model: ModelSpec | None = None
    samples: int | None = None
    slices: int | None = None
    horizon: float | None = None
    seed: int | None = None
    out: str | None = None
    periods: int | None = None
    rho0: Any = None
    tolerances: dict[str, float] = field(default_factory=dict)


def load_json(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _validate(doc: Any, schema: dict) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors[:5]:
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"field {where}: {e.message}")
        raise ConfigError("; ".join(lines))


def parse_run_config(text: str) -> RunConfig:
    doc = load_json(text)
    _validate(doc, RUN_SCHEMA)
    cfg = RunConfig(**{k: v for k, v in doc.items() if k not in ("model", "rho0")})
    cfg.rho0 = doc.get("rho0")
    if isinstance(cfg.rho0, list):
        cfg.rho0 = matrix_from_json(cfg.rho0)
    if "model" in doc:
        try:
            cfg.model = model_from_dict(doc["model"])
        except (ProtocolError, ValueError, TypeError) as exc:
            raise ConfigError(f"field model: {exc}") from None
    return cfg
