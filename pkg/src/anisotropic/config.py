"""Scenario configuration: JSON documents validated against a fixed schema.

Coefficient functions are given as polynomial tables, constants or a named
closed form, never as code::

    {"polynomial": [{"coeff": [[1, 0], [0, 1]], "powers": [0, 0]},
                    {"coeff": [[0.2, 0], [0, 0.1]], "powers": [1, 0]}]}
    {"constant": [0.3, 0.0]}
    {"named": "sphere_conformal", "radius": 1.0}
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import finsler, tensors
from .errors import ConfigError

_VEC = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_COEFF = {
    "oneOf": [
        {
            "type": "object",
            "properties": {
                "polynomial": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "properties": {"coeff": {}, "powers": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
                        "required": ["coeff", "powers"],
                        "additionalProperties": False,
                    },
                }
            },
            "required": ["polynomial"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"constant": {}},
            "required": ["constant"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"named": {"enum": sorted(finsler.NAMED_CLOSED_FORMS)}, "radius": {"type": "number", "exclusiveMinimum": 0}},
            "required": ["named"],
            "additionalProperties": False,
        },
    ]
}
_FIELD = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["rotation", "dilation", "constant", "linear", "polynomial"]},
        "i": {"type": "integer", "minimum": 0},
        "j": {"type": "integer", "minimum": 0},
        "value": _VEC,
        "matrix": {"type": "array"},
        "offset": _VEC,
        "c": _VEC,
        "a": {"type": "array"},
        "q": {"type": "array"},
    },
    "required": ["kind"],
    "additionalProperties": False,
}
_SPAN = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "dimension": {"type": "integer", "minimum": 1, "maximum": 6},
        "metric": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["euclidean", "riemannian", "randers", "quartic"]},
                "a": _COEFF,
                "b": _COEFF,
                "q": _COEFF,
                "axis_margin": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "chart": {
            "type": "object",
            "properties": {"lower": _VEC, "upper": _VEC},
            "additionalProperties": False,
        },
        "samples": {
            "type": "object",
            "properties": {
                "points": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "properties": {"x": _VEC, "v": _VEC},
                        "required": ["x", "v"],
                        "additionalProperties": False,
                    },
                },
                "random": {
                    "type": "object",
                    "properties": {
                        "seed": {"type": "integer", "minimum": 0},
                        "count": {"type": "integer", "minimum": 1},
                        "box": {"type": "number", "exclusiveMinimum": 0},
                    },
                    "required": ["seed", "count"],
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "tolerances": {
            "type": "object",
            "properties": {
                "integration": {"type": "number", "exclusiveMinimum": 0},
                "derivative": {"type": "number", "exclusiveMinimum": 0},
                "suite": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "geodesic": {
            "type": "object",
            "properties": {
                "x0": _VEC,
                "v0": _VEC,
                "t_span": _SPAN,
                "n_out": {"type": "integer", "minimum": 2},
                "connection": {"enum": ["spray", "chern", "berwald"]},
            },
            "required": ["x0", "v0"],
            "additionalProperties": False,
        },
        "jacobi": {
            "type": "object",
            "properties": {
                "x0": _VEC,
                "v0": _VEC,
                "J0": _VEC,
                "J0dot": _VEC,
                "t_span": _SPAN,
                "n_out": {"type": "integer", "minimum": 2},
                "connection": {"enum": ["chern", "berwald"]},
            },
            "required": ["x0", "v0", "J0", "J0dot"],
            "additionalProperties": False,
        },
        "lie": {
            "type": "object",
            "properties": {
                "field": _FIELD,
                "threshold": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["field"],
            "additionalProperties": False,
        },
        "check": {
            "type": "object",
            "properties": {
                "properties": {"type": "array", "items": {"type": "string"}},
                "extension_seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
            },
            "additionalProperties": False,
        },
    },
    "required": ["dimension", "metric", "samples"],
    "additionalProperties": False,
}

DEFAULT_TOLERANCES = {"integration": 1e-9, "derivative": 1e-6}


@dataclass
class Scenario:
    """Validated configuration plus the objects built from it."""

    raw: dict
    digest: str
    metric: finsler.MetricSpec
    samples: list
    seed: Optional[int]
    tolerances: dict
    source: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.metric.dim

    def block(self, name):
        return self.raw.get(name)


def _error_location(err: jsonschema.ValidationError):
    path = "/".join(str(p) for p in err.absolute_path)
    return path or "<root>"


def _fail(source, msg):
    raise ConfigError(f"{source}: {msg}")


def parse_document(text: str, source="<config>") -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=_error_location)
    if errors:
        lines = [f"{source}: field {_error_location(e)}: {e.message}" for e in errors]
        raise ConfigError("\n".join(lines))
    return doc


def _coefficient(spec, dim, shape, source, where):
    try:
        if "polynomial" in spec:
            terms = [{"coeff": t["coeff"], "powers": t["powers"]} for t in spec["polynomial"]]
            poly = finsler.Polynomial.from_table(terms, dim)
            if tuple(poly.coeffs.shape[1:]) != shape:
                _fail(source, f"field {where}: coefficient shape {tuple(poly.coeffs.shape[1:])}, expected {shape}")
            return poly
        if "constant" in spec:
            arr = np.asarray(spec["constant"], dtype=float)
            if arr.shape != shape:
                _fail(source, f"field {where}: constant has shape {arr.shape}, expected {shape}")
            return finsler.Polynomial.constant(arr, dim)
        radius = float(spec.get("radius", 1.0))
        return finsler.NAMED_CLOSED_FORMS[spec["named"]](dim, radius**2)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        _fail(source, f"field {where}: {exc}")


def _vector(values, dim, source, where):
    arr = np.asarray(values, dtype=float)
    if arr.shape != (dim,):
        _fail(source, f"field {where}: expected {dim} components, got {arr.size}")
    return arr


def build_metric(doc: dict, chart: tensors.ChartDomain, source="<config>") -> finsler.MetricSpec:
    dim = doc["dimension"]
    spec = doc["metric"]
    kind = spec["kind"]
    domain = tensors.ConicDomain(chart)
    needed = {"euclidean": (), "riemannian": ("a",), "randers": ("a", "b"), "quartic": ("q",)}[kind]
    for key in needed:
        if key not in spec:
            _fail(source, f"field metric/{key}: required for kind {kind!r}")
    try:
        if kind == "euclidean":
            return finsler.euclidean(dim, domain)
        if kind == "riemannian":
            return finsler.riemannian(_coefficient(spec["a"], dim, (dim, dim), source, "metric/a"), dim, domain)
        if kind == "randers":
            a = _coefficient(spec["a"], dim, (dim, dim), source, "metric/a")
            b = _coefficient(spec["b"], dim, (dim,), source, "metric/b")
            return finsler.randers(a, b, dim, domain)
        q = _coefficient(spec["q"], dim, (dim,) * 4, source, "metric/q")
        return finsler.quartic(q, dim, spec.get("axis_margin", 0.0), chart)
    except ConfigError:
        raise
    except ValueError as exc:
        _fail(source, f"field metric: {exc}")


def build_chart(doc: dict, source="<config>") -> tensors.ChartDomain:
    dim = doc["dimension"]
    chart = doc.get("chart", {})
    lower = _vector(chart["lower"], dim, source, "chart/lower") if "lower" in chart else None
    upper = _vector(chart["upper"], dim, source, "chart/upper") if "upper" in chart else None
    if lower is not None and upper is not None and np.any(lower >= upper):
        _fail(source, "field chart: lower bounds must be below upper bounds")
    as_tuple = lambda b: None if b is None else tuple(float(t) for t in b)  # noqa: E731
    return tensors.ChartDomain(dim, as_tuple(lower), as_tuple(upper))


def build_samples(doc: dict, metric, seed_override=None, source="<config>"):
    dim = doc["dimension"]
    block = doc["samples"]
    if ("points" in block) == ("random" in block):
        _fail(source, "field samples: give exactly one of 'points' or 'random'")
    if "points" in block:
        out = []
        for k, p in enumerate(block["points"]):
            x = _vector(p["x"], dim, source, f"samples/points/{k}/x")
            v = _vector(p["v"], dim, source, f"samples/points/{k}/v")
            out.append(tensors.TangentSample(x, v))
        return out, seed_override
    rnd = block["random"]
    seed = int(rnd["seed"]) if seed_override is None else int(seed_override)
    rng = np.random.default_rng(seed)
    box = None
    if "box" in rnd:
        box = (-rnd["box"] * np.ones(dim), rnd["box"] * np.ones(dim))
    return tensors.random_samples(metric.domain, rng, int(rnd["count"]), box=box), seed


def load(path=None, text=None, seed=None, tol=None) -> Scenario:
    """Parse, validate and build a scenario. ``seed`` and ``tol`` override the file."""
    if text is None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    source = str(path) if path is not None else "<config>"
    doc = parse_document(text, source)
    chart = build_chart(doc, source)
    metric = build_metric(doc, chart, source)
    samples, used_seed = build_samples(doc, metric, seed, source)
    tolerances = dict(DEFAULT_TOLERANCES)
    tolerances.update(doc.get("tolerances", {}))
    if tol is not None:
        tolerances["integration"] = float(tol)
    digest = hashlib.sha256(text.encode()).hexdigest()
    return Scenario(doc, digest, metric, samples, used_seed, tolerances, source)


def build_field(spec: dict, dim: int, source="<config>") -> tensors.VectorField:
    kind = spec["kind"]
    try:
        if kind == "rotation":
            return tensors.rotation_field(dim, spec.get("i", 0), spec.get("j", 1))
        if kind == "dilation":
            return tensors.dilation_field(dim)
        if kind == "constant":
            return tensors.constant_field(_vector(spec["value"], dim, source, "lie/field/value"))
        if kind == "linear":
            offset = spec.get("offset")
            return tensors.linear_field(np.asarray(spec["matrix"], dtype=float), None if offset is None else np.asarray(offset, dtype=float))
        return tensors.polynomial_field(
            np.asarray(spec["c"], dtype=float), np.asarray(spec["a"], dtype=float), np.asarray(spec["q"], dtype=float)
        )
    except KeyError as exc:
        _fail(source, f"field lie/field/{exc.args[0]}: required for kind {kind!r}")
    except ValueError as exc:
        _fail(source, f"field lie/field: {exc}")


__all__ = ["DEFAULT_TOLERANCES", "SCHEMA", "Scenario", "build_field", "load", "parse_document"]
