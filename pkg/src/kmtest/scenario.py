"""Scenario files for Monte Carlo studies and test-battery parsing shared with the CLI."""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema

from . import bandwidth as bw
from .kernels import KernelSpec
from .simulation import (
    CurveSampler,
    Exponential,
    Gamma,
    LogNormal,
    NoCensoring,
    ScenarioSpec,
    TargetRate,
    TestConfig,
    Uniform,
    UniformOnSupport,
    read_curve_csv,
)
from .statistics import FORMS, StatisticSpec

SCHEMA_VERSION = 1

MEASURES = ("energy", "gaussian", "laplacian", "matern", "rational_quadratic", "distance_induced")

_positive = {"type": "number", "exclusiveMinimum": 0}

TEST_SCHEMA = {
    "type": "object",
    "required": ["measure"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "measure": {"enum": list(MEASURES)},
        "form": {"enum": list(FORMS)},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 2},
        "sigma": {"oneOf": [_positive, {"const": "auto"}]},
        "nu": {"enum": [0.5, 1.5, 2.5]},
        "c": _positive,
        "beta": _positive,
        "origin": {"type": "number"},
        "bandwidth": {"enum": [bw.UNCENSORED, bw.ALL]},
        "scaling": {"enum": [bw.SQRT_HALF, bw.SQRT]},
    },
}

GENERATOR_SCHEMA = {
    "type": "object",
    "required": ["distribution"],
    "oneOf": [
        {
            "properties": {"distribution": {"const": "exponential"}, "rate": _positive},
            "required": ["rate"],
            "additionalProperties": False,
        },
        {
            "properties": {"distribution": {"const": "gamma"}, "shape": _positive, "scale": _positive},
            "required": ["shape", "scale"],
            "additionalProperties": False,
        },
        {
            "properties": {"distribution": {"const": "lognormal"}, "mu": {"type": "number"}, "sigma": _positive},
            "required": ["mu", "sigma"],
            "additionalProperties": False,
        },
        {
            "properties": {"distribution": {"const": "curve"}, "path": {"type": "string"}},
            "required": ["path"],
            "additionalProperties": False,
        },
    ],
}

CENSORING_SCHEMA = {
    "type": "object",
    "required": ["model"],
    "oneOf": [
        {"properties": {"model": {"const": "none"}}, "additionalProperties": False},
        {"properties": {"model": {"const": "uniform"}, "upper": _positive}, "required": ["upper"], "additionalProperties": False},
        {
            "properties": {"model": {"const": "uniform_on_support"}, "multiplier": _positive},
            "additionalProperties": False,
        },
        {
            "properties": {
                "model": {"const": "target_rate"},
                "rate": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "reference": {"enum": ["pooled", "group0"]},
            },
            "required": ["rate"],
            "additionalProperties": False,
        },
    ],
}

_count = {"type": "integer", "minimum": 2}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "group0", "group1", "censoring", "sizes", "tests"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "group0": GENERATOR_SCHEMA,
        "group1": GENERATOR_SCHEMA,
        "censoring": CENSORING_SCHEMA,
        "sizes": {"type": "array", "minItems": 1, "items": {"type": "array", "prefixItems": [_count, _count], "minItems": 2, "maxItems": 2}},
        "grid": {
            "type": "object",
            "required": ["parameter", "values"],
            "additionalProperties": False,
            "properties": {
                "parameter": {"type": "string", "pattern": r"^group[01]\.[a-z_]+$"},
                "values": {"type": "array", "minItems": 1, "items": {"type": "number"}},
            },
        },
        "tests": {"type": "array", "minItems": 1, "items": TEST_SCHEMA},
        "replications": {"type": "integer", "minimum": 1},
        "permutations": {"type": "integer", "minimum": 1},
        "permutation_mode": {"enum": ["auto", "exact", "monte_carlo"]},
        "alpha_level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    },
}


class ScenarioError(ValueError):
    pass


def _path(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def validate(doc: dict) -> None:
    """Raise ScenarioError listing every schema violation with its field path."""
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise ScenarioError("; ".join(f"{_path(e)}: {e.message}" for e in errors))


def parse_test(entry: dict) -> TestConfig:
    """TestConfig from one entry of a test battery."""
    jsonschema.validate(entry, TEST_SCHEMA)
    m = entry["measure"]
    kw = {}
    if m in ("energy", "distance_induced"):
        kw["alpha"] = float(entry.get("alpha", 1.0))
        if m == "distance_induced":
            kw["origin"] = float(entry.get("origin", 0.0))
    if m in ("gaussian", "laplacian", "matern"):
        kw["sigma"] = entry.get("sigma", "auto")
        if m == "matern":
            kw["nu"] = float(entry.get("nu", 0.5))
    if m == "rational_quadratic":
        kw["c"] = float(entry.get("c", 1.0))
        kw["beta"] = float(entry.get("beta", 1.0))
    spec = StatisticSpec(KernelSpec(m, **kw), entry.get("form", "v"))
    rule = bw.BandwidthRule(entry.get("bandwidth", bw.UNCENSORED), entry.get("scaling", bw.SQRT_HALF))
    return TestConfig(spec, rule, entry.get("name", ""))


def _generator(entry: dict, base: Path):
    d = entry["distribution"]
    if d == "exponential":
        return Exponential(entry["rate"])
    if d == "gamma":
        return Gamma(entry["shape"], entry["scale"])
    if d == "lognormal":
        return LogNormal(entry["mu"], entry["sigma"])
    return CurveSampler(read_curve_csv(base / entry["path"]))


def _censoring(entry: dict):
    m = entry["model"]
    if m == "none":
        return NoCensoring()
    if m == "uniform":
        return Uniform(entry["upper"])
    if m == "uniform_on_support":
        return UniformOnSupport(entry.get("multiplier", 3.0))
    return TargetRate(entry["rate"], entry.get("reference", "pooled"))


def expand(doc: dict, base: Path | str = ".", workers: int = 1, overrides: dict | None = None) -> list[ScenarioSpec]:
    """One ScenarioSpec per (grid value, sizes) combination."""
    validate(doc)
    doc = copy.deepcopy(doc)
    for key, value in (overrides or {}).items():
        if value is not None:
            doc[key] = value
    validate(doc)
    base = Path(base)
    tests = tuple(parse_test(t) for t in doc["tests"])
    grid = doc.get("grid")
    points = [(None, None)] if grid is None else [(grid["parameter"], v) for v in grid["values"]]
    out = []
    try:
        for param, value in points:
            gens = {}
            for g in ("group0", "group1"):
                entry = dict(doc[g])
                if param is not None and param.split(".")[0] == g:
                    field_name = param.split(".", 1)[1]
                    if field_name not in entry or field_name in ("distribution", "path"):
                        raise ScenarioError(f"grid/parameter: {param} is not a numeric field of {g}")
                    entry[field_name] = value
                gens[g] = _generator(entry, base)
            labels = {} if param is None else {param: value}
            for n0, n1 in doc["sizes"]:
                out.append(
                    ScenarioSpec(
                        gens["group0"],
                        gens["group1"],
                        _censoring(doc["censoring"]),
                        n0,
                        n1,
                        tests,
                        replications=doc.get("replications", 500),
                        permutations=doc.get("permutations", 1000),
                        alpha_level=doc.get("alpha_level", 0.05),
                        seed=doc.get("seed", 0),
                        permutation_mode=doc.get("permutation_mode", "auto"),
                        workers=workers,
                        labels=labels,
                    )
                )
    except (ValueError, OSError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc)) from exc
    return out


def load(path: str | Path, workers: int = 1, overrides: dict | None = None) -> list[ScenarioSpec]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError("<root>: scenario must be a JSON object")
    return expand(doc, path.parent, workers, overrides)

