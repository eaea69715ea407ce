"""Model configuration files: schema, validation and model construction.

A configuration is a JSON object::

    {
      "model": {"kind": "gm1", "inter_arrival": {"family": "deterministic", "value": 1.0}, "mu": 1.5},
      "sim": {"seed": 1, "events": 1000000, "replications": 10},
      "output": {"format": "json", "s_grid": [0.25, 0.5, 1, 2, 4], "n_max": 10}
    }

Model kinds are ``gm1`` (``inter_arrival``, ``mu``), ``gmn1`` (``inter_arrival``
and a rate schedule ``mu``), ``gmc`` (``inter_arrival``, ``servers``, ``mu``)
and ``mngn1`` (arrival schedule ``lam``, head ``services`` and
``service_tail``).  A rate schedule is a number or ``{"head": [...], "tail": x}``.
An optional ``sim_model`` replaces the model that is simulated (the analytic
side still uses ``model``); it exists for negative controls of ``verify``.
Unknown fields are rejected everywhere.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema

from .distributions import from_dict as dist_from_dict
from .errors import ConfigError, DomainError
from .gm1 import Gm1Model
from .gmn1 import Gmn1Model
from .mngn1 import MnGn1Model
from .schedule import RateSchedule
from .sim import Partition

DEFAULT_S_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)

_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}


def _family(name: str, props: dict[str, Any]) -> dict[str, Any]:
    return {
        "type": "object",
        "properties": {"family": {"const": name}, **props},
        "required": ["family", *props],
        "additionalProperties": False,
    }


_DIST = {"oneOf": [
    _family("exponential", {"rate": _POS}),
    _family("deterministic", {"value": _POS}),
    _family("erlang", {"shape": {"type": "integer", "minimum": 1}, "rate": _POS}),
    _family("hyperexponential", {"probs": {"type": "array", "items": _NONNEG, "minItems": 1},
                                 "rates": {"type": "array", "items": _POS, "minItems": 1}}),
    _family("uniform", {"lo": _NONNEG, "hi": _POS}),
]}

_SCHEDULE = {"oneOf": [
    _POS,
    {"type": "object",
     "properties": {"head": {"type": "array", "items": _POS}, "tail": _POS},
     "required": ["tail"], "additionalProperties": False},
]}


def _kind(name: str, props: dict[str, Any]) -> dict[str, Any]:
    return {
        "type": "object",
        "properties": {"kind": {"const": name}, **props},
        "required": ["kind", *props],
        "additionalProperties": False,
    }


_MODEL = {"oneOf": [
    _kind("gm1", {"inter_arrival": _DIST, "mu": _POS}),
    _kind("gmn1", {"inter_arrival": _DIST, "mu": _SCHEDULE}),
    _kind("gmc", {"inter_arrival": _DIST, "servers": {"type": "integer", "minimum": 1}, "mu": _POS}),
    _kind("mngn1", {"lam": _SCHEDULE, "services": {"type": "array", "items": _DIST},
                    "service_tail": _DIST}),
]}

_PARTITION = {"oneOf": [
    {"type": "object", "properties": {"level": {"type": "integer", "minimum": 0}},
     "required": ["level"], "additionalProperties": False},
    {"type": "object", "properties": {"two_step": {"type": "integer", "minimum": 1}},
     "required": ["two_step"], "additionalProperties": False},
    {"type": "object",
     "properties": {"down": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                    "up": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                    "tail": {"enum": ["D", "M", "U"]}},
     "required": ["down", "up"], "additionalProperties": False},
]}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$id": "rbq.config/1",
    "type": "object",
    "properties": {
        "model": _MODEL,
        "sim_model": _MODEL,
        "sim": {
            "type": "object",
            "properties": {
                "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
                "events": {"type": "integer", "minimum": 1},
                "horizon": _POS,
                "warmup": {"type": "integer", "minimum": 0},
                "replications": {"type": "integer", "minimum": 1},
                "trackers": {"type": "array", "items": _PARTITION},
                "residual_levels": {"type": "integer", "minimum": 0},
            },
            "not": {"required": ["events", "horizon"]},
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {
                "format": {"enum": ["json", "csv"]},
                "s_grid": {"type": "array", "items": _NONNEG, "minItems": 1},
                "n_max": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "verify": {
            "type": "object",
            "properties": {
                "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "min_samples": {"type": "integer", "minimum": 2},
                "min_prob": _NONNEG,
            },
            "additionalProperties": False,
        },
    },
    "required": ["model"],
    "additionalProperties": False,
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


@dataclass(frozen=True)
class SimOptions:
    seed: int = 0
    events: int | None = 1_000_000
    horizon: float | None = None
    warmup: int | None = None
    replications: int = 10
    trackers: tuple[Partition, ...] = (Partition.level(0), Partition.level(1),
                                       Partition.two_step(1), Partition.two_step(2))
    residual_levels: int | None = None


@dataclass(frozen=True)
class OutputOptions:
    format: str = "json"
    s_grid: tuple[float, ...] = DEFAULT_S_GRID
    n_max: int = 10


@dataclass(frozen=True)
class VerifyOptions:
    """Thresholds for ``verify``: family-wise level, minimum sample size and probability checked."""

    alpha: float = 0.01
    min_samples: int = 1000
    min_prob: float = 1e-3


@dataclass(frozen=True)
class ModelConfig:
    kind: str
    model: Any
    sim_model: Any
    servers: int | None
    sim: SimOptions
    output: OutputOptions
    verify: VerifyOptions
    record: dict[str, Any] = field(repr=False, compare=False)


def validate(record: Any) -> None:
    """Raise :class:`ConfigError` listing every schema violation."""
    errors = sorted(_VALIDATOR.iter_errors(record), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines))


def build_model(record: dict[str, Any]) -> tuple[str, Any, int | None]:
    """``(kind, model, servers)``; G/M/1 stays a :class:`Gm1Model`, G/M/c becomes G/Mn/1."""
    kind = record["kind"]
    try:
        if kind == "gm1":
            return kind, Gm1Model(dist_from_dict(record["inter_arrival"]), float(record["mu"])), None
        if kind == "gmn1":
            return kind, Gmn1Model(dist_from_dict(record["inter_arrival"]),
                                   RateSchedule.from_dict(record["mu"], offset=1)), None
        if kind == "gmc":
            c = int(record["servers"])
            g = dist_from_dict(record["inter_arrival"])
            mu = float(record["mu"])
            model = Gmn1Model(g, RateSchedule(tuple(k * mu for k in range(1, c)), c * mu))
            return kind, model, c
        if kind == "mngn1":
            return kind, MnGn1Model(RateSchedule.from_dict(record["lam"], offset=0),
                                    tuple(dist_from_dict(d) for d in record["services"]),
                                    dist_from_dict(record["service_tail"])), None
    except DomainError as exc:
        raise ConfigError(f"invalid model: {exc}") from exc
    raise ConfigError(f"unknown model kind {kind!r}")


def parse(record: dict[str, Any]) -> ModelConfig:
    """Validate and convert a decoded JSON record; the record itself is not modified."""
    validate(record)
    record = copy.deepcopy(record)
    kind, model, servers = build_model(record["model"])
    sim_model = build_model(record["sim_model"])[1] if "sim_model" in record else model
    s = record.get("sim", {})
    try:
        trackers = tuple(Partition.from_dict(p) for p in s["trackers"]) if "trackers" in s \
            else SimOptions.trackers
    except DomainError as exc:
        raise ConfigError(f"invalid tracker partition: {exc}") from exc
    events = s.get("events", None if "horizon" in s else SimOptions.events)
    sim = SimOptions(seed=int(s.get("seed", 0)), events=events, horizon=s.get("horizon"),
                     warmup=s.get("warmup"), replications=int(s.get("replications", 10)),
                     trackers=trackers, residual_levels=s.get("residual_levels"))
    if sim.events is not None and sim.warmup is not None and sim.warmup >= sim.events:
        raise ConfigError("sim.warmup must be smaller than sim.events")
    o = record.get("output", {})
    output = OutputOptions(format=o.get("format", "json"),
                           s_grid=tuple(float(x) for x in o.get("s_grid", DEFAULT_S_GRID)),
                           n_max=int(o.get("n_max", 10)))
    v = record.get("verify", {})
    verify = VerifyOptions(**v)
    return ModelConfig(kind=kind, model=model, sim_model=sim_model, servers=servers, sim=sim,
                       output=output, verify=verify, record=record)


def load(path: str | Path) -> ModelConfig:
    """Read, validate and parse a JSON configuration file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        record = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse(record)


__all__ = ["SCHEMA", "ModelConfig", "SimOptions", "OutputOptions", "VerifyOptions",
           "validate", "build_model", "parse", "load"]
