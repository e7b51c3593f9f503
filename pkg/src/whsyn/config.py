"""Run configuration: one TOML or JSON document, validated against ``SCHEMA``."""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import jsonschema

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .constraints import WHConstraint
from .lifting import ALL_STRATEGIES, Plant, StrategyPair
from .lmi import Controller, SolverOptions
from .metrics import MetricConfig
from .plants import PLANTS


class ConfigError(ValueError):
    pass


_matrix = {"oneOf": [{"type": "number"}, {"type": "array", "items": {"oneOf": [
    {"type": "number"}, {"type": "array", "items": {"type": "number"}}]}}]}

_constraint = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"type": "string"},
        "r": {"type": "integer", "minimum": 0},
        "h": {"type": "integer", "minimum": 0},
        "s": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}

SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "whsyn run configuration",
    "type": "object",
    "required": ["plant"],
    "properties": {
        "plant": {
            "type": "object",
            "properties": {
                "builtin": {"enum": sorted(PLANTS)},
                "file": {"type": "string"},
                "A": _matrix, "B": _matrix, "Bw": _matrix, "C": _matrix, "D": _matrix, "Dw": _matrix,
            },
            "additionalProperties": False,
        },
        "constraint": _constraint,
        "sweep": {
            "type": "object",
            "properties": {
                "constraints": {"type": "array", "items": _constraint, "minItems": 1},
                "strategies": {"type": "array", "items": {"type": "string"}, "minItems": 1},
            },
            "additionalProperties": False,
        },
        "strategy": {"type": "string"},
        "controller": {
            "type": "object",
            "properties": {
                "mode": {"enum": ["analyze-given", "synthesize-nonswitching", "synthesize-switching",
                                  "stability-only"]},
                "K": _matrix,
                "gains": {"type": "object", "additionalProperties": _matrix},
                "file": {"type": "string"},
            },
            "additionalProperties": False,
        },
        "solver": {
            "type": "object",
            "properties": {
                "eps": {"type": "number", "exclusiveMinimum": 0},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
                "backend": {"type": "string"},
                "max_iters": {"type": "integer", "minimum": 1},
                "margin": {"type": "number", "minimum": 0},
                "bound": {"type": "number", "exclusiveMinimum": 0},
                "fallback_bound": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "decay_rate": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
            "additionalProperties": False,
        },
        "simulation": {
            "type": "object",
            "properties": {
                "pmiss": {"type": "number", "minimum": 0, "maximum": 1},
                "runs": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "horizon": {"type": "integer", "minimum": 1},
                "warmup": {"type": "integer", "minimum": 0},
                "x0": _matrix,
                "disturbance": {
                    "type": "object",
                    "properties": {
                        "kind": {"enum": ["none", "impulse", "burst"]},
                        "amplitude": {"type": "number"},
                        "length": {"type": "integer", "minimum": 1},
                        "start": {"type": "integer", "minimum": 0},
                    },
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "metrics": {
            "type": "object",
            "properties": {
                "upright_state_index": {"type": "integer", "minimum": 0},
                "upright_threshold": {"type": "number", "exclusiveMinimum": 0},
                "velocity_indices": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "discard_prefix": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "output": {"type": "string"},
    },
    "additionalProperties": False,
}


@dataclass(frozen=True)
class Disturbance:
    kind: str = "none"
    amplitude: float = 1.0
    length: int = 1
    start: int = 0


@dataclass(frozen=True)
class SimulationConfig:
    pmiss: float = 0.0
    runs: int = 1
    seed: int = 0
    horizon: int = 1000
    warmup: int = 0
    x0: Optional[tuple] = None
    disturbance: Disturbance = Disturbance()


@dataclass
class RunConfig:
    plant: Plant
    constraint: Optional[WHConstraint] = None
    strategy: StrategyPair = ALL_STRATEGIES[0]
    mode: str = "synthesize-switching"
    controller: Optional[Controller] = None
    solver: SolverOptions = field(default_factory=SolverOptions)
    eps: float = 1e-6
    bound: Optional[float] = None
    decay_rate: Optional[float] = None
    simulation: SimulationConfig = SimulationConfig()
    metrics: MetricConfig = MetricConfig()
    sweep_constraints: list = field(default_factory=list)
    sweep_strategies: list = field(default_factory=list)
    output: str = "out"
    source: Optional[Path] = None

    @property
    def stability_only(self) -> bool:
        return self.mode == "stability-only"


def read_document(path) -> dict:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        if path.suffix.lower() == ".toml":
            return tomllib.loads(raw.decode())
        return json.loads(raw)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None


def _resolve(base: Optional[Path], p: str) -> Path:
    q = Path(p)
    return q if q.is_absolute() or base is None else base.parent / q


def _plant(d: dict, base) -> Plant:
    if "builtin" in d:
        return PLANTS[d["builtin"]]()
    if "file" in d:
        d = read_document(_resolve(base, d["file"]))
    missing = [k for k in ("A", "B") if k not in d]
    if missing:
        raise ConfigError(f"plant needs {missing}")
    try:
        return Plant.from_json(d)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad plant: {exc}") from None


def _controller(d: dict, base) -> Optional[Controller]:
    if "file" in d:
        doc = read_document(_resolve(base, d["file"]))
        return Controller.from_json(doc.get("controller", doc))
    if "gains" in d:
        return Controller.per_node({int(k): v for k, v in d["gains"].items()})
    if "K" in d:
        return Controller.nonswitching(d["K"])
    return None


def _constraint(d: dict) -> WHConstraint:
    try:
        return WHConstraint.from_dict(d)
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None


def _strategy(text: str) -> StrategyPair:
    try:
        return StrategyPair.parse(text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse(doc: dict, source=None) -> RunConfig:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    base = Path(source) if source is not None else None
    plant = _plant(doc["plant"], base)
    cfg = RunConfig(plant=plant, source=base)
    if "constraint" in doc:
        cfg.constraint = _constraint(doc["constraint"])
    if "strategy" in doc:
        cfg.strategy = _strategy(doc["strategy"])
    ctl = doc.get("controller", {})
    cfg.mode = ctl.get("mode", "synthesize-switching")
    cfg.controller = _controller(ctl, base)
    if cfg.mode == "analyze-given" and cfg.controller is None:
        raise ConfigError("controller mode analyze-given needs K, gains or file")
    sv = doc.get("solver", {})
    cfg.eps = float(sv.get("eps", 1e-6))
    cfg.bound = sv.get("bound")
    cfg.decay_rate = sv.get("decay_rate")
    cfg.solver = SolverOptions(backend=sv.get("backend"), tolerance=float(sv.get("tolerance", 1e-8)),
                               max_iters=int(sv.get("max_iters", 100)), margin=float(sv.get("margin", 0.5)),
                               fallback_bound=sv.get("fallback_bound", 1e4))
    sim = dict(doc.get("simulation", {}))
    dist = Disturbance(**sim.pop("disturbance", {}))
    x0 = sim.pop("x0", None)
    if x0 is not None:
        x0 = tuple(float(v) for v in (x0 if isinstance(x0, list) else [x0]))
        if len(x0) != plant.n:
            raise ConfigError(f"simulation.x0 has {len(x0)} entries, plant has n={plant.n}")
    cfg.simulation = SimulationConfig(disturbance=dist, x0=x0, **sim)
    mc = doc.get("metrics", {})
    try:
        cfg.metrics = MetricConfig(**mc)
        cfg.metrics.check(plant.n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    sw = doc.get("sweep", {})
    cfg.sweep_constraints = [_constraint(c) for c in sw.get("constraints", [])]
    cfg.sweep_strategies = [_strategy(s) for s in sw.get("strategies", [])]
    cfg.output = doc.get("output", "out")
    return cfg


def load(path) -> RunConfig:
    return parse(read_document(path), source=path)
