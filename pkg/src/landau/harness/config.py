"""Experiment configuration: a versioned JSON schema with strict keys."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Union

import jsonschema

SCHEMA_VERSION = 1
SCENARIOS = ("run", "conservation", "poincare", "degiorgi", "rates", "moments", "lorentz-selftest")
DATA = ("maxwellian", "bimodal", "anisotropic", "compact_bump", "ring", "tall_bump", "spike", "blob")


class ConfigError(ValueError):
    pass


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}

SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "scenario"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "scenario": {"enum": list(SCENARIOS)},
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "string"},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "d": {"enum": [2, 3]},
                "n": {"type": "integer", "minimum": 8},
                "half_width": _pos,
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gamma": {"type": "number", "minimum": -2, "exclusiveMaximum": 0},
                "cfl_factor": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "t_end": _pos,
                "snapshot_interval": _pos,
                "positivity_floor": {"type": "number", "minimum": 0},
                "scheme": {"enum": ["euler", "rk2"]},
                "record_k0": {"type": "boolean"},
                "functionals": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["kind"],
                        "properties": {
                            "kind": {"enum": ["moment", "Msp", "Dsp", "entropy", "psi_moment"]},
                            "s": _num,
                            "p": _num,
                        },
                    },
                },
            },
        },
        "initial": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"enum": list(DATA)},
                "params": {"type": "object", "additionalProperties": {"type": ["number", "array"]}},
            },
        },
        "checkpoint_every": {"type": "integer", "minimum": 0},
        "restart_from": {"type": "string"},
        "save_snapshots": {"type": "boolean"},
        "conservation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "momentum_energy_tol": _pos,
                "entropy_rate_tol": _pos,
                "mass_tol": _pos,
            },
        },
        "poincare": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gamma": {"type": "number", "minimum": -2, "exclusiveMaximum": 0},
                "lambda": {"enum": ["gamma", "gamma+1"]},
                "eps_decades": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                "eps_per_decade": {"type": "integer", "minimum": 2},
                "family_seed": {"type": "integer", "minimum": 0},
                "n_random": {"type": "integer", "minimum": 0},
                "lattice_step": _pos,
                "widths": {"type": "array", "items": _pos, "minItems": 1},
                "focus": {"type": "array", "items": _num},
                "focus_count": {"type": "integer", "minimum": 0},
                "slope_tolerance": _pos,
                "min_decades": _pos,
            },
        },
        "degiorgi": {
            "type": "object",
            "additionalProperties": False,
            "required": ["s", "t_star", "T"],
            "properties": {
                "s": _pos,
                "p_gamma": _pos,
                "alpha": _pos,
                "t_star": _pos,
                "T": _pos,
                "n_max": {"type": "integer", "minimum": 1},
                "mode": {"enum": ["property", "ledger"]},
                "c0": _pos,
                "constants": {"type": "array", "items": _pos, "minItems": 3, "maxItems": 3},
                "t_stars": {"type": "array", "items": _pos},
                "sup_factor": _pos,
                "scaling_tolerance": _pos,
            },
        },
        "rates": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"s": _num, "p": {"type": "number", "exclusiveMinimum": 1}, "tolerance": _pos, "plateau_from": _pos},
        },
        "moments": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"s": {"type": "number", "exclusiveMinimum": 2}, "envelope": _pos},
        },
        "lorentz": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"fields": {"type": "integer", "minimum": 1}},
        },
    },
}

DEFAULTS: Dict[str, Any] = {
    "seed": 0,
    "output": "out",
    "grid": {"d": 3, "n": 32, "half_width": 8.0},
    "solver": {"gamma": -1.0, "cfl_factor": 0.4, "t_end": 1.0, "snapshot_interval": 0.1},
    "initial": {"name": "maxwellian"},
    "checkpoint_every": 0,
    "save_snapshots": True,
}


def _field_path(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def validate(raw: Dict[str, Any]) -> None:
    """Raise ConfigError listing every schema violation with its field path."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = [f"{_field_path(e)}: {e.message}" for e in errors]
        raise ConfigError("invalid config:\n  " + "\n  ".join(msgs))


def _merge(base: Dict[str, Any], top: Dict[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for k, v in top.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class ExperimentConfig:
    raw: Dict[str, Any]

    @property
    def scenario(self) -> str:
        return self.raw["scenario"]

    def block(self, name: str) -> Dict[str, Any]:
        return dict(self.raw.get(name, {}))

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    def to_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, indent=2)


def load_config(raw: Dict[str, Any], overrides: Dict[str, Any] = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("a config must be a JSON object")
    validate(raw)
    merged = _merge(DEFAULTS, raw)
    if overrides:
        merged = _merge(merged, overrides)
    validate(merged)
    cfg = ExperimentConfig(merged)
    recheck(cfg)
    return cfg


def recheck(cfg: ExperimentConfig) -> None:
    """Module-level constraints that the schema cannot express."""
    from ..grid import GridSpec
    from ..solver import SolverConfig

    try:
        GridSpec(**cfg.block("grid"))
        SolverConfig(**cfg.block("solver"))
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.scenario == "degiorgi":
        from ..degiorgi import DeGiorgiConfig, DeGiorgiError

        dg = cfg.block("degiorgi")
        try:
            DeGiorgiConfig(t_star=dg["t_star"], T=dg["T"], gamma=cfg.block("solver")["gamma"], s=dg["s"],
                           d=cfg.block("grid")["d"], p_gamma=dg.get("p_gamma"), alpha=dg.get("alpha"))
        except DeGiorgiError as exc:
            raise ConfigError(f"degiorgi: {exc}") from exc
        if dg["T"] > cfg.block("solver")["t_end"] + 1e-12:
            raise ConfigError("degiorgi: T exceeds solver.t_end")


def read_configs(path: Union[str, Path], overrides: Dict[str, Any] = None) -> List[ExperimentConfig]:
    """One config or a list of configs from a JSON file."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    items = data if isinstance(data, list) else [data]
    return [load_config(item, overrides) for item in items]
