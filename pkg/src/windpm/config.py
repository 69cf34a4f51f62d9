"""Scenario configuration: JSON schema, defaults and conversion to model objects."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

import jsonschema

from .costs import (DELTA_INSURANCE, END_OF_LIFE, FULL_CONTRACT, NORMAL_PHASE, ComponentType, Farm,
                    McSettings, Variant)
from .defaults import LIFE_MONTHS, REFERENCE_COMPONENTS
from .revenue import ConfigurationError, build_revenue_function, default_monthly_revenue, tile_revenue
from .simulate import POLICY_KINDS, PHASE_FULL_CONTRACT, PHASE_LIFETIME, Policy
from .solver import SolverConfig
from .stochastic import SeedPolicy, WeibullParams

# command-line variant names; the availability-guaranteed contract forms are
# full-contract models with an extra row
VARIANT_CHOICES = {
    "full-contract": (FULL_CONTRACT, None),
    "full-contract-prod-avail": (FULL_CONTRACT, "production"),
    "full-contract-time-avail": (FULL_CONTRACT, "time"),
    "normal-phase": (NORMAL_PHASE, None),
    "end-of-life": (END_OF_LIFE, None),
    "delta-insurance": (DELTA_INSURANCE, None),
}

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "life": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "farm": {
            "type": "object",
            "additionalProperties": False,
            "required": ["turbines", "components"],
            "properties": {
                "turbines": {"type": "integer", "minimum": 1},
                "pm_duration": _POS,
                "turbine_cost": {"oneOf": [_NONNEG, {"type": "array", "items": _NONNEG}]},
                "farm_cost": {"oneOf": [_NONNEG, {"type": "array", "items": _NONNEG}]},
                "components": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["name", "cm_cost", "pm_cost", "shape", "scale"],
                        "properties": {
                            "name": {"type": "string", "minLength": 1},
                            "cm_cost": _NONNEG,
                            "pm_cost": _NONNEG,
                            "component_cost": _NONNEG,
                            "shape": _POS,
                            "scale": _POS,
                            "cm_duration": _POS,
                        },
                    },
                },
            },
        },
        "revenue": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "monthly": {"type": "array", "items": _NONNEG, "minItems": 12},
                "low": _NONNEG,
                "high": _NONNEG,
                "low_month": {"type": "integer", "minimum": 1, "maximum": 12},
                "high_month": {"type": "integer", "minimum": 1, "maximum": 12},
            },
        },
        "variant": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": sorted(VARIANT_CHOICES)},
                "start": {"type": "integer", "minimum": 0},
                "end": {"type": "integer", "minimum": 1},
                "delta": {"type": "number", "minimum": 0, "maximum": 1},
                "base": {"enum": [FULL_CONTRACT, END_OF_LIFE]},
                "epsilon": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "monte_carlo": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "samples": {"type": "integer", "minimum": 1},
                "farm_scope": {"enum": ["slots", "farm"]},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "abs_gap": _NONNEG,
                "rel_gap": _NONNEG,
                "node_limit": {"type": "integer", "minimum": 1},
                "time_limit": _POS,
            },
        },
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "policy": {"enum": list(POLICY_KINDS)},
                "horizon": {"type": "integer", "minimum": 1},
                "replications": {"type": "integer", "minimum": 1},
                "window": {"type": "integer", "minimum": 1},
                "phase_rule": {"enum": [PHASE_FULL_CONTRACT, PHASE_LIFETIME]},
                "intervals": {"type": ["array", "null"], "items": {"type": "integer", "minimum": 1}},
                "interval_grid": {"type": "array", "items": {"type": "integer", "minimum": 1},
                                  "minItems": 1},
                "eol_skip": {"type": ["boolean", "null"]},
                "planner_samples": {"type": "integer", "minimum": 1},
            },
        },
        "insurance": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "deltas": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1},
                           "minItems": 1},
            },
        },
    },
}


def _reference_components():
    return [
        {"name": name, "cm_cost": cm, "pm_cost": pm, "component_cost": comp, "shape": shape,
         "scale": scale, "cm_duration": 1.0}
        for name, cm, pm, comp, shape, scale in REFERENCE_COMPONENTS
    ]


DEFAULTS = {
    "life": LIFE_MONTHS,
    "seed": 20240101,
    "farm": {"turbines": 10, "pm_duration": 1.0 / 6.0, "turbine_cost": 0.0, "farm_cost": 50.0,
             "components": _reference_components()},
    "revenue": {"low": 15.0, "high": 30.0, "low_month": 2, "high_month": 9},
    "variant": {"kind": "full-contract", "start": 0, "end": 120, "delta": 0.0,
                "base": FULL_CONTRACT, "epsilon": 1.0},
    "monte_carlo": {"samples": 10_000, "farm_scope": "slots"},
    "solver": {"abs_gap": 1e-6, "rel_gap": 1e-9, "node_limit": 20_000, "time_limit": 3600.0},
    "simulation": {"policy": "optimized-rolling", "horizon": 120, "replications": 1,
                   "window": 120, "phase_rule": PHASE_FULL_CONTRACT, "intervals": None,
                   "interval_grid": list(range(12, 73)), "eol_skip": None,
                   "planner_samples": 10_000},
    "insurance": {"deltas": [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key != "revenue":
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def schema_errors(raw) -> list[str]:
    validator = jsonschema.Draft7Validator(SCHEMA)
    errs = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    return [f"{'/'.join(str(p) for p in e.absolute_path) or '<root>'}: {e.message}" for e in errs]


def resolve(raw: dict | None = None) -> dict:
    """Validate a user config and fill in defaults; raises ConfigurationError."""
    raw = {} if raw is None else raw
    errs = schema_errors(raw)
    if errs:
        raise ConfigurationError("invalid config:\n  " + "\n  ".join(errs))
    cfg = _merge(DEFAULTS, raw)
    if "revenue" in raw:
        cfg["revenue"] = _merge(DEFAULTS["revenue"], raw["revenue"])
    _check_months(cfg)
    return cfg


def _check_months(cfg):
    T = cfg["life"]
    v = cfg["variant"]
    if not 0 <= v["start"] < v["end"] <= T:
        raise ConfigurationError(f"variant window [{v['start']}, {v['end']}] must lie in [0, {T}]")
    sim = cfg["simulation"]
    if sim["horizon"] > T:
        raise ConfigurationError(f"simulation horizon {sim['horizon']} exceeds life {T}")
    monthly = cfg["revenue"].get("monthly")
    if monthly is not None and len(monthly) not in (12, T):
        raise ConfigurationError(f"revenue.monthly needs 12 or {T} values, got {len(monthly)}")
    for key in ("turbine_cost", "farm_cost"):
        val = cfg["farm"][key]
        if isinstance(val, list) and len(val) != T:
            raise ConfigurationError(f"farm.{key} series needs {T} values")
    n = len(cfg["farm"]["components"])
    if sim["intervals"] is not None and len(sim["intervals"]) != n:
        raise ConfigurationError(f"simulation.intervals needs {n} values")


def load(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a JSON object")
    return resolve(raw)


def digest(cfg: dict, sections=("life", "seed", "farm", "revenue", "variant", "monte_carlo")) -> str:
    """Stable hash of the config sections that determine the estimates."""
    blob = json.dumps({k: cfg[k] for k in sections}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class Scenario:
    """Model objects built from a resolved config."""

    cfg: dict
    farm: Farm
    revenue: object
    life: int
    seed: int
    mc: McSettings
    solver: SolverConfig

    @property
    def component_names(self):
        return [c.name for c in self.farm.components]


def build(cfg: dict) -> Scenario:
    f = cfg["farm"]
    comps = []
    for c in f["components"]:
        comps.append(ComponentType(
            c["name"], float(c["cm_cost"]), float(c["pm_cost"]),
            float(c.get("component_cost", 0.0)),
            WeibullParams(scale=float(c["scale"]), shape=float(c["shape"])),
            float(c.get("cm_duration", 1.0))))
    if len({c.name for c in comps}) != len(comps):
        raise ConfigurationError("component names must be unique")

    def series(v):
        return tuple(float(x) for x in v) if isinstance(v, list) else float(v)

    farm = Farm(f["turbines"], tuple(comps), float(f["pm_duration"]), series(f["turbine_cost"]),
                series(f["farm_cost"]))
    T = cfg["life"]
    rev = cfg["revenue"]
    if rev.get("monthly") is not None:
        monthly = tile_revenue(rev["monthly"], T)
    else:
        monthly = tile_revenue(default_monthly_revenue(rev["low"], rev["high"], rev["low_month"],
                                                       rev["high_month"]), T)
    R = build_revenue_function(monthly, farm.gamma_bar)
    seed = cfg["seed"]
    mc = McSettings(cfg["monte_carlo"]["samples"], SeedPolicy(seed), cfg["monte_carlo"]["farm_scope"])
    s = cfg["solver"]
    solver = SolverConfig(abs_gap=s["abs_gap"], rel_gap=s["rel_gap"], node_limit=s["node_limit"],
                          time_limit=s["time_limit"])
    return Scenario(cfg, farm, R, T, seed, mc, solver)


def variant_of(cfg: dict, delta: float | None = None) -> Variant:
    v = cfg["variant"]
    kind, avail = VARIANT_CHOICES[v["kind"]]
    d = v["delta"] if delta is None else delta
    return Variant(kind, v["start"], v["end"], cfg["life"], delta=d if kind == DELTA_INSURANCE else 0.0,
                   base=v["base"], availability=avail,
                   epsilon=v["epsilon"] if avail else 1.0)


def policy_of(cfg: dict, intervals=None) -> Policy:
    s = cfg["simulation"]
    iv = intervals if intervals is not None else s["intervals"]
    return Policy(s["policy"], s["window"], s["phase_rule"],
                  tuple(iv) if iv is not None else None, s["eol_skip"])
