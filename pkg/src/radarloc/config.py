"""Run configuration: one JSON or YAML file, units spelled out in every key."""
from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import dataclass

import jsonschema
import numpy as np
import yaml

from .batch import DriftModel, OffsetPrior
from .eval import DriftLevel, SweepConfig
from .formats import read_scene
from .mapping import InverseSensorModel
from .registration import SearchSpec
from .scene import SceneSpec, SensorConfig, periodic_row_scene, urban_loop_scene


class ConfigError(ValueError):
    pass


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_prob = {"type": "number", "minimum": 0, "maximum": 1}
_open_prob = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_SENSOR = _obj({
    "max_range_m": _pos,
    "fov_half_angle_deg": {"type": "number", "exclusiveMinimum": 0, "maximum": 180},
    "detection_prob": _prob,
    "clutter_rate_per_scan": _nonneg,
    "range_sigma_m": _nonneg,
    "azimuth_sigma_deg": _nonneg,
    "occlusion_enabled": {"type": "boolean"},
    "occlusion_width_m": _nonneg,
})

SCHEMA = _obj({
    "scene": {
        "oneOf": [
            _obj({"file": {"type": "string"}}, ["file"]),
            _obj({"builtin": {"enum": ["urban_loop", "periodic_row"]}, "seed": {"type": "integer"},
                  "period_m": _pos}, ["builtin"]),
        ]
    },
    "trajectory": _obj({"speed_mps": _pos, "scan_rate_hz": _pos}),
    "simulate": _obj({"duration_s": _pos}),
    "sensor": _SENSOR,
    "map_sensor": _SENSOR,
    "search": _obj({
        "delta_t_m": _pos, "delta_phi_deg": _pos,
        "n_l_cells": {"type": "integer", "minimum": 0, "multipleOf": 2},
        "m_steps": {"type": "integer", "minimum": 0},
    }),
    "prior": _obj({"sigma_t_m": _nonneg, "sigma_phi_deg": _nonneg}),
    "sensor_model": _obj({"prior_occ": _open_prob, "p_occ_A": _open_prob, "p_free_BC": _open_prob,
                          "near_radius_m": _nonneg}),
    "batch": _obj({"duration_s": _pos, "lengths_s": {"type": "array", "items": _pos, "minItems": 1},
                   "end_time_s": _nonneg}),
    "drift": {"type": "array", "minItems": 1, "items": _obj({
        "label": {"type": "string"},
        "position_law": {"enum": ["linear", "quadratic"]},
        "sigma_pos_end_m": _nonneg,
        "sigma_heading_end_deg": _nonneg,
    }, ["label"])},
    "gates": _obj({"speed_mps": _nonneg, "range_m": _pos}),
    "seeds": _obj({"base": {"type": "integer", "minimum": 0}}),
    "sweep": _obj({"trials": {"type": "integer", "minimum": 1}, "paired": {"type": "boolean"}}),
    "registration": _obj({"rotation": {"enum": ["spectral", "spatial"]},
                          "grid_half_extent_m": {"oneOf": [_pos, {"type": "null"}]}}),
    "output_dir": {"type": "string"},
})

DEFAULTS = {
    "scene": {"builtin": "urban_loop", "seed": 0},
    "trajectory": {"speed_mps": 6.0, "scan_rate_hz": 10.0},
    "simulate": {},
    "sensor": {},
    "search": {"delta_t_m": 0.10, "delta_phi_deg": 1.0, "n_l_cells": 120, "m_steps": 18},
    "prior": {"sigma_t_m": 2.0, "sigma_phi_deg": 3.0},
    "sensor_model": {"prior_occ": 0.1, "p_occ_A": 0.2, "p_free_BC": 0.1, "near_radius_m": 0.0},
    "batch": {"duration_s": 5.0},
    "drift": [{"label": "none"}],
    "gates": {"speed_mps": 1.0, "range_m": 50.0},
    "seeds": {"base": 0},
    "sweep": {"trials": 20, "paired": False},
    "registration": {"rotation": "spectral", "grid_half_extent_m": None},
    "output_dir": "out",
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def sensor_from(d: dict) -> SensorConfig:
    kw = {}
    names = {"max_range_m": "max_range", "detection_prob": "detection_prob",
             "clutter_rate_per_scan": "clutter_rate", "range_sigma_m": "range_sigma",
             "occlusion_enabled": "occlusion_enabled", "occlusion_width_m": "occlusion_width"}
    for k, v in d.items():
        if k in names:
            kw[names[k]] = v
    if "fov_half_angle_deg" in d:
        kw["fov_half_angle"] = math.radians(d["fov_half_angle_deg"])
    if "azimuth_sigma_deg" in d:
        kw["azimuth_sigma"] = math.radians(d["azimuth_sigma_deg"])
    return SensorConfig(**kw)


@dataclass
class RunConfig:
    raw: dict
    base_dir: str = "."

    # construction

    @classmethod
    def from_dict(cls, d: dict | None = None, base_dir: str = ".") -> "RunConfig":
        d = {} if d is None else d
        try:
            jsonschema.validate(d, SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config {where}: {exc.message}") from None
        cfg = cls(_merge(DEFAULTS, d), base_dir)
        cfg._check()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as f:
                text = f.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        try:
            d = yaml.safe_load(text) if str(path).endswith((".yaml", ".yml")) else json.loads(text)
        except (yaml.YAMLError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        if d is not None and not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        return cls.from_dict(d, os.path.dirname(os.path.abspath(path)))

    def _check(self):
        sc = self.raw["scene"]
        if "file" in sc and not os.path.exists(self.resolve(sc["file"])):
            raise ConfigError(f"scene file not found: {sc['file']}")
        try:
            self.sensor()
            self.map_sensor()
            self.model()
            self.search()
            self.drift_levels()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def resolve(self, path: str) -> str:
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)

    def with_overrides(self, seed=None, out=None) -> "RunConfig":
        raw = copy.deepcopy(self.raw)
        if seed is not None:
            raw["seeds"]["base"] = int(seed)
        if out is not None:
            raw["output_dir"] = out
        return RunConfig(raw, self.base_dir)

    # typed views

    @property
    def seed(self) -> int:
        return int(self.raw["seeds"]["base"])

    @property
    def output_dir(self) -> str:
        return self.raw["output_dir"]

    def scene(self) -> tuple[SceneSpec, np.ndarray]:
        sc = self.raw["scene"]
        if "file" in sc:
            scene, wp = read_scene(self.resolve(sc["file"]))
            if wp is None:
                raise ConfigError("scene file has no waypoints_m")
            return scene, wp
        if sc["builtin"] == "urban_loop":
            return urban_loop_scene(seed=sc.get("seed", 0))
        return periodic_row_scene(period=sc.get("period_m", 4.0), seed=sc.get("seed", 0))

    def sensor(self) -> SensorConfig:
        return sensor_from(self.raw["sensor"])

    def map_sensor(self) -> SensorConfig:
        return sensor_from(self.raw.get("map_sensor", self.raw["sensor"]))

    def search(self) -> SearchSpec:
        s = self.raw["search"]
        return SearchSpec(s["delta_t_m"], math.radians(s["delta_phi_deg"]), s["n_l_cells"], s["m_steps"])

    def prior(self) -> OffsetPrior:
        p = self.raw["prior"]
        return OffsetPrior(p["sigma_t_m"], math.radians(p["sigma_phi_deg"]))

    def model(self) -> InverseSensorModel:
        m = self.raw["sensor_model"]
        return InverseSensorModel(m["prior_occ"], m["p_occ_A"], m["p_free_BC"], m["near_radius_m"])

    def drift_levels(self) -> tuple[DriftLevel, ...]:
        out = []
        for d in self.raw["drift"]:
            if "sigma_pos_end_m" in d or "sigma_heading_end_deg" in d:
                model = DriftModel(d.get("position_law", "quadratic"), d.get("sigma_pos_end_m", 0.0),
                                   math.radians(d.get("sigma_heading_end_deg", 0.0)))
            else:
                model = None
            out.append(DriftLevel(d["label"], model))
        return tuple(out)

    def batch_lengths(self) -> tuple[float, ...]:
        b = self.raw["batch"]
        return tuple(b.get("lengths_s", [b["duration_s"]]))

    def sweep(self) -> SweepConfig:
        scene, wp = self.scene()
        t = self.raw["trajectory"]
        return SweepConfig(
            scene=scene, waypoints=wp, sensor=self.sensor(), map_sensor=self.map_sensor(),
            speed=t["speed_mps"], scan_rate=t["scan_rate_hz"], search=self.search(), model=self.model(),
            prior=self.prior(), batch_lengths=self.batch_lengths(), drift_levels=self.drift_levels(),
            trials=self.raw["sweep"]["trials"], base_seed=self.seed,
            speed_gate=self.raw["gates"]["speed_mps"], range_gate=self.raw["gates"]["range_m"],
            grid_half_extent=self.raw["registration"]["grid_half_extent_m"],
            rotation=self.raw["registration"]["rotation"], paired=self.raw["sweep"]["paired"],
        )

    def to_json(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True) + "\n"
