"""Run configuration: one JSON document, schema-validated, env-overridable.

Sections: plant, sensors, control (with nested safety), ml, service, plus
a global seed and episode length. Unknown keys are rejected outright so a
typo cannot silently fall back to a default. AQF_PORT and AQF_DATA_DIR
override the service section; AQF_CONFIG names the default config path.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema

from .control import ControlConfig, SafetyEnvelope
from .plant import (
    CHANNELS,
    Channel,
    DEFAULT_NOISE_SIGMA,
    DEFAULT_SPIKE_MAGNITUDE,
    FarmState,
    PlantParams,
    SensorConfig,
)


class ConfigError(ValueError):
    pass


_NUM = {"type": "number"}
_CHANNEL_MAP = {
    "type": "object",
    "properties": {ch.value: _NUM for ch in CHANNELS},
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "episode": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"n_ticks": {"type": "integer", "minimum": 1}},
        },
        "plant": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dt_s": _NUM,
                "ambient_temp_c": _NUM,
                "ambient_humidity_pct": _NUM,
                "drain_rate_pct_per_min": _NUM,
                "fill_rate_pct_per_min": _NUM,
                "k_temp_per_min": _NUM,
                "heater_c_per_min": _NUM,
                "cooler_c_per_min": _NUM,
                "k_hum_per_min": _NUM,
                "humidifier_pct_per_min": _NUM,
                "dehumidifier_pct_per_min": _NUM,
                "ph_drift_per_min": _NUM,
                "disease_onset_prob_per_tick": _NUM,
                "initial": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "water_level": _NUM,
                        "water_temp_c": _NUM,
                        "air_humidity_pct": _NUM,
                        "ph": _NUM,
                        "behavior_score": _NUM,
                        "diseased": {"type": "boolean"},
                        "fish_count": {"type": "integer", "minimum": 0},
                    },
                },
            },
        },
        "sensors": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "noise_sigma": _CHANNEL_MAP,
                "dropout_prob": _NUM,
                "spike_prob": _NUM,
                "spike_magnitude": _CHANNEL_MAP,
            },
        },
        "control": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "desired_water_level": _NUM,
                "lower_temperature_threshold": _NUM,
                "upper_temperature_threshold": _NUM,
                "lower_humidity_threshold": _NUM,
                "upper_humidity_threshold": _NUM,
                "motor_fill_rate": _NUM,
                "tick_interval_s": _NUM,
                "safety": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "hard_temp_min": _NUM,
                        "hard_temp_max": _NUM,
                        "low_level_alarm": _NUM,
                        "sensor_stale_ticks": {"type": "integer", "minimum": 1},
                    },
                },
            },
        },
        "ml": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["rule_only", "ml_assist"]},
                "max_feed_g": _NUM,
                "forest": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "n_trees": {"type": "integer", "minimum": 1},
                        "max_depth": {"type": "integer", "minimum": 1},
                        "min_leaf": {"type": "integer", "minimum": 1},
                    },
                },
                "svm": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "lambda": _NUM,
                        "epochs": {"type": "integer", "minimum": 1},
                    },
                },
                "gbm": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "n_stages": {"type": "integer", "minimum": 0},
                        "learning_rate": _NUM,
                        "max_depth": {"type": "integer", "minimum": 1},
                        "min_leaf": {"type": "integer", "minimum": 1},
                    },
                },
                "mlp": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "n_hidden": {"type": "integer", "minimum": 1},
                        "epochs": {"type": "integer", "minimum": 0},
                        "lr": _NUM,
                        "batch": {"type": "integer", "minimum": 1},
                    },
                },
            },
        },
        "service": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "port": {"type": "integer", "minimum": 1, "maximum": 65535},
                "data_dir": {"type": "string"},
                "tick_wall_s": _NUM,
                "ui_dir": {"type": "string"},
            },
        },
    },
}

ML_DEFAULTS = {
    "mode": "rule_only",
    "max_feed_g": 50.0,
    "forest": {"n_trees": 50, "max_depth": 6, "min_leaf": 2},
    "svm": {"lambda": 0.01, "epochs": 50},
    "gbm": {"n_stages": 100, "learning_rate": 0.1, "max_depth": 2, "min_leaf": 2},
    "mlp": {"n_hidden": 16, "epochs": 600, "lr": 0.5, "batch": 128},
}

SERVICE_DEFAULTS = {"port": 8080, "data_dir": "data", "tick_wall_s": 0.25}


@dataclass
class RunConfig:
    seed: int
    n_ticks: int
    plant: PlantParams
    initial: Optional[FarmState]
    sensors: SensorConfig
    control: ControlConfig
    ml: dict
    service: dict
    raw: dict = field(default_factory=dict)


def _merge(defaults: dict, override: dict) -> dict:
    out = dict(defaults)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _channel_map(doc: dict, defaults: dict) -> dict:
    out = dict(defaults)
    for name, value in doc.items():
        out[Channel(name)] = float(value)
    return out


def parse_config(doc: dict) -> RunConfig:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {path}: {exc.message}") from exc

    seed = int(doc.get("seed", 0))
    n_ticks = int(doc.get("episode", {}).get("n_ticks", 500))

    plant_doc = dict(doc.get("plant", {}))
    initial_doc = plant_doc.pop("initial", None)
    plant = PlantParams(seed=seed, **plant_doc)
    initial = FarmState(**initial_doc) if initial_doc else None

    sensors_doc = doc.get("sensors", {})
    sensors = SensorConfig(
        noise_sigma=_channel_map(sensors_doc.get("noise_sigma", {}), DEFAULT_NOISE_SIGMA),
        dropout_prob=float(sensors_doc.get("dropout_prob", 0.01)),
        spike_prob=float(sensors_doc.get("spike_prob", 0.005)),
        spike_magnitude=_channel_map(sensors_doc.get("spike_magnitude", {}),
                                     DEFAULT_SPIKE_MAGNITUDE))

    control_doc = dict(doc.get("control", {}))
    safety_doc = control_doc.pop("safety", {})
    control = ControlConfig(safety=SafetyEnvelope(**safety_doc), **control_doc)

    ml = _merge(ML_DEFAULTS, doc.get("ml", {}))
    service = _merge(SERVICE_DEFAULTS, doc.get("service", {}))
    if "AQF_PORT" in os.environ:
        service["port"] = int(os.environ["AQF_PORT"])
    if "AQF_DATA_DIR" in os.environ:
        service["data_dir"] = os.environ["AQF_DATA_DIR"]

    try:
        plant.validate()
        sensors.validate()
        control.validate()
        if initial is not None:
            initial.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(seed=seed, n_ticks=n_ticks, plant=plant, initial=initial,
                     sensors=sensors, control=control, ml=ml, service=service,
                     raw=doc)


def load_config(path: Optional[str | Path] = None) -> RunConfig:
    if path is None:
        path = os.environ.get("AQF_CONFIG")
    if path is None:
        return parse_config({})
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    return parse_config(doc)
