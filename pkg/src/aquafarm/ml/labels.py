"""Synthetic training targets.

The simulation is a closed world, so every learning task gets a checkable
label source: setpoints come from a smooth "ideal conditions" function of
the environment, feed from a metabolic response curve peaking at 26.5 C,
disease from the simulator's ground-truth flag, and equipment labels from
the rule controller itself (behavior cloning).
"""

from __future__ import annotations

import numpy as np

from ..control import ControlConfig, rule_decision
from ..plant import Channel
from ..preprocess import FeatureFrame
from .mlp import OUTPUT_DEVICES

FEED_BASE_G_PER_FISH = 0.25
FEED_TEMP_OPT_C = 26.5
FEED_TEMP_WIDTH_C = 2.0

MLP_FEATURES = ["level", "temp", "humidity"]


def ideal_setpoints(humidity: float, ph: float) -> dict[str, float]:
    """Target water temperature and pH as smooth functions of the ambient."""
    temp_sp = 26.5 + 1.2 * np.tanh((55.0 - humidity) / 25.0) + 0.4 * np.tanh(7.2 - ph)
    ph_sp = 7.2 + 0.15 * np.tanh((55.0 - humidity) / 30.0)
    return {"temp_setpoint_c": float(temp_sp), "ph_setpoint": float(ph_sp)}


def feed_target(temp_c: float, fish_count: int) -> float:
    """Grams per tick from the metabolic curve: peak at 26.5 C, sigma 2 C."""
    return float(FEED_BASE_G_PER_FISH
                 * np.exp(-(((temp_c - FEED_TEMP_OPT_C) / FEED_TEMP_WIDTH_C) ** 2))
                 * fish_count)


def disease_label(diseased: bool) -> float:
    """+1 = affected, -1 = healthy (SVM convention)."""
    return 1.0 if diseased else -1.0


def frame_targets(frame: FeatureFrame, diseased: bool, fish_count: int) -> dict[str, float]:
    """All per-frame regression/classification targets for dataset building."""
    targets = ideal_setpoints(frame.values[Channel.HUMIDITY], frame.values[Channel.PH])
    targets["feed_g_per_tick"] = feed_target(frame.values[Channel.TEMP], fish_count)
    targets["diseased"] = disease_label(diseased)
    return targets


def equipment_labels(frame: FeatureFrame, cfg: ControlConfig) -> np.ndarray:
    """The rule controller's 5 on/off outputs for one frame."""
    commands, _ = rule_decision(frame, cfg)
    return np.array([float(getattr(commands, f"{d}_on")) for d in OUTPUT_DEVICES])


def make_imitation_grid(cfg: ControlConfig,
                        temp_lo: float = 20.0, temp_hi: float = 33.0, temp_step: float = 0.25,
                        hum_lo: float = 30.0, hum_hi: float = 80.0, hum_step: float = 1.0,
                        levels: tuple[float, ...] = (50.0, 100.0),
                        offset: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Threshold-spanning (level, temp, humidity) grid labeled by the rules.

    offset shifts temperature and humidity by a half step to build the
    held-out grid that never coincides with the training one.
    """
    temps = np.arange(temp_lo, temp_hi + 1e-9, temp_step) + offset * temp_step
    hums = np.arange(hum_lo, hum_hi + 1e-9, hum_step) + offset * hum_step
    rows = []
    labels = []
    for level in levels:
        for t in temps:
            for h in hums:
                rows.append((level, float(t), float(h)))
                motor = level < cfg.desired_water_level
                heater = t < cfg.lower_temperature_threshold
                cooler = t > cfg.upper_temperature_threshold
                humidifier = h < cfg.lower_humidity_threshold
                dehumidifier = h > cfg.upper_humidity_threshold
                labels.append((motor, heater, cooler, humidifier, dehumidifier))
    return (np.array(rows, dtype=np.float64),
            np.array(labels, dtype=np.float64))


def split_grid(X: np.ndarray, Y: np.ndarray, holdout_frac: float,
               rng: np.random.Generator) -> tuple[np.ndarray, ...]:
    """Random train/held-out row split of the imitation grid."""
    order = rng.permutation(X.shape[0])
    n_train = int(round((1.0 - holdout_frac) * len(order)))
    tr, ho = order[:n_train], order[n_train:]
    return X[tr], Y[tr], X[ho], Y[ho]
