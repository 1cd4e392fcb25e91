"""Discrete-time tank environment: water level, temperature, humidity, pH,
fish behavior and an imperfect sensor suite.

The plant is a first-order Euler model stepped once per tick:

    level'    = clamp(level + (fill*motor - drain) * dt)
    temp'     = temp + (k_temp*(ambient - temp) + heater*h_rate - cooler*c_rate) * dt
    humidity' = analogous, clamped to [0, 100]
    ph'       = bounded random walk with reversion toward 7.2
    behavior' = relaxes toward 0.8 (healthy) or 0.3 (diseased) plus noise

Rates are per minute; dt is the tick length in seconds. Everything is
deterministic under a fixed seed: one seed spawns independent named streams
(plant, sensors, disease) so adding a draw to one consumer never perturbs
the others.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np

PH_SETPOINT = 7.2          # natural reversion target of the pH walk
PH_REVERSION_PER_MIN = 0.02
BEHAVIOR_HEALTHY = 0.8
BEHAVIOR_DISEASED = 0.3
BEHAVIOR_RATE_PER_TICK = 0.05
# Per-tick sigma 0.05 lives on the behavior sensor channel; the state walk
# itself stays tight (integrated AR noise would smear the healthy/diseased
# separation the score exists to provide).
BEHAVIOR_PROCESS_SIGMA = 0.01


class Channel(str, Enum):
    """Sensor channels the farm exposes."""

    LEVEL = "level"
    TEMP = "temp"
    HUMIDITY = "humidity"
    PH = "ph"
    BEHAVIOR = "behavior"


CHANNELS = tuple(Channel)


class Quality(str, Enum):
    OK = "ok"
    MISSING = "missing"
    SUSPECT = "suspect"


@dataclass(frozen=True)
class FarmState:
    """Ground-truth state of one tank at one instant."""

    time_s: float = 0.0
    water_level: float = 60.0        # percent of capacity, [0, 100]
    water_temp_c: float = 26.0
    air_humidity_pct: float = 55.0   # [0, 100]
    ph: float = 7.2                  # [0, 14]
    behavior_score: float = 0.8      # [0, 1]
    diseased: bool = False
    fish_count: int = 100

    def channel_value(self, channel: Channel) -> float:
        return {
            Channel.LEVEL: self.water_level,
            Channel.TEMP: self.water_temp_c,
            Channel.HUMIDITY: self.air_humidity_pct,
            Channel.PH: self.ph,
            Channel.BEHAVIOR: self.behavior_score,
        }[channel]

    def validate(self) -> None:
        for name in ("time_s", "water_level", "water_temp_c",
                     "air_humidity_pct", "ph", "behavior_score"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"non-finite state field {name}={v!r}")
        if self.fish_count < 0:
            raise ValueError("fish_count must be >= 0")


@dataclass(frozen=True)
class PlantParams:
    """Plant dynamics constants. All rates are per minute and >= 0."""

    dt_s: float = 60.0
    ambient_temp_c: float = 26.5
    ambient_humidity_pct: float = 55.0
    drain_rate_pct_per_min: float = 0.5
    fill_rate_pct_per_min: float = 5.0
    k_temp_per_min: float = 0.01
    heater_c_per_min: float = 0.5
    cooler_c_per_min: float = 0.5
    k_hum_per_min: float = 0.02
    humidifier_pct_per_min: float = 2.0
    dehumidifier_pct_per_min: float = 2.0
    ph_drift_per_min: float = 0.02
    disease_onset_prob_per_tick: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if not self.dt_s > 0:
            raise ValueError("dt_s must be > 0")
        if not 0.0 <= self.disease_onset_prob_per_tick <= 1.0:
            raise ValueError("disease_onset_prob_per_tick must be in [0, 1]")
        for name in ("drain_rate_pct_per_min", "fill_rate_pct_per_min",
                     "k_temp_per_min", "heater_c_per_min", "cooler_c_per_min",
                     "k_hum_per_min", "humidifier_pct_per_min",
                     "dehumidifier_pct_per_min", "ph_drift_per_min"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"rate {name} must be finite and >= 0, got {v!r}")
        for name in ("ambient_temp_c", "ambient_humidity_pct"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"non-finite parameter {name}")


@dataclass(frozen=True)
class ActuatorState:
    """Commanded equipment state for one tick."""

    motor_on: bool = False
    heater_on: bool = False
    cooler_on: bool = False
    humidifier_on: bool = False
    dehumidifier_on: bool = False
    feed_g_per_tick: float = 0.0

    def validate(self) -> None:
        if self.feed_g_per_tick < 0:
            raise ValueError("feed_g_per_tick must be >= 0")


ALL_OFF = ActuatorState()

DEFAULT_NOISE_SIGMA = {
    Channel.LEVEL: 0.5,
    Channel.TEMP: 0.1,
    Channel.HUMIDITY: 1.0,
    Channel.PH: 0.05,
    Channel.BEHAVIOR: 0.05,
}
DEFAULT_SPIKE_MAGNITUDE = {
    Channel.LEVEL: 15.0,
    Channel.TEMP: 5.0,
    Channel.HUMIDITY: 20.0,
    Channel.PH: 2.0,
    Channel.BEHAVIOR: 0.5,
}


@dataclass(frozen=True)
class SensorConfig:
    """Fault model of the sensor suite: Gaussian noise, dropouts, spikes.

    Spikes come out with quality=ok on purpose; finding them is the
    preprocessing pipeline's job, not the sensor's.
    """

    noise_sigma: dict = field(default_factory=lambda: dict(DEFAULT_NOISE_SIGMA))
    dropout_prob: float = 0.0
    spike_prob: float = 0.0
    spike_magnitude: dict = field(default_factory=lambda: dict(DEFAULT_SPIKE_MAGNITUDE))

    def validate(self) -> None:
        if not 0.0 <= self.dropout_prob <= 1.0:
            raise ValueError("dropout_prob must be in [0, 1]")
        if not 0.0 <= self.spike_prob <= 1.0:
            raise ValueError("spike_prob must be in [0, 1]")
        for ch in CHANNELS:
            if self.noise_sigma.get(ch, 0.0) < 0:
                raise ValueError(f"noise_sigma[{ch.value}] must be >= 0")


@dataclass(frozen=True)
class SensorReading:
    """One timestamped sample of one channel."""

    sensor_id: str
    channel: Channel
    timestamp_s: float
    value: Optional[float]  # absent exactly when quality == missing
    quality: Quality = Quality.OK


class EpisodeRng:
    """Named, independent random streams derived from one seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        plant_ss, sensor_ss, disease_ss = np.random.SeedSequence(self.seed).spawn(3)
        self.plant = np.random.default_rng(plant_ss)
        self.sensors = np.random.default_rng(sensor_ss)
        self.disease = np.random.default_rng(disease_ss)


def _clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def step_plant(state: FarmState, act: ActuatorState, params: PlantParams,
               rng: EpisodeRng) -> FarmState:
    """Advance the plant by one tick of params.dt_s seconds.

    Pure given (state, act, params) and the rng stream positions; level,
    humidity, pH and behavior are clamped to their physical ranges.
    """
    state.validate()
    act.validate()
    params.validate()

    dt_min = params.dt_s / 60.0

    level = _clamp(
        state.water_level
        + (params.fill_rate_pct_per_min * act.motor_on
           - params.drain_rate_pct_per_min) * dt_min,
        0.0, 100.0)

    temp = state.water_temp_c + (
        params.k_temp_per_min * (params.ambient_temp_c - state.water_temp_c)
        + params.heater_c_per_min * act.heater_on
        - params.cooler_c_per_min * act.cooler_on) * dt_min

    humidity = _clamp(
        state.air_humidity_pct + (
            params.k_hum_per_min * (params.ambient_humidity_pct - state.air_humidity_pct)
            + params.humidifier_pct_per_min * act.humidifier_on
            - params.dehumidifier_pct_per_min * act.dehumidifier_on) * dt_min,
        0.0, 100.0)

    ph = _clamp(
        state.ph
        + PH_REVERSION_PER_MIN * (PH_SETPOINT - state.ph) * dt_min
        + float(rng.plant.uniform(-1.0, 1.0)) * params.ph_drift_per_min * dt_min,
        0.0, 14.0)

    diseased = state.diseased
    if not diseased and params.disease_onset_prob_per_tick > 0:
        diseased = bool(rng.disease.random() < params.disease_onset_prob_per_tick)
    elif not diseased:
        rng.disease.random()  # keep the stream aligned when onset is disabled

    target = BEHAVIOR_DISEASED if diseased else BEHAVIOR_HEALTHY
    behavior = _clamp(
        state.behavior_score
        + BEHAVIOR_RATE_PER_TICK * (target - state.behavior_score)
        + float(rng.plant.normal(0.0, BEHAVIOR_PROCESS_SIGMA)),
        0.0, 1.0)

    return replace(
        state,
        time_s=state.time_s + params.dt_s,
        water_level=level,
        water_temp_c=temp,
        air_humidity_pct=humidity,
        ph=ph,
        behavior_score=behavior,
        diseased=diseased,
    )


def read_sensors(state: FarmState, cfg: SensorConfig, rng: EpisodeRng) -> list[SensorReading]:
    """Sample every channel once at the current state time.

    With probability dropout_prob a reading is missing (no value); with
    probability spike_prob the value is displaced by +-spike_magnitude but
    still reported as quality=ok.
    """
    cfg.validate()
    readings = []
    for ch in CHANNELS:
        sensor_id = f"{ch.value}-0"
        if float(rng.sensors.random()) < cfg.dropout_prob:
            readings.append(SensorReading(sensor_id, ch, state.time_s, None, Quality.MISSING))
            continue
        sigma = float(cfg.noise_sigma.get(ch, 0.0))
        value = state.channel_value(ch)
        if sigma > 0:
            value += float(rng.sensors.normal(0.0, sigma))
        if cfg.spike_prob > 0 and float(rng.sensors.random()) < cfg.spike_prob:
            sign = 1.0 if rng.sensors.random() < 0.5 else -1.0
            value += sign * float(cfg.spike_magnitude.get(ch, 0.0))
        readings.append(SensorReading(sensor_id, ch, state.time_s, value, Quality.OK))
    return readings


@dataclass
class TickRecord:
    """One iteration of the read -> decide -> actuate -> step loop."""

    tick_index: int
    state: FarmState                 # truth at read time, before stepping
    readings: list[SensorReading]
    decision: object                 # whatever the controller returned
    commands: ActuatorState


@dataclass
class EpisodeLog:
    records: list[TickRecord]
    final_state: FarmState
    seed: int


class EpisodeAborted(RuntimeError):
    """Controller failed mid-episode; the partial log is preserved."""

    def __init__(self, tick_index: int, cause: BaseException, log: EpisodeLog):
        super().__init__(f"controller failed at tick {tick_index}: {cause!r}")
        self.tick_index = tick_index
        self.cause = cause
        self.log = log


Controller = Callable[[int, list[SensorReading]], object]


def run_episode(params: PlantParams, cfg: SensorConfig, controller: Optional[Controller],
                n_ticks: int, initial: Optional[FarmState] = None) -> EpisodeLog:
    """Run a bounded episode: n_ticks of read -> decide -> actuate -> step.

    The controller is called with (tick_index, readings) and must return
    either None (all actuators off) or an object with a `commands`
    attribute holding an ActuatorState. A controller exception aborts the
    episode with the partial log attached to the raised EpisodeAborted.
    """
    if n_ticks < 1:
        raise ValueError("n_ticks must be >= 1")
    params.validate()
    cfg.validate()
    rng = EpisodeRng(params.seed)
    state = initial if initial is not None else FarmState()
    state.validate()

    records: list[TickRecord] = []
    for i in range(n_ticks):
        readings = read_sensors(state, cfg, rng)
        try:
            decision = controller(i, readings) if controller is not None else None
        except Exception as exc:
            raise EpisodeAborted(i, exc, EpisodeLog(records, state, params.seed)) from exc
        commands = getattr(decision, "commands", None) or ALL_OFF
        records.append(TickRecord(i, state, readings, decision, commands))
        state = step_plant(state, commands, params, rng)
    return EpisodeLog(records, state, params.seed)
