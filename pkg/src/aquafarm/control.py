"""Rule-based tick controller and safety vetting.

The rule layer runs three independent branches per tick:

  * water level: below setpoint -> motor at full speed, fill time
    (setpoint - level) / fill_rate minutes reported for the operator;
  * temperature: strictly below the lower threshold -> heater, strictly
    above the upper -> cooler, otherwise both off (boundary equality takes
    the off branch);
  * humidity: same shape with the 40/70 thresholds.

A decision then passes through an optional ML merge, manual overrides, and
finally the safety check. Safety outranks everything: it never throws, it
vetoes, and every veto carries an alert.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

from .plant import ActuatorState, Channel
from .preprocess import FeatureFrame

DEVICES = ("motor", "heater", "cooler", "humidifier", "dehumidifier")

# Which sensor channel each actuator depends on; a stale channel forces
# its dependents off.
DEVICE_CHANNEL = {
    "motor": Channel.LEVEL,
    "heater": Channel.TEMP,
    "cooler": Channel.TEMP,
    "humidifier": Channel.HUMIDITY,
    "dehumidifier": Channel.HUMIDITY,
}


class ControlError(ValueError):
    """A controller precondition was violated (e.g. a missing channel)."""


class AlertCode(str, Enum):
    LOW_WATER = "LOW_WATER"
    CRITICAL_TEMP = "CRITICAL_TEMP"
    SENSOR_FAULT = "SENSOR_FAULT"
    DISEASE_SUSPECTED = "DISEASE_SUSPECTED"
    HUMIDITY_RANGE = "HUMIDITY_RANGE"


class Severity(str, Enum):
    INFO = "info"
    WARNING = "warning"
    CRITICAL = "critical"


@dataclass
class Alert:
    code: AlertCode
    severity: Severity
    timestamp_s: float
    message: str
    subject: str = ""            # device or channel the alert is about
    acknowledged: bool = False


@dataclass(frozen=True)
class SafetyEnvelope:
    """Hard limits that outrank every other decision source."""

    hard_temp_min: float = 20.0
    hard_temp_max: float = 32.0
    low_level_alarm: float = 20.0
    sensor_stale_ticks: int = 3

    def validate(self, cfg: "ControlConfig") -> None:
        if not (self.hard_temp_min < cfg.lower_temperature_threshold
                and cfg.upper_temperature_threshold < self.hard_temp_max):
            raise ControlError("hard temperature bounds must strictly contain the control thresholds")
        if self.sensor_stale_ticks < 1:
            raise ControlError("sensor_stale_ticks must be >= 1")


@dataclass(frozen=True)
class ControlConfig:
    """Setpoints and thresholds; defaults match the control algorithm's
    initialization step."""

    desired_water_level: float = 100.0
    lower_temperature_threshold: float = 25.0
    upper_temperature_threshold: float = 28.0
    lower_humidity_threshold: float = 40.0
    upper_humidity_threshold: float = 70.0
    motor_fill_rate: float = 5.0     # percent of capacity per minute
    tick_interval_s: float = 60.0
    safety: SafetyEnvelope = field(default_factory=SafetyEnvelope)

    def validate(self) -> None:
        if not self.lower_temperature_threshold < self.upper_temperature_threshold:
            raise ControlError("temperature thresholds must satisfy lower < upper")
        if not self.lower_humidity_threshold < self.upper_humidity_threshold:
            raise ControlError("humidity thresholds must satisfy lower < upper")
        if not self.motor_fill_rate > 0:
            raise ControlError("motor_fill_rate must be > 0")
        if not self.tick_interval_s > 0:
            raise ControlError("tick_interval_s must be > 0")
        self.safety.validate(self)


@dataclass
class ControlDecision:
    """Vetted actuator commands plus provenance and alerts for one tick."""

    commands: ActuatorState
    fill_time_min: Optional[float]
    alerts: list[Alert]
    sources: dict[str, str]          # device -> rule | ml | manual | safety
    setpoints: dict[str, float] = field(default_factory=dict)  # ML targets, clamped
    mode: str = "rule_only"
    timestamp_s: float = 0.0


def water_level_control(level: float, cfg: ControlConfig) -> tuple[bool, Optional[float]]:
    """Motor command and fill time in minutes (present while filling)."""
    if level < cfg.desired_water_level:
        required = cfg.desired_water_level - level
        return True, required / cfg.motor_fill_rate
    return False, None


def temperature_control(temp: float, cfg: ControlConfig) -> tuple[bool, bool]:
    """(heater, cooler); strict inequalities, equality lands in the off branch."""
    if temp < cfg.lower_temperature_threshold:
        return True, False
    if temp > cfg.upper_temperature_threshold:
        return False, True
    return False, False


def humidity_control(humidity: float, cfg: ControlConfig) -> tuple[bool, bool]:
    """(humidifier, dehumidifier); same branch shape as temperature."""
    if humidity < cfg.lower_humidity_threshold:
        return True, False
    if humidity > cfg.upper_humidity_threshold:
        return False, True
    return False, False


def rule_decision(frame: FeatureFrame, cfg: ControlConfig) -> tuple[ActuatorState, Optional[float]]:
    """Compose the three rule branches into one proposed ActuatorState."""
    motor, fill_time = water_level_control(frame.values[Channel.LEVEL], cfg)
    heater, cooler = temperature_control(frame.values[Channel.TEMP], cfg)
    humidifier, dehumidifier = humidity_control(frame.values[Channel.HUMIDITY], cfg)
    commands = ActuatorState(
        motor_on=motor, heater_on=heater, cooler_on=cooler,
        humidifier_on=humidifier, dehumidifier_on=dehumidifier,
        feed_g_per_tick=0.0)
    return commands, fill_time


def safety_check(frame: FeatureFrame, proposed: ActuatorState, env: SafetyEnvelope,
                 sensor_health: Optional[dict[Channel, int]] = None,
                 ) -> tuple[ActuatorState, list[Alert]]:
    """Veto unsafe commands. Never raises; every forced change carries an alert."""
    now = frame.timestamp_s
    alerts: list[Alert] = []
    vetted = proposed
    temp = frame.values[Channel.TEMP]
    level = frame.values[Channel.LEVEL]

    if temp < env.hard_temp_min or temp > env.hard_temp_max:
        if vetted.heater_on or vetted.cooler_on:
            vetted = replace(vetted, heater_on=False, cooler_on=False)
        alerts.append(Alert(
            AlertCode.CRITICAL_TEMP, Severity.CRITICAL, now,
            f"water temperature outside hard envelope "
            f"[{env.hard_temp_min}, {env.hard_temp_max}]", subject="temp"))

    if level < env.low_level_alarm:
        alerts.append(Alert(
            AlertCode.LOW_WATER, Severity.WARNING, now,
            f"water level below {env.low_level_alarm}% alarm threshold",
            subject="level"))

    if sensor_health:
        for ch, stale in sensor_health.items():
            if stale < env.sensor_stale_ticks:
                continue
            forced = [d for d in DEVICES
                      if DEVICE_CHANNEL[d] == ch and getattr(vetted, f"{d}_on")]
            if forced:
                vetted = replace(vetted, **{f"{d}_on": False for d in forced})
            alerts.append(Alert(
                AlertCode.SENSOR_FAULT, Severity.CRITICAL, now,
                f"{ch.value} sensor stale for {stale} ticks; dependent equipment held off",
                subject=ch.value))

    if vetted.heater_on and vetted.cooler_on:
        vetted = replace(vetted, heater_on=False, cooler_on=False)
        alerts.append(Alert(
            AlertCode.CRITICAL_TEMP, Severity.WARNING, now,
            "heater and cooler proposed together; both held off", subject="temp"))
    if vetted.humidifier_on and vetted.dehumidifier_on:
        vetted = replace(vetted, humidifier_on=False, dehumidifier_on=False)
        alerts.append(Alert(
            AlertCode.HUMIDITY_RANGE, Severity.WARNING, now,
            "humidifier and dehumidifier proposed together; both held off",
            subject="humidity"))

    return vetted, alerts


def tick(frame: FeatureFrame, cfg: ControlConfig,
         overrides: Optional[dict[str, bool]] = None,
         ml: Optional[object] = None, mode: str = "rule_only",
         sensor_health: Optional[dict[Channel, int]] = None,
         max_feed_g: float = 50.0) -> ControlDecision:
    """One full control decision: rules -> ML merge -> manual -> safety.

    Precedence rises left to right; safety outranks manual. `overrides`
    maps device name to the forced on/off value. `ml` is an MlProposal (or
    None); it only changes commands in ml_assist mode.
    """
    cfg.validate()
    for ch in Channel:
        v = frame.values.get(ch)
        if v is None or not math.isfinite(v):
            raise ControlError(f"frame is missing channel {ch.value}; preprocess contract violated")

    commands, fill_time = rule_decision(frame, cfg)
    sources = {d: "rule" for d in DEVICES}
    sources["feed"] = "rule"
    alerts: list[Alert] = []
    setpoints: dict[str, float] = {}

    if ml is not None:
        from .ml.arbitrate import arbitrate  # deferred: ml package imports these types
        commands, sources, ml_alerts, setpoints = arbitrate(
            commands, sources, ml, cfg, mode, frame.timestamp_s, max_feed_g)
        alerts.extend(ml_alerts)

    if overrides:
        changes = {}
        for device, on in overrides.items():
            if device not in DEVICES:
                raise ControlError(f"unknown override device {device!r}")
            changes[f"{device}_on"] = bool(on)
            sources[device] = "manual"
        commands = replace(commands, **changes)

    vetted, safety_alerts = safety_check(frame, commands, cfg.safety, sensor_health)
    alerts.extend(safety_alerts)
    for d in DEVICES:
        if getattr(vetted, f"{d}_on") != getattr(commands, f"{d}_on"):
            sources[d] = "safety"

    if not vetted.motor_on:
        fill_time = None
    elif fill_time is None:
        level = frame.values[Channel.LEVEL]
        if level < cfg.desired_water_level:
            fill_time = (cfg.desired_water_level - level) / cfg.motor_fill_rate

    if any(s == "safety" for s in sources.values()):
        assert alerts, "safety vetoes must carry an alert"

    return ControlDecision(
        commands=vetted, fill_time_min=fill_time, alerts=alerts,
        sources=sources, setpoints=setpoints, mode=mode,
        timestamp_s=frame.timestamp_s)
