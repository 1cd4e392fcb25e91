"""Merge ML proposals into the rule decision.

Disease warnings always pass through. Everything else is gated on
ml_assist mode: setpoint suggestions are clamped half a degree inside the
control deadband, feed is clamped to [0, max_feed], and the MLP equipment
vector replaces the rule commands only when its most confident unit is at
least 0.4 away from 0.5. Safety vets the merged result afterwards, so an
adversarial proposal can never outrank the envelope.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from dataclasses import replace
from ..control import Alert, AlertCode, ControlConfig, DEVICES, Severity
from ..plant import ActuatorState

CONFIDENCE_GATE = 0.4
SETPOINT_MARGIN_C = 0.5
MODES = ("rule_only", "ml_assist")


@dataclass
class MlProposal:
    """Raw outputs of the four predictors for one frame."""

    setpoints: dict[str, float] = field(default_factory=dict)
    health_label: int = -1
    health_score: float = 0.0
    feed_g_per_tick: float = 0.0
    equipment_probs: dict[str, float] = field(default_factory=dict)


def _clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def arbitrate(rule_commands: ActuatorState, sources: dict[str, str], prop: MlProposal,
              cfg: ControlConfig, mode: str, timestamp_s: float,
              max_feed_g: float = 50.0,
              ) -> tuple[ActuatorState, dict[str, str], list[Alert], dict[str, float]]:
    """Returns (commands, sources, alerts, clamped setpoints) for the tick."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")

    alerts: list[Alert] = []
    if prop.health_label > 0:
        alerts.append(Alert(
            AlertCode.DISEASE_SUSPECTED, Severity.WARNING, timestamp_s,
            f"health classifier score {prop.health_score:.3f}: possible disease or parasites",
            subject="fish"))

    if mode == "rule_only":
        return rule_commands, sources, alerts, {}

    setpoints = {}
    if "temp_setpoint_c" in prop.setpoints:
        setpoints["temp_setpoint_c"] = _clamp(
            prop.setpoints["temp_setpoint_c"],
            cfg.lower_temperature_threshold + SETPOINT_MARGIN_C,
            cfg.upper_temperature_threshold - SETPOINT_MARGIN_C)
    if "ph_setpoint" in prop.setpoints:
        setpoints["ph_setpoint"] = prop.setpoints["ph_setpoint"]

    commands = rule_commands
    new_sources = dict(sources)
    probs = prop.equipment_probs
    if probs and max(abs(p - 0.5) for p in probs.values()) >= CONFIDENCE_GATE:
        changes = {}
        for device in DEVICES:
            if device in probs:
                changes[f"{device}_on"] = probs[device] > 0.5
                new_sources[device] = "ml"
        commands = replace(commands, **changes)

    feed = _clamp(prop.feed_g_per_tick, 0.0, max_feed_g)
    commands = replace(commands, feed_g_per_tick=feed)
    new_sources["feed"] = "ml"
    return commands, new_sources, alerts, setpoints
