"""JSONL codecs for episode logs and datasets.

Episode log line (one per tick):
    {"t": seconds, "state": {...}, "readings": [...], "decision": {...}}
Dataset line (one per frame):
    {"frame": {...}, "targets": {...}, "split": "train"}

Encoding is deterministic: fixed key order, plain repr floats. Two runs
with the same seed must produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from .control import Alert, AlertCode, ControlDecision, Severity
from .plant import (
    ActuatorState,
    Channel,
    EpisodeLog,
    Quality,
    SensorReading,
    TickRecord,
)
from .preprocess import Dataset, FeatureFrame


class LogFormatError(ValueError):
    """A log or dataset line failed to parse; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def state_to_dict(state) -> dict:
    return {
        "time_s": state.time_s,
        "water_level": state.water_level,
        "water_temp_c": state.water_temp_c,
        "air_humidity_pct": state.air_humidity_pct,
        "ph": state.ph,
        "behavior_score": state.behavior_score,
        "diseased": state.diseased,
        "fish_count": state.fish_count,
    }


def reading_to_dict(r: SensorReading) -> dict:
    return {
        "sensor_id": r.sensor_id,
        "channel": r.channel.value,
        "timestamp_s": r.timestamp_s,
        "value": r.value,
        "quality": r.quality.value,
    }


def reading_from_dict(d: dict) -> SensorReading:
    return SensorReading(
        sensor_id=d["sensor_id"],
        channel=Channel(d["channel"]),
        timestamp_s=float(d["timestamp_s"]),
        value=None if d.get("value") is None else float(d["value"]),
        quality=Quality(d.get("quality", "ok")),
    )


def commands_to_dict(c: ActuatorState) -> dict:
    return {
        "motor_on": c.motor_on,
        "heater_on": c.heater_on,
        "cooler_on": c.cooler_on,
        "humidifier_on": c.humidifier_on,
        "dehumidifier_on": c.dehumidifier_on,
        "feed_g_per_tick": c.feed_g_per_tick,
    }


def alert_to_dict(a: Alert) -> dict:
    return {
        "code": a.code.value,
        "severity": a.severity.value,
        "timestamp_s": a.timestamp_s,
        "message": a.message,
        "subject": a.subject,
        "acknowledged": a.acknowledged,
    }


def alert_from_dict(d: dict) -> Alert:
    return Alert(
        code=AlertCode(d["code"]), severity=Severity(d["severity"]),
        timestamp_s=float(d["timestamp_s"]), message=d["message"],
        subject=d.get("subject", ""), acknowledged=bool(d.get("acknowledged", False)))


def decision_to_dict(d: Optional[ControlDecision]) -> Optional[dict]:
    if d is None:
        return None
    return {
        "commands": commands_to_dict(d.commands),
        "fill_time_min": d.fill_time_min,
        "alerts": [alert_to_dict(a) for a in d.alerts],
        "sources": d.sources,
        "setpoints": d.setpoints,
        "mode": d.mode,
        "timestamp_s": d.timestamp_s,
    }


def frame_to_dict(f: FeatureFrame) -> dict:
    return {
        "tick_index": f.tick_index,
        "timestamp_s": f.timestamp_s,
        "values": {ch.value: f.values[ch] for ch in Channel},
        "was_missing": {ch.value: f.was_missing[ch] for ch in Channel},
        "was_outlier": {ch.value: f.was_outlier[ch] for ch in Channel},
        "engineered": f.engineered,
    }


def frame_from_dict(d: dict) -> FeatureFrame:
    return FeatureFrame(
        tick_index=int(d["tick_index"]),
        timestamp_s=float(d["timestamp_s"]),
        values={Channel(k): float(v) for k, v in d["values"].items()},
        was_missing={Channel(k): bool(v) for k, v in d["was_missing"].items()},
        was_outlier={Channel(k): bool(v) for k, v in d["was_outlier"].items()},
        engineered={k: float(v) for k, v in d["engineered"].items()})


def tick_record_line(rec: TickRecord) -> str:
    return json.dumps({
        "t": rec.state.time_s,
        "state": state_to_dict(rec.state),
        "readings": [reading_to_dict(r) for r in rec.readings],
        "decision": decision_to_dict(rec.decision),
    })


def write_episode(log: EpisodeLog, path: str | Path) -> None:
    with open(path, "w") as fh:
        for rec in log.records:
            fh.write(tick_record_line(rec) + "\n")


def read_episode_lines(path: str | Path) -> list[dict]:
    """Parse an episode JSONL file, validating line by line."""
    out = []
    with open(path) as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogFormatError(i, f"invalid JSON ({exc.msg})") from exc
            if "t" not in doc or "state" not in doc or "readings" not in doc:
                raise LogFormatError(i, "missing required episode fields")
            out.append(doc)
    return out


def write_dataset(ds: Dataset, path: str | Path) -> None:
    names = sorted(ds.targets)
    with open(path, "w") as fh:
        for i, frame in enumerate(ds.frames):
            fh.write(json.dumps({
                "frame": frame_to_dict(frame),
                "targets": {name: ds.targets[name][i] for name in names},
                "split": ds.split_tags[i] if ds.split_tags else "train",
            }) + "\n")


def read_dataset(path: str | Path) -> Dataset:
    frames: list[FeatureFrame] = []
    targets: dict[str, list[float]] = {}
    tags: list[str] = []
    with open(path) as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogFormatError(i, f"invalid JSON ({exc.msg})") from exc
            frames.append(frame_from_dict(doc["frame"]))
            for name, value in doc["targets"].items():
                targets.setdefault(name, []).append(float(value))
            tags.append(doc.get("split", "train"))
    return Dataset(frames=frames, targets=targets, split_tags=tags)
