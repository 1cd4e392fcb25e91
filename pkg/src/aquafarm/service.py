"""Telemetry and override service: the loop's central server.

One append-only JSONL event log per episode carries everything the system
does (readings, decisions, alerts, overrides, setpoint changes) under a
gapless sequence number. A single serialized writer owns the file; the
HTTP API and the control loop both append through it. Subscribers get a
server-sent-event stream with resume-by-sequence, so a reconnecting
client loses nothing.

Ordering contract: the frame that triggers a decision is persisted before
the decision itself (write-ahead), and the stream replays the log order
exactly.
"""

from __future__ import annotations

import json
import queue
import threading
import time
from dataclasses import dataclass, replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import parse_qs, urlparse

from . import jsonio
from .control import (
    Alert,
    AlertCode,
    ControlConfig,
    ControlError,
    DEVICES,
    SafetyEnvelope,
    Severity,
)
from .controller import FarmController
from .ml.bundle import ModelBundle
from .plant import EpisodeRng, FarmState, PlantParams, SensorConfig, read_sensors, step_plant

EVENT_KINDS = ("reading", "decision", "alert", "override", "setpoint_change")
ALERT_CLEAR_AFTER_TICKS = 3


class ServiceError(ValueError):
    pass


class EventLogError(RuntimeError):
    """Durable append failed; the record lives in the memory tail."""


@dataclass(frozen=True)
class EventRecord:
    seq: int
    kind: str
    timestamp_s: float
    payload: dict

    def to_dict(self) -> dict:
        return {"seq": self.seq, "kind": self.kind, "t": self.timestamp_s,
                "payload": self.payload}


def record_from_dict(doc: dict) -> EventRecord:
    return EventRecord(seq=int(doc["seq"]), kind=doc["kind"],
                       timestamp_s=float(doc["t"]), payload=doc["payload"])


class Subscription:
    def __init__(self, backlog: list[EventRecord]):
        self.queue: "queue.Queue[Optional[EventRecord]]" = queue.Queue()
        for rec in backlog:
            self.queue.put(rec)


class EventLog:
    """Append-only, gapless, crash-recoverable event log with live fanout.

    On open, an existing file is scanned so sequence numbers continue
    across restarts. If the disk write fails, the record is kept in a
    memory tail (and re-flushed ahead of the next successful append, so
    the file itself stays gapless) and EventLogError is raised to the
    caller after fanout.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._subs: list[Subscription] = []
        self._pending: list[EventRecord] = []
        self._records: list[EventRecord] = []   # session cache; file is durable
        self._seq = 0
        if self.path.exists():
            self._records = self._scan()
            if self._records:
                self._seq = self._records[-1].seq

    def _scan(self) -> list[EventRecord]:
        records = []
        with open(self.path) as fh:
            for i, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    records.append(record_from_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError) as exc:
                    raise jsonio.LogFormatError(i, f"bad event record: {exc}") from exc
        return records

    @property
    def last_seq(self) -> int:
        with self._lock:
            return self._seq

    def append(self, kind: str, payload: dict, timestamp_s: float) -> EventRecord:
        if kind not in EVENT_KINDS:
            raise ServiceError(f"unknown event kind {kind!r}")
        json.dumps(payload)  # payload must be serializable before seq is burned
        with self._lock:
            rec = EventRecord(self._seq + 1, kind, timestamp_s, payload)
            return self._commit(rec)

    def append_record(self, rec: EventRecord) -> EventRecord:
        """Replay path: append a pre-sequenced record, enforcing gaplessness."""
        with self._lock:
            if rec.seq != self._seq + 1:
                raise ServiceError(
                    f"sequence gap: expected {self._seq + 1}, got {rec.seq}")
            return self._commit(rec)

    def _commit(self, rec: EventRecord) -> EventRecord:
        # caller holds the lock
        error = None
        try:
            with open(self.path, "a") as fh:
                for pending in self._pending:
                    fh.write(json.dumps(pending.to_dict()) + "\n")
                fh.write(json.dumps(rec.to_dict()) + "\n")
                fh.flush()
            self._pending.clear()
        except OSError as exc:
            self._pending.append(rec)
            error = exc
        self._seq = rec.seq
        self._records.append(rec)
        for sub in self._subs:
            sub.queue.put(rec)
        if error is not None:
            raise EventLogError(f"event log unwritable: {error}")
        return rec

    def records(self) -> list[EventRecord]:
        with self._lock:
            return list(self._records)

    def subscribe(self, since_seq: int = 0) -> Subscription:
        with self._lock:
            backlog = [r for r in self._records if r.seq > since_seq]
            sub = Subscription(backlog)
            self._subs.append(sub)
            return sub

    def unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)


def query_history(log: EventLog, t0: float, t1: float,
                  kinds: Optional[list[str]] = None, max_n: int = 1000,
                  after_seq: int = 0) -> dict:
    """Chronological slice of the log with a continuation token."""
    if t0 > t1:
        raise ServiceError(f"invalid range: {t0} > {t1}")
    if kinds:
        for k in kinds:
            if k not in EVENT_KINDS:
                raise ServiceError(f"unknown event kind {k!r}")
    matches = [r for r in log.records()
               if t0 <= r.timestamp_s <= t1
               and r.seq > after_seq
               and (not kinds or r.kind in kinds)]
    page = matches[:max_n]
    next_after = page[-1].seq if len(matches) > max_n else None
    return {"events": [r.to_dict() for r in page], "next_after_seq": next_after}


@dataclass
class AlertEntry:
    alert_id: int
    alert: Alert
    first_tick: int
    last_true_tick: int


class AlertLedger:
    """Deduplicates alerts by (code, subject), tracks acks and auto-clear.

    Critical alerts persist until acknowledged; anything else (and any
    acknowledged alert) clears after the condition has lapsed for
    ALERT_CLEAR_AFTER_TICKS consecutive ticks.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._next_id = 1
        self._active: dict[tuple, AlertEntry] = {}

    def ingest(self, alerts: list[Alert], tick_index: int,
               ) -> tuple[list[AlertEntry], list[AlertEntry]]:
        """Returns (newly raised, newly cleared) entries."""
        with self._lock:
            fresh = []
            for alert in alerts:
                key = (alert.code, alert.subject)
                entry = self._active.get(key)
                if entry is None:
                    entry = AlertEntry(self._next_id, alert, tick_index, tick_index)
                    self._next_id += 1
                    self._active[key] = entry
                    fresh.append(entry)
                else:
                    entry.last_true_tick = tick_index
            cleared = []
            for key, entry in list(self._active.items()):
                lapsed = tick_index - entry.last_true_tick >= ALERT_CLEAR_AFTER_TICKS
                clearable = (entry.alert.severity is not Severity.CRITICAL
                             or entry.alert.acknowledged)
                if lapsed and clearable:
                    del self._active[key]
                    cleared.append(entry)
            return fresh, cleared

    def ack(self, alert_id: int) -> AlertEntry:
        with self._lock:
            for entry in self._active.values():
                if entry.alert_id == alert_id:
                    entry.alert.acknowledged = True
                    return entry
            raise ServiceError(f"unknown alert id {alert_id}")

    def active(self) -> list[AlertEntry]:
        with self._lock:
            return sorted(self._active.values(), key=lambda e: e.alert_id)


@dataclass
class OverrideEntry:
    device: str
    on: bool
    ttl_s: float
    operator_id: str
    issued_at_s: float

    @property
    def expires_at_s(self) -> float:
        return self.issued_at_s + self.ttl_s

    def to_dict(self) -> dict:
        return {"device": self.device, "action": "on" if self.on else "off",
                "ttl_s": self.ttl_s, "operator_id": self.operator_id,
                "issued_at_s": self.issued_at_s, "expires_at_s": self.expires_at_s}


class OverrideManager:
    """Active manual overrides, expiring on simulated time."""

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: dict[str, OverrideEntry] = {}

    def apply(self, device: str, action: str, ttl_s: float, operator_id: str,
              now_s: float) -> list[OverrideEntry]:
        if device not in DEVICES:
            raise ServiceError(f"unknown device {device!r}")
        if action not in ("on", "off", "release"):
            raise ServiceError(f"unknown action {action!r}")
        with self._lock:
            if action == "release":
                self._entries.pop(device, None)
            else:
                if not ttl_s > 0:
                    raise ServiceError("ttl_s must be > 0")
                self._entries[device] = OverrideEntry(
                    device, action == "on", float(ttl_s), operator_id, now_s)
            return list(self._entries.values())

    def prune(self, now_s: float) -> None:
        with self._lock:
            for device, entry in list(self._entries.items()):
                if now_s >= entry.expires_at_s:
                    del self._entries[device]

    def active(self, now_s: float) -> dict[str, bool]:
        self.prune(now_s)
        with self._lock:
            return {device: e.on for device, e in self._entries.items()}

    def entries(self) -> list[OverrideEntry]:
        with self._lock:
            return list(self._entries.values())


class FarmService:
    """Wires plant, pipeline, controller, models and the event log into the
    live loop behind the HTTP API."""

    def __init__(self, plant_params: PlantParams, sensor_cfg: SensorConfig,
                 control_cfg: ControlConfig, data_dir: str | Path,
                 bundle: Optional[ModelBundle] = None, mode: str = "rule_only",
                 initial: Optional[FarmState] = None, max_feed_g: float = 50.0,
                 episode_name: str = "episode", tick_wall_s: float = 0.25):
        control_cfg.validate()
        if mode == "ml_assist" and bundle is None:
            raise ServiceError("ml_assist mode requires a trained bundle")
        self.params = plant_params
        self.sensor_cfg = sensor_cfg
        self.max_feed_g = max_feed_g
        self.tick_wall_s = tick_wall_s
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.log = EventLog(self.data_dir / f"{episode_name}.jsonl")
        self.alerts = AlertLedger()
        self.overrides = OverrideManager()
        self.bundle = bundle
        self.rng = EpisodeRng(plant_params.seed)
        self.controller = FarmController(sensor_cfg, bundle, max_feed_g)
        self.state = initial if initial is not None else FarmState()

        self._mutable_lock = threading.Lock()   # guards cfg / mode swaps
        self._cfg = control_cfg
        self._mode = mode
        self._tick_index = 0
        self._latest_frame = None
        self._latest_decision = None
        self._storage_degraded = False
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    # -- configuration surface -------------------------------------------

    @property
    def config(self) -> ControlConfig:
        with self._mutable_lock:
            return self._cfg

    @property
    def mode(self) -> str:
        with self._mutable_lock:
            return self._mode

    def set_mode(self, mode: str) -> None:
        if mode not in ("rule_only", "ml_assist"):
            raise ServiceError(f"unknown mode {mode!r}")
        if mode == "ml_assist" and self.bundle is None:
            raise ServiceError("ml_assist mode requires a trained bundle")
        with self._mutable_lock:
            self._mode = mode

    def update_setpoints(self, changes: dict) -> ControlConfig:
        """Validated config swap; takes effect on the next tick."""
        allowed = {"desired_water_level", "lower_temperature_threshold",
                   "upper_temperature_threshold", "lower_humidity_threshold",
                   "upper_humidity_threshold", "motor_fill_rate"}
        unknown = set(changes) - allowed
        if unknown:
            raise ServiceError(f"unknown setpoint fields: {sorted(unknown)}")
        with self._mutable_lock:
            candidate = replace(self._cfg, **{k: float(v) for k, v in changes.items()})
            candidate.validate()   # ControlError propagates to the API as 400
            self._cfg = candidate
        self.log.append("setpoint_change", {"changes": changes},
                        self.state.time_s)
        return candidate

    def apply_override(self, device: str, action: str, ttl_s: float = 0.0,
                       operator_id: str = "operator") -> list[OverrideEntry]:
        now = self.state.time_s
        active = self.overrides.apply(device, action, ttl_s, operator_id, now)
        self.log.append("override", {
            "device": device, "action": action, "ttl_s": ttl_s,
            "operator_id": operator_id, "issued_at_s": now}, now)
        return active

    def ack_alert(self, alert_id: int) -> AlertEntry:
        entry = self.alerts.ack(alert_id)
        self.log.append("alert", {"action": "ack", "id": alert_id,
                                  "code": entry.alert.code.value},
                        self.state.time_s)
        return entry

    # -- the loop ----------------------------------------------------------

    def step_once(self) -> None:
        cfg = self.config
        mode = self.mode
        now = self.state.time_s
        readings = read_sensors(self.state, self.sensor_cfg, self.rng)
        frame = self.controller.pipeline.push(readings)

        # write-ahead: the triggering frame is durable before any decision
        self._append_guarded("reading", {
            "state": jsonio.state_to_dict(self.state),
            "readings": [jsonio.reading_to_dict(r) for r in readings],
            "frame": jsonio.frame_to_dict(frame)}, now)

        decision = self.controller.decide_frame(
            frame, cfg, mode, overrides=self.overrides.active(now))
        if self._storage_degraded:
            decision.alerts.append(Alert(
                AlertCode.SENSOR_FAULT, Severity.WARNING, now,
                "event log unwritable; telemetry buffered in memory",
                subject="storage"))
        fresh, cleared = self.alerts.ingest(decision.alerts, self._tick_index)
        self._append_guarded("decision", jsonio.decision_to_dict(decision), now)
        for entry in fresh:
            self._append_guarded("alert", {
                "action": "raise", "id": entry.alert_id,
                "alert": jsonio.alert_to_dict(entry.alert)}, now)
        for entry in cleared:
            self._append_guarded("alert", {
                "action": "clear", "id": entry.alert_id,
                "code": entry.alert.code.value}, now)

        self.state = step_plant(self.state, decision.commands, self.params, self.rng)
        self._latest_frame = frame
        self._latest_decision = decision
        self._tick_index += 1

    def _append_guarded(self, kind: str, payload: dict, now: float) -> None:
        try:
            self.log.append(kind, payload, now)
            self._storage_degraded = False
        except EventLogError:
            self._storage_degraded = True

    def run(self) -> None:
        while not self._stop.is_set():
            started = time.monotonic()
            self.step_once()
            remainder = self.tick_wall_s - (time.monotonic() - started)
            if remainder > 0:
                self._stop.wait(remainder)

    def start(self) -> None:
        self._thread = threading.Thread(target=self.run, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=10.0)
            self._thread = None

    # -- snapshots ----------------------------------------------------------

    def state_snapshot(self) -> dict:
        cfg = self.config
        return {
            "t": self.state.time_s,
            "tick": self._tick_index,
            "mode": self.mode,
            "seq": self.log.last_seq,
            "frame": None if self._latest_frame is None
                     else jsonio.frame_to_dict(self._latest_frame),
            "decision": jsonio.decision_to_dict(self._latest_decision),
            "alerts": [{"id": e.alert_id, **jsonio.alert_to_dict(e.alert)}
                       for e in self.alerts.active()],
            "overrides": [e.to_dict() for e in self.overrides.entries()],
            "config": {
                "desired_water_level": cfg.desired_water_level,
                "lower_temperature_threshold": cfg.lower_temperature_threshold,
                "upper_temperature_threshold": cfg.upper_temperature_threshold,
                "lower_humidity_threshold": cfg.lower_humidity_threshold,
                "upper_humidity_threshold": cfg.upper_humidity_threshold,
                "motor_fill_rate": cfg.motor_fill_rate,
                "tick_interval_s": cfg.tick_interval_s,
            },
        }

    def models_snapshot(self) -> dict:
        if self.bundle is None:
            return {"loaded": False}
        return {"loaded": True, "metadata": self.bundle.metadata}


class _Handler(BaseHTTPRequestHandler):
    server_version = "aquafarm/0.1"
    protocol_version = "HTTP/1.1"

    # silence the default stderr access log
    def log_message(self, fmt, *args):
        pass

    @property
    def farm(self) -> FarmService:
        return self.server.farm   # type: ignore[attr-defined]

    def _send_json(self, doc: dict, status: int = 200) -> None:
        body = json.dumps(doc).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", "0"))
        if length == 0:
            return {}
        try:
            return json.loads(self.rfile.read(length))
        except json.JSONDecodeError as exc:
            raise ServiceError(f"request body is not valid JSON: {exc}") from exc

    def do_GET(self):
        url = urlparse(self.path)
        q = parse_qs(url.query)
        try:
            if url.path == "/api/state":
                self._send_json(self.farm.state_snapshot())
            elif url.path == "/api/models":
                self._send_json(self.farm.models_snapshot())
            elif url.path == "/api/history":
                result = query_history(
                    self.farm.log,
                    t0=float(q.get("from", ["0"])[0]),
                    t1=float(q.get("to", ["1e18"])[0]),
                    kinds=q["kinds"][0].split(",") if "kinds" in q else None,
                    max_n=int(q.get("limit", ["1000"])[0]),
                    after_seq=int(q.get("after_seq", ["0"])[0]))
                self._send_json(result)
            elif url.path == "/api/stream":
                self._stream(int(q.get("since_seq", ["0"])[0]))
            elif url.path == "/" or url.path.startswith("/ui"):
                self._serve_ui(url.path)
            else:
                self._send_json({"error": f"no such endpoint {url.path}"}, 404)
        except (ServiceError, ControlError, ValueError) as exc:
            self._send_json({"error": str(exc)}, 400)

    def do_POST(self):
        url = urlparse(self.path)
        try:
            body = self._read_body()
            if url.path == "/api/override":
                active = self.farm.apply_override(
                    device=body.get("device", ""),
                    action=body.get("action", ""),
                    ttl_s=float(body.get("ttl_s", 0.0)),
                    operator_id=str(body.get("operator_id", "operator")))
                self._send_json({"active": [e.to_dict() for e in active]})
            elif url.path == "/api/setpoints":
                cfg = self.farm.update_setpoints(body)
                self._send_json({"accepted": True,
                                 "config": self.farm.state_snapshot()["config"]})
            elif url.path == "/api/mode":
                self.farm.set_mode(body.get("mode", ""))
                self._send_json({"mode": self.farm.mode})
            elif url.path.startswith("/api/alerts/") and url.path.endswith("/ack"):
                alert_id = int(url.path.split("/")[3])
                entry = self.farm.ack_alert(alert_id)
                self._send_json({"acknowledged": entry.alert_id})
            else:
                self._send_json({"error": f"no such endpoint {url.path}"}, 404)
        except (ServiceError, ControlError) as exc:
            self._send_json({"error": str(exc)}, 400)
        except ValueError as exc:
            self._send_json({"error": str(exc)}, 400)

    def _stream(self, since_seq: int) -> None:
        sub = self.farm.log.subscribe(since_seq)
        try:
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            while True:
                try:
                    rec = sub.queue.get(timeout=2.0)
                except queue.Empty:
                    self.wfile.write(b": keep-alive\n\n")
                    self.wfile.flush()
                    continue
                data = json.dumps(rec.to_dict())
                self.wfile.write(f"id: {rec.seq}\ndata: {data}\n\n".encode())
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError):
            pass
        finally:
            self.farm.log.unsubscribe(sub)

    def _serve_ui(self, path: str) -> None:
        ui_dir = getattr(self.server, "ui_dir", None)
        if ui_dir is None:
            self._send_json({"error": "no UI bundle configured"}, 404)
            return
        rel = path[3:] if path.startswith("/ui") else path
        rel = rel.lstrip("/") or "index.html"
        target = (Path(ui_dir) / rel).resolve()
        if not str(target).startswith(str(Path(ui_dir).resolve())) or not target.is_file():
            self._send_json({"error": "not found"}, 404)
            return
        ctype = {"html": "text/html", "js": "text/javascript",
                 "css": "text/css", "map": "application/json",
                 "svg": "image/svg+xml"}.get(target.suffix.lstrip("."),
                                             "application/octet-stream")
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class ApiServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, farm: FarmService, port: int, ui_dir: Optional[str] = None):
        super().__init__(("127.0.0.1", port), _Handler)
        self.farm = farm
        self.ui_dir = ui_dir


def serve(farm: FarmService, port: int, ui_dir: Optional[str] = None) -> ApiServer:
    """Start the loop and the API; returns the running server."""
    server = ApiServer(farm, port, ui_dir)
    farm.start()
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


def shutdown(server: ApiServer) -> None:
    server.farm.stop()
    server.shutdown()
    server.server_close()
