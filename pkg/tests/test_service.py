"""Event log, alert ledger, overrides, the live service and its HTTP API."""

import http.client
import json
import time

import pytest

from aquafarm.control import Alert, AlertCode, ControlConfig, Severity
from aquafarm.plant import FarmState, PlantParams, SensorConfig
from aquafarm.service import (
    AlertLedger,
    ApiServer,
    EventLog,
    EventLogError,
    EventRecord,
    FarmService,
    OverrideManager,
    ServiceError,
    query_history,
    serve,
    shutdown,
)

QUIET = SensorConfig(noise_sigma={},  # zero-noise: values default to 0.0 sigma
                     dropout_prob=0.0, spike_prob=0.0)


def make_farm(tmp_path, **kw):
    kw.setdefault("plant_params", PlantParams(seed=1))
    kw.setdefault("sensor_cfg", QUIET)
    kw.setdefault("control_cfg", ControlConfig())
    kw.setdefault("initial", FarmState(water_level=80.0, water_temp_c=26.0))
    kw.setdefault("tick_wall_s", 0.01)
    return FarmService(data_dir=tmp_path, **kw)


class TestEventLog:
    def test_seq_starts_at_one_and_increments(self, tmp_path):
        log = EventLog(tmp_path / "e.jsonl")
        r1 = log.append("reading", {"a": 1}, 0.0)
        r2 = log.append("decision", {"b": 2}, 60.0)
        assert (r1.seq, r2.seq) == (1, 2)

    def test_rescan_resumes_sequence(self, tmp_path):
        path = tmp_path / "e.jsonl"
        log = EventLog(path)
        for i in range(5):
            log.append("reading", {"i": i}, float(i))
        reopened = EventLog(path)
        rec = reopened.append("reading", {"i": 5}, 5.0)
        assert rec.seq == 6
        seqs = [r.seq for r in reopened.records()]
        assert seqs == [1, 2, 3, 4, 5, 6]   # gapless across restart

    def test_replay_of_file_matches_live_order(self, tmp_path):
        path = tmp_path / "e.jsonl"
        log = EventLog(path)
        live = [log.append("reading", {"i": i}, float(i)) for i in range(10)]
        replayed = EventLog(path).records()
        assert replayed == live

    def test_subscribe_backlog_then_live(self, tmp_path):
        log = EventLog(tmp_path / "e.jsonl")
        log.append("reading", {"i": 0}, 0.0)
        log.append("reading", {"i": 1}, 1.0)
        sub = log.subscribe(since_seq=1)
        log.append("reading", {"i": 2}, 2.0)
        got = [sub.queue.get(timeout=1).seq for _ in range(2)]
        assert got == [2, 3]

    def test_two_subscribers_identical_order(self, tmp_path):
        log = EventLog(tmp_path / "e.jsonl")
        s1 = log.subscribe()
        s2 = log.subscribe()
        for i in range(5):
            log.append("reading", {"i": i}, float(i))
        a = [s1.queue.get(timeout=1).seq for _ in range(5)]
        b = [s2.queue.get(timeout=1).seq for _ in range(5)]
        assert a == b == [1, 2, 3, 4, 5]

    def test_unwritable_storage_keeps_memory_tail(self, tmp_path):
        log = EventLog(tmp_path / "e.jsonl")
        log.append("reading", {"i": 0}, 0.0)
        log.path = tmp_path / "nosuch" / "e.jsonl"   # break the writer
        with pytest.raises(EventLogError):
            log.append("reading", {"i": 1}, 1.0)
        assert [r.seq for r in log.records()] == [1, 2]   # memory keeps history
        log.path = tmp_path / "e.jsonl"              # storage recovers
        log.append("reading", {"i": 2}, 2.0)
        on_disk = [r.seq for r in EventLog(tmp_path / "e.jsonl").records()]
        assert on_disk == [1, 2, 3]                  # pending flushed in order

    def test_append_record_rejects_gaps(self, tmp_path):
        log = EventLog(tmp_path / "e.jsonl")
        log.append_record(EventRecord(1, "reading", 0.0, {}))
        with pytest.raises(ServiceError):
            log.append_record(EventRecord(3, "reading", 0.0, {}))

    def test_unknown_kind_rejected(self, tmp_path):
        log = EventLog(tmp_path / "e.jsonl")
        with pytest.raises(ServiceError):
            log.append("gossip", {}, 0.0)


class TestQueryHistory:
    def fill(self, tmp_path):
        log = EventLog(tmp_path / "e.jsonl")
        for i in range(10):
            kind = "reading" if i % 2 == 0 else "decision"
            log.append(kind, {"i": i}, float(i * 60))
        return log

    def test_range_and_kind_filter(self, tmp_path):
        log = self.fill(tmp_path)
        out = query_history(log, 60.0, 300.0, kinds=["decision"])
        assert [e["payload"]["i"] for e in out["events"]] == [1, 3, 5]
        assert out["next_after_seq"] is None

    def test_pagination_token(self, tmp_path):
        log = self.fill(tmp_path)
        page1 = query_history(log, 0.0, 1e9, max_n=4)
        assert len(page1["events"]) == 4
        token = page1["next_after_seq"]
        assert token == page1["events"][-1]["seq"]
        page2 = query_history(log, 0.0, 1e9, max_n=100, after_seq=token)
        assert page2["events"][0]["seq"] == token + 1

    def test_invalid_range_rejected(self, tmp_path):
        with pytest.raises(ServiceError):
            query_history(self.fill(tmp_path), 100.0, 0.0)


def alert(code=AlertCode.LOW_WATER, severity=Severity.WARNING, subject="level"):
    return Alert(code, severity, 0.0, "msg", subject=subject)


class TestAlertLedger:
    def test_dedup_by_code_and_subject(self):
        ledger = AlertLedger()
        first, _ = ledger.ingest([alert()], 0)
        again, _ = ledger.ingest([alert()], 1)
        assert len(first) == 1 and again == []
        assert len(ledger.active()) == 1

    def test_warning_autoclears_after_three_quiet_ticks(self):
        ledger = AlertLedger()
        raised, _ = ledger.ingest([alert()], 0)
        ledger.ingest([], 1)
        _, cleared = ledger.ingest([], 2)
        assert len(ledger.active()) == 1 and cleared == []
        _, cleared = ledger.ingest([], 3)
        assert ledger.active() == []
        assert [e.alert_id for e in cleared] == [raised[0].alert_id]

    def test_critical_persists_until_acked(self):
        ledger = AlertLedger()
        entry = ledger.ingest([alert(AlertCode.CRITICAL_TEMP, Severity.CRITICAL, "temp")], 0)[0][0]
        for t in range(1, 10):
            ledger.ingest([], t)
        assert len(ledger.active()) == 1     # condition long gone, still pinned
        ledger.ack(entry.alert_id)
        _, cleared = ledger.ingest([], 10)
        assert ledger.active() == []
        assert cleared[0].alert_id == entry.alert_id

    def test_ack_unknown_id_rejected(self):
        with pytest.raises(ServiceError):
            AlertLedger().ack(99)


class TestOverrideManager:
    def test_apply_and_expire_on_sim_time(self):
        mgr = OverrideManager()
        mgr.apply("heater", "off", ttl_s=120.0, operator_id="op", now_s=0.0)
        assert mgr.active(now_s=60.0) == {"heater": False}
        assert mgr.active(now_s=119.0) == {"heater": False}
        assert mgr.active(now_s=120.0) == {}

    def test_release_cancels_immediately(self):
        mgr = OverrideManager()
        mgr.apply("motor", "on", 600.0, "op", 0.0)
        mgr.apply("motor", "release", 0.0, "op", 10.0)
        assert mgr.active(10.0) == {}

    def test_unknown_device_rejected(self):
        with pytest.raises(ServiceError):
            OverrideManager().apply("laser", "on", 10.0, "op", 0.0)

    def test_bad_ttl_rejected(self):
        with pytest.raises(ServiceError):
            OverrideManager().apply("motor", "on", 0.0, "op", 0.0)


class TestFarmService:
    def test_write_ahead_ordering(self, tmp_path):
        farm = make_farm(tmp_path)
        for _ in range(3):
            farm.step_once()
        records = farm.log.records()
        by_tick = {}
        for rec in records:
            if rec.kind in ("reading", "decision"):
                by_tick.setdefault(rec.timestamp_s, []).append(rec.kind)
        for kinds in by_tick.values():
            assert kinds.index("reading") < kinds.index("decision")

    def test_override_applies_next_tick(self, tmp_path):
        farm = make_farm(tmp_path, initial=FarmState(water_temp_c=24.0))
        farm.step_once()
        assert farm.state_snapshot()["decision"]["commands"]["heater_on"]
        farm.apply_override("heater", "off", ttl_s=120.0)
        farm.step_once()
        decision = farm.state_snapshot()["decision"]
        assert decision["commands"]["heater_on"] is False
        assert decision["sources"]["heater"] == "manual"

    def test_override_expires_after_ttl(self, tmp_path):
        farm = make_farm(tmp_path, initial=FarmState(water_temp_c=24.0))
        farm.apply_override("heater", "off", ttl_s=120.0)  # two 60 s ticks
        farm.step_once()
        farm.step_once()
        assert farm.state_snapshot()["decision"]["sources"]["heater"] == "manual"
        farm.step_once()
        assert farm.state_snapshot()["decision"]["sources"]["heater"] == "rule"

    def test_setpoint_update_validated_and_applied(self, tmp_path):
        farm = make_farm(tmp_path)
        with pytest.raises(Exception):
            farm.update_setpoints({"lower_temperature_threshold": 29.0})
        farm.update_setpoints({"desired_water_level": 90.0})
        farm.step_once()
        assert farm.state_snapshot()["config"]["desired_water_level"] == 90.0
        kinds = [r.kind for r in farm.log.records()]
        assert "setpoint_change" in kinds

    def test_critical_alert_raised_and_acked(self, tmp_path):
        farm = make_farm(tmp_path, initial=FarmState(water_temp_c=35.0))
        farm.step_once()
        active = farm.state_snapshot()["alerts"]
        assert any(a["code"] == "CRITICAL_TEMP" for a in active)
        alert_id = active[0]["id"]
        farm.ack_alert(alert_id)
        assert farm.alerts.active()[0].alert.acknowledged

    def test_alert_clear_event_emitted(self, tmp_path):
        # low-water warning clears (with an event) once the tank fills
        farm = make_farm(tmp_path, initial=FarmState(water_level=12.0))
        for _ in range(10):
            farm.step_once()
        clears = [r for r in farm.log.records()
                  if r.kind == "alert" and r.payload.get("action") == "clear"]
        assert any(c.payload["code"] == "LOW_WATER" for c in clears)

    def test_storage_failure_raises_warning_alert_and_recovers(self, tmp_path):
        farm = make_farm(tmp_path)
        farm.step_once()
        farm.log.path = tmp_path / "gone" / "e.jsonl"
        farm.step_once()   # appends fail, loop must survive
        assert farm._storage_degraded
        farm.step_once()
        alerts = farm.state_snapshot()["alerts"]
        assert any("unwritable" in a["message"] for a in alerts)
        farm.log.path = tmp_path / "episode.jsonl"
        farm.step_once()
        assert not farm._storage_degraded
        seqs = [r.seq for r in farm.log.records()]
        assert seqs == list(range(1, len(seqs) + 1))   # still gapless


def get_json(port, path):
    conn = http.client.HTTPConnection("127.0.0.1", port, timeout=5)
    conn.request("GET", path)
    resp = conn.getresponse()
    body = json.loads(resp.read())
    conn.close()
    return resp.status, body


def post_json(port, path, doc):
    conn = http.client.HTTPConnection("127.0.0.1", port, timeout=5)
    body = json.dumps(doc)
    conn.request("POST", path, body=body, headers={"Content-Type": "application/json"})
    resp = conn.getresponse()
    out = json.loads(resp.read())
    conn.close()
    return resp.status, out


def read_stream(port, since_seq, n_events, timeout=10.0):
    """Minimal SSE client over a raw HTTP connection."""
    conn = http.client.HTTPConnection("127.0.0.1", port, timeout=timeout)
    conn.request("GET", f"/api/stream?since_seq={since_seq}")
    resp = conn.getresponse()
    events = []
    buffer = b""
    deadline = time.time() + timeout
    while len(events) < n_events and time.time() < deadline:
        chunk = resp.read1(4096)
        if not chunk:
            break
        buffer += chunk
        while b"\n\n" in buffer:
            block, buffer = buffer.split(b"\n\n", 1)
            for line in block.split(b"\n"):
                if line.startswith(b"data: "):
                    events.append(json.loads(line[6:]))
    conn.close()
    return events


@pytest.fixture
def running_server(tmp_path):
    farm = make_farm(tmp_path, tick_wall_s=0.02)
    server = serve(farm, port=0)
    port = server.server_address[1]
    yield farm, server, port
    shutdown(server)


class TestHttpApi:
    def test_state_endpoint(self, running_server):
        farm, server, port = running_server
        time.sleep(0.2)
        status, body = get_json(port, "/api/state")
        assert status == 200
        assert body["frame"] is not None
        assert body["mode"] == "rule_only"
        # the tank started at 80%, so the very first decision engaged the motor
        _, hist = get_json(port, "/api/history?from=0&to=1e9&kinds=decision&limit=1")
        assert hist["events"][0]["payload"]["commands"]["motor_on"] is True

    def test_override_roundtrip_within_one_tick(self, running_server):
        farm, server, port = running_server
        time.sleep(0.1)
        status, body = post_json(port, "/api/override",
                                 {"device": "motor", "action": "off", "ttl_s": 600})
        assert status == 200
        assert body["active"][0]["device"] == "motor"
        deadline = time.time() + 2.0
        while time.time() < deadline:
            _, state = get_json(port, "/api/state")
            if state["decision"]["sources"]["motor"] == "manual":
                break
            time.sleep(0.02)
        assert state["decision"]["sources"]["motor"] == "manual"

    def test_bad_override_is_400(self, running_server):
        _, _, port = running_server
        status, body = post_json(port, "/api/override",
                                 {"device": "laser", "action": "on", "ttl_s": 10})
        assert status == 400
        assert "error" in body

    def test_setpoints_validation_rejected(self, running_server):
        _, _, port = running_server
        status, _ = post_json(port, "/api/setpoints",
                              {"lower_temperature_threshold": 29.5})
        assert status == 400
        status, body = post_json(port, "/api/setpoints",
                                 {"desired_water_level": 95.0})
        assert status == 200

    def test_mode_endpoint_requires_bundle(self, running_server):
        _, _, port = running_server
        status, _ = post_json(port, "/api/mode", {"mode": "ml_assist"})
        assert status == 400   # no bundle loaded
        status, body = post_json(port, "/api/mode", {"mode": "rule_only"})
        assert status == 200

    def test_models_endpoint(self, running_server):
        _, _, port = running_server
        status, body = get_json(port, "/api/models")
        assert status == 200
        assert body == {"loaded": False}

    def test_history_endpoint(self, running_server):
        _, _, port = running_server
        time.sleep(0.3)
        status, body = get_json(port, "/api/history?from=0&to=1e9&kinds=decision&limit=3")
        assert status == 200
        assert 0 < len(body["events"]) <= 3
        assert all(e["kind"] == "decision" for e in body["events"])

    def test_stream_delivers_live_events(self, running_server):
        _, _, port = running_server
        events = read_stream(port, since_seq=0, n_events=4)
        seqs = [e["seq"] for e in events]
        assert seqs == sorted(seqs)
        assert seqs[0] == 1

    def test_stream_resume_loses_nothing(self, running_server):
        farm, _, port = running_server
        first = read_stream(port, since_seq=0, n_events=3)
        cut = first[-1]["seq"]
        resumed = read_stream(port, since_seq=cut, n_events=3)
        assert resumed[0]["seq"] == cut + 1

    def test_unknown_endpoint_404(self, running_server):
        _, _, port = running_server
        status, _ = get_json(port, "/api/nothing")
        assert status == 404


class TestKillRestart:
    def test_seq_gapless_across_restart(self, tmp_path):
        farm1 = make_farm(tmp_path)
        server1 = serve(farm1, port=0)
        time.sleep(0.2)
        shutdown(server1)
        last = farm1.log.last_seq
        assert last > 0

        farm2 = make_farm(tmp_path)            # same data dir, same episode file
        server2 = serve(farm2, port=0)
        time.sleep(0.2)
        shutdown(server2)
        seqs = [r.seq for r in farm2.log.records()]
        assert seqs == list(range(1, len(seqs) + 1))
        assert seqs[-1] > last
