import { describe, expect, it } from "vitest";

import {
  CHART_CAPACITY,
  applyEvent,
  initialState,
  isPinned,
  markPendingOverride,
  sortedAlerts,
} from "../src/state.js";
import { EventRecord } from "../src/types.js";

let seq = 0;
function ev(kind: EventRecord["kind"], t: number, payload: Record<string, unknown>): EventRecord {
  seq += 1;
  return { seq, kind, t, payload };
}

function readingEvent(t: number, temp = 26.0): EventRecord {
  return ev("reading", t, {
    frame: { values: { level: 80, temp, humidity: 55, ph: 7.2, behavior: 0.8 } },
  });
}

describe("reading events", () => {
  it("pushes one point per channel and tracks sim time", () => {
    const s = initialState();
    applyEvent(s, readingEvent(0, 25.5));
    applyEvent(s, readingEvent(60, 25.7));
    expect(s.buffers.temp.map((p) => p.v)).toEqual([25.5, 25.7]);
    expect(s.buffers.level.length).toBe(2);
    expect(s.simTime).toBe(60);
  });

  it("trims buffers to the capacity", () => {
    const s = initialState();
    for (let i = 0; i < CHART_CAPACITY + 50; i++) {
      applyEvent(s, readingEvent(i * 60));
    }
    expect(s.buffers.temp.length).toBe(CHART_CAPACITY);
    expect(s.buffers.temp[0].t).toBe(50 * 60);
  });

  it("drops duplicate sequence numbers (at-least-once delivery)", () => {
    const s = initialState();
    const event = readingEvent(0);
    applyEvent(s, event);
    applyEvent(s, event); // replayed duplicate
    expect(s.buffers.temp.length).toBe(1);
  });
});

describe("alert events", () => {
  function raise(t: number, severity = "critical", id?: number): EventRecord {
    const event = ev("alert", t, {
      action: "raise",
      id: id ?? seq + 1,
      alert: {
        code: "CRITICAL_TEMP", severity, timestamp_s: t,
        message: "too hot", subject: "temp", acknowledged: false,
      },
    });
    return event;
  }

  it("raise pins criticals until ack", () => {
    const s = initialState();
    applyEvent(s, raise(0, "critical", 1));
    expect(s.alerts).toHaveLength(1);
    expect(isPinned(s.alerts[0])).toBe(true);
    applyEvent(s, ev("alert", 60, { action: "ack", id: 1 }));
    expect(s.alerts[0].acknowledged).toBe(true);
    expect(isPinned(s.alerts[0])).toBe(false);
  });

  it("clear removes the entry", () => {
    const s = initialState();
    applyEvent(s, raise(0, "warning", 5));
    applyEvent(s, ev("alert", 60, { action: "clear", id: 5 }));
    expect(s.alerts).toHaveLength(0);
  });

  it("sorts pinned criticals first", () => {
    const s = initialState();
    applyEvent(s, raise(0, "warning", 1));
    applyEvent(s, raise(0, "critical", 2));
    const sorted = sortedAlerts(s.alerts);
    expect(sorted[0].id).toBe(2);
  });
});

describe("override events", () => {
  it("confirms a pending override from the stream", () => {
    const s = initialState();
    markPendingOverride(s, "heater", false);
    expect(s.overrides.heater?.pending).toBe(true);
    applyEvent(s, ev("override", 120, {
      device: "heater", action: "off", ttl_s: 120, issued_at_s: 120,
      operator_id: "dashboard",
    }));
    expect(s.overrides.heater?.pending).toBe(false);
    expect(s.overrides.heater?.expiresAt).toBe(240);
  });

  it("release removes the override", () => {
    const s = initialState();
    applyEvent(s, ev("override", 0, {
      device: "motor", action: "on", ttl_s: 600, issued_at_s: 0, operator_id: "x",
    }));
    applyEvent(s, ev("override", 60, { device: "motor", action: "release" }));
    expect(s.overrides.motor).toBeUndefined();
  });

  it("expires on simulated time from reading events", () => {
    const s = initialState();
    applyEvent(s, ev("override", 0, {
      device: "cooler", action: "on", ttl_s: 120, issued_at_s: 0, operator_id: "x",
    }));
    applyEvent(s, readingEvent(60));
    expect(s.overrides.cooler).toBeDefined();
    applyEvent(s, readingEvent(120));
    expect(s.overrides.cooler).toBeUndefined();
  });
});

describe("setpoint events", () => {
  it("merges changes into config", () => {
    const s = initialState();
    s.config = {
      desired_water_level: 100, lower_temperature_threshold: 25,
      upper_temperature_threshold: 28, lower_humidity_threshold: 40,
      upper_humidity_threshold: 70, motor_fill_rate: 5, tick_interval_s: 60,
    };
    applyEvent(s, ev("setpoint_change", 60, { changes: { desired_water_level: 90 } }));
    expect(s.config?.desired_water_level).toBe(90);
    expect(s.config?.lower_temperature_threshold).toBe(25);
  });
});
