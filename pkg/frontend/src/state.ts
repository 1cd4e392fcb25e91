/** Client view state, derived purely from the event stream.
 *
 * The dashboard never simulates anything: every chart point, lamp, alert
 * pin and override badge traces back to an EventRecord sequence number
 * (plus the initial /api/state snapshot for config and mode).
 */

import {
  AlertPayload,
  CHANNELS,
  ChannelName,
  ConfigView,
  DecisionPayload,
  DeviceName,
  EventRecord,
} from "./types.js";

export const CHART_CAPACITY = 600;

export type Connection = "connecting" | "live" | "lost";

export interface AlertView {
  id: number;
  code: string;
  severity: string;
  message: string;
  subject: string;
  acknowledged: boolean;
}

export interface OverrideView {
  device: DeviceName;
  on: boolean;
  expiresAt: number;
  operatorId: string;
  pending: boolean; // optimistic badge until the override event returns
}

export interface Point {
  t: number;
  v: number;
}

export interface ViewState {
  connection: Connection;
  lastSeq: number;
  simTime: number;
  decision: DecisionPayload | null;
  buffers: Record<ChannelName, Point[]>;
  alerts: AlertView[];
  overrides: Partial<Record<DeviceName, OverrideView>>;
  config: ConfigView | null;
  mode: string;
}

export function initialState(): ViewState {
  const buffers = {} as Record<ChannelName, Point[]>;
  for (const ch of CHANNELS) buffers[ch] = [];
  return {
    connection: "connecting",
    lastSeq: 0,
    simTime: 0,
    decision: null,
    buffers,
    alerts: [],
    overrides: {},
    config: null,
    mode: "rule_only",
  };
}

export function isPinned(a: AlertView): boolean {
  return a.severity === "critical" && !a.acknowledged;
}

const SEVERITY_RANK: Record<string, number> = { critical: 0, warning: 1, info: 2 };

export function sortedAlerts(alerts: AlertView[]): AlertView[] {
  return [...alerts].sort((a, b) => {
    const pin = Number(isPinned(b)) - Number(isPinned(a));
    if (pin !== 0) return pin;
    const sev = (SEVERITY_RANK[a.severity] ?? 9) - (SEVERITY_RANK[b.severity] ?? 9);
    if (sev !== 0) return sev;
    return b.id - a.id;
  });
}

/** Apply one stream event; mutates and returns the state. */
export function applyEvent(state: ViewState, ev: EventRecord): ViewState {
  if (ev.seq <= state.lastSeq) return state; // at-least-once delivery: drop repeats
  state.lastSeq = ev.seq;
  switch (ev.kind) {
    case "reading": {
      const frame = ev.payload["frame"] as
        | { values: Record<ChannelName, number> }
        | undefined;
      state.simTime = ev.t;
      if (frame) {
        for (const ch of CHANNELS) {
          const buf = state.buffers[ch];
          buf.push({ t: ev.t, v: frame.values[ch] });
          if (buf.length > CHART_CAPACITY) buf.splice(0, buf.length - CHART_CAPACITY);
        }
      }
      pruneOverrides(state);
      break;
    }
    case "decision":
      state.decision = ev.payload as unknown as DecisionPayload;
      state.mode = state.decision.mode ?? state.mode;
      break;
    case "alert":
      applyAlertEvent(state, ev);
      break;
    case "override":
      applyOverrideEvent(state, ev);
      break;
    case "setpoint_change": {
      const changes = ev.payload["changes"] as Partial<ConfigView> | undefined;
      if (changes && state.config) state.config = { ...state.config, ...changes };
      break;
    }
  }
  return state;
}

function applyAlertEvent(state: ViewState, ev: EventRecord): void {
  const action = ev.payload["action"];
  const id = ev.payload["id"] as number;
  if (action === "raise") {
    const alert = ev.payload["alert"] as AlertPayload;
    if (!state.alerts.some((a) => a.id === id)) {
      state.alerts.push({ id, ...alert });
    }
  } else if (action === "ack") {
    const found = state.alerts.find((a) => a.id === id);
    if (found) found.acknowledged = true;
  } else if (action === "clear") {
    state.alerts = state.alerts.filter((a) => a.id !== id);
  }
}

function applyOverrideEvent(state: ViewState, ev: EventRecord): void {
  const device = ev.payload["device"] as DeviceName;
  const action = ev.payload["action"];
  if (action === "release") {
    delete state.overrides[device];
    return;
  }
  const issued = ev.payload["issued_at_s"] as number;
  const ttl = ev.payload["ttl_s"] as number;
  state.overrides[device] = {
    device,
    on: action === "on",
    expiresAt: issued + ttl,
    operatorId: (ev.payload["operator_id"] as string) ?? "operator",
    pending: false, // confirmed by the stream
  };
}

/** Overrides expire on simulated time carried by reading events. */
function pruneOverrides(state: ViewState): void {
  for (const device of Object.keys(state.overrides) as DeviceName[]) {
    const entry = state.overrides[device];
    if (entry && !entry.pending && state.simTime >= entry.expiresAt) {
      delete state.overrides[device];
    }
  }
}

/** Optimistic badge shown between POST and the confirming stream event. */
export function markPendingOverride(
  state: ViewState,
  device: DeviceName,
  on: boolean,
): void {
  state.overrides[device] = {
    device,
    on,
    expiresAt: Infinity,
    operatorId: "operator",
    pending: true,
  };
}

export function seedFromSnapshot(
  state: ViewState,
  snap: { mode: string; config: ConfigView },
): void {
  state.mode = snap.mode;
  state.config = snap.config;
}
