/** DOM panels: live charts with actuator lamps, alert center, override
 * panel, setpoint editor. All mutation goes through the documented POST
 * endpoints; rendering is a pure function of ViewState. */

import { ApiClient } from "./api.js";
import { LineChart } from "./chart.js";
import {
  ViewState,
  isPinned,
  markPendingOverride,
  sortedAlerts,
} from "./state.js";
import { CHANNELS, ChannelName, DEVICES, DeviceName } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

export class StatusBar {
  readonly root = el("div", "status-bar");
  private readonly conn = el("span", "conn");
  private readonly mode = el("span", "mode");
  private readonly clock = el("span", "clock");

  constructor() {
    this.root.append(this.conn, this.mode, this.clock);
  }

  render(state: ViewState): void {
    this.conn.textContent = state.connection;
    this.conn.className = `conn conn-${state.connection}`;
    this.mode.textContent = `mode: ${state.mode}`;
    this.clock.textContent = `sim t=${state.simTime.toFixed(0)}s`;
  }
}

const CHART_SPECS: Record<string, { vMin: number; vMax: number; color: string }> = {
  level: { vMin: 0, vMax: 100, color: "#569cd6" },
  temp: { vMin: 15, vMax: 35, color: "#ce9178" },
  humidity: { vMin: 0, vMax: 100, color: "#4ec9b0" },
  ph: { vMin: 5, vMax: 9, color: "#c586c0" },
};

export class ChartsPanel {
  readonly root = el("div", "charts-panel");
  readonly charts: Partial<Record<ChannelName, LineChart>> = {};
  private readonly lamps: Partial<Record<DeviceName, HTMLElement>> = {};

  constructor(getState: () => ViewState) {
    for (const ch of ["level", "temp", "humidity", "ph"] as ChannelName[]) {
      const spec = CHART_SPECS[ch];
      const chart = new LineChart({
        vMin: spec.vMin,
        vMax: spec.vMax,
        color: spec.color,
        guides: () => guidesFor(ch, getState()),
      });
      this.charts[ch] = chart;
      const card = el("div", "chart-card");
      card.append(el("h3", "", ch), chart.canvas);
      this.root.append(card);
    }
    const lampRow = el("div", "lamp-row");
    for (const device of DEVICES) {
      const lamp = el("span", "lamp", device);
      lamp.dataset.device = device;
      this.lamps[device] = lamp;
      lampRow.append(lamp);
    }
    this.root.append(lampRow);
  }

  render(state: ViewState): void {
    for (const ch of Object.keys(this.charts) as ChannelName[]) {
      this.charts[ch]!.draw(state.buffers[ch]);
    }
    for (const device of DEVICES) {
      const on = Boolean(state.decision?.commands[`${device}_on`]);
      const source = state.decision?.sources[device] ?? "rule";
      const lamp = this.lamps[device]!;
      lamp.className = `lamp ${on ? "lamp-on" : "lamp-off"} src-${source}`;
      lamp.title = `source: ${source}`;
    }
  }
}

function guidesFor(ch: ChannelName, state: ViewState): number[] {
  const cfg = state.config;
  if (!cfg) return [];
  switch (ch) {
    case "level":
      return [cfg.desired_water_level];
    case "temp":
      return [cfg.lower_temperature_threshold, cfg.upper_temperature_threshold];
    case "humidity":
      return [cfg.lower_humidity_threshold, cfg.upper_humidity_threshold];
    default:
      return [];
  }
}

export class AlertCenter {
  readonly root = el("div", "alert-center");
  private readonly list = el("ul", "alert-list");

  constructor(private readonly api: ApiClient) {
    this.root.append(el("h2", "", "alerts"), this.list);
  }

  render(state: ViewState): void {
    this.list.textContent = "";
    for (const alert of sortedAlerts(state.alerts)) {
      const item = el("li", `alert sev-${alert.severity}`);
      item.dataset.alertId = String(alert.id);
      if (isPinned(alert)) item.classList.add("pinned");
      item.append(
        el("span", "alert-code", alert.code),
        el("span", "alert-msg", alert.message),
      );
      if (alert.severity === "critical" && !alert.acknowledged) {
        const button = el("button", "ack-btn", "ack");
        button.addEventListener("click", () => {
          void this.api.ackAlert(alert.id).then((res) => {
            if (!res.ok) item.classList.add("ack-failed"); // stays pinned, retry allowed
          });
        });
        item.append(button);
      } else if (alert.acknowledged) {
        item.append(el("span", "acked", "acknowledged"));
      }
      this.list.append(item);
    }
  }
}

export class OverridePanel {
  readonly root = el("form", "override-panel") as HTMLFormElement;
  readonly device = el("select") as HTMLSelectElement;
  readonly action = el("select") as HTMLSelectElement;
  readonly ttl = el("input") as HTMLInputElement;
  readonly error = el("span", "form-error");
  private readonly activeList = el("ul", "override-list");

  constructor(
    private readonly api: ApiClient,
    private readonly getState: () => ViewState,
    private readonly onChanged: () => void,
  ) {
    for (const d of DEVICES) this.device.append(new Option(d, d));
    this.action.append(new Option("on", "on"), new Option("off", "off"));
    this.ttl.type = "number";
    this.ttl.value = "120";
    this.ttl.name = "ttl";
    const submit = el("button", "submit-btn", "apply override") as HTMLButtonElement;
    submit.type = "submit";
    this.root.append(
      el("h2", "", "manual override"),
      this.device,
      this.action,
      this.ttl,
      submit,
      this.error,
      this.activeList,
    );
    this.root.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.submit();
    });
  }

  async submit(): Promise<void> {
    const ttl = Number(this.ttl.value);
    if (!(ttl > 0)) {
      this.error.textContent = "ttl must be > 0 seconds"; // client-side block
      return;
    }
    this.error.textContent = "";
    const device = this.device.value as DeviceName;
    const on = this.action.value === "on";
    markPendingOverride(this.getState(), device, on);
    this.onChanged();
    const res = await this.api.postOverride(device, on ? "on" : "off", ttl);
    if (!res.ok) {
      delete this.getState().overrides[device]; // roll back optimistic badge
      this.error.textContent = `rejected: ${(res.body as { error?: string })?.error ?? res.status}`;
      this.onChanged();
    }
  }

  render(state: ViewState): void {
    this.activeList.textContent = "";
    for (const entry of Object.values(state.overrides)) {
      if (!entry) continue;
      const item = el("li", `override ${entry.pending ? "pending" : "confirmed"}`);
      item.dataset.device = entry.device;
      item.append(
        el("span", "", `${entry.device}: ${entry.on ? "on" : "off"}`),
        el("span", "badge", entry.pending ? "pending" : "active"),
      );
      const release = el("button", "release-btn", "release");
      release.addEventListener("click", () => {
        void this.api.postOverride(entry.device, "release", 0);
      });
      item.append(release);
      this.activeList.append(item);
    }
  }
}

export class SetpointEditor {
  readonly root = el("form", "setpoint-editor") as HTMLFormElement;
  readonly inputs: Record<string, HTMLInputElement> = {};
  readonly error = el("span", "form-error");

  private static FIELDS = [
    "desired_water_level",
    "lower_temperature_threshold",
    "upper_temperature_threshold",
    "lower_humidity_threshold",
    "upper_humidity_threshold",
  ];

  constructor(private readonly api: ApiClient) {
    this.root.append(el("h2", "", "setpoints"));
    for (const field of SetpointEditor.FIELDS) {
      const label = el("label", "", field.replaceAll("_", " "));
      const input = el("input") as HTMLInputElement;
      input.type = "number";
      input.step = "0.5";
      input.name = field;
      this.inputs[field] = input;
      label.append(input);
      this.root.append(label);
    }
    const submit = el("button", "submit-btn", "apply setpoints") as HTMLButtonElement;
    submit.type = "submit";
    this.root.append(submit, this.error);
    this.root.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.submit();
    });
  }

  /** lower < upper checked client-side before any request is sent. */
  validate(): string | null {
    const value = (name: string) => Number(this.inputs[name].value);
    if (value("lower_temperature_threshold") >= value("upper_temperature_threshold")) {
      return "temperature thresholds must satisfy lower < upper";
    }
    if (value("lower_humidity_threshold") >= value("upper_humidity_threshold")) {
      return "humidity thresholds must satisfy lower < upper";
    }
    return null;
  }

  async submit(): Promise<void> {
    const problem = this.validate();
    if (problem) {
      this.error.textContent = problem;
      return;
    }
    this.error.textContent = "";
    const changes: Record<string, number> = {};
    for (const [name, input] of Object.entries(this.inputs)) {
      if (input.value !== "") changes[name] = Number(input.value);
    }
    const res = await this.api.postSetpoints(changes);
    if (!res.ok) {
      this.error.textContent = `rejected: ${(res.body as { error?: string })?.error ?? res.status}`;
    }
  }

  render(state: ViewState): void {
    if (!state.config) return;
    for (const [name, input] of Object.entries(this.inputs)) {
      if (document.activeElement !== input && input.value === "") {
        input.value = String(state.config[name as keyof typeof state.config]);
      }
    }
  }
}

export class HistoryPanel {
  readonly root = el("div", "history-panel");
  private readonly list = el("ul", "history-list");
  private readonly button = el("button", "load-btn", "load recent events");

  constructor(private readonly api: ApiClient) {
    this.button.addEventListener("click", () => void this.load());
    this.root.append(el("h2", "", "history"), this.button, this.list);
  }

  async load(): Promise<void> {
    const res = await this.api.getHistory({ from: 0, to: 1e15, limit: 20 });
    if (!res.ok) return;
    const events = (res.body as { events: Array<{ seq: number; kind: string; t: number }> }).events;
    this.list.textContent = "";
    for (const ev of events.slice(-20)) {
      this.list.append(el("li", "history-item", `#${ev.seq} ${ev.kind} @${ev.t}s`));
    }
  }
}
