/** Dashboard bootstrap: snapshot for config, then the event stream drives
 * everything. Exported for the e2e suite, auto-mounts in a browser. */

import { ApiClient } from "./api.js";
import {
  AlertCenter,
  ChartsPanel,
  HistoryPanel,
  OverridePanel,
  SetpointEditor,
  StatusBar,
} from "./panels.js";
import {
  ViewState,
  applyEvent,
  initialState,
  seedFromSnapshot,
} from "./state.js";
import { openStream } from "./stream.js";
import { EventRecord } from "./types.js";

export interface Dashboard {
  state: ViewState;
  api: ApiClient;
  charts: ChartsPanel;
  alerts: AlertCenter;
  overrides: OverridePanel;
  setpoints: SetpointEditor;
  stop(): void;
}

export async function mount(root: HTMLElement, baseUrl = ""): Promise<Dashboard> {
  const api = new ApiClient(baseUrl);
  const state = initialState();

  const status = new StatusBar();
  const charts = new ChartsPanel(() => state);
  const alerts = new AlertCenter(api);
  const overrides = new OverridePanel(api, () => state, render);
  const setpoints = new SetpointEditor(api);
  const history = new HistoryPanel(api);

  const layout = document.createElement("div");
  layout.className = "dashboard";
  const side = document.createElement("div");
  side.className = "side";
  side.append(alerts.root, overrides.root, setpoints.root, history.root);
  layout.append(status.root, charts.root, side);
  root.append(layout);

  function render(): void {
    status.render(state);
    charts.render(state);
    alerts.render(state);
    overrides.render(state);
    setpoints.render(state);
  }

  const snap = await api.getState();
  if (snap.ok) {
    seedFromSnapshot(state, snap.body);
  }

  const stream = openStream(
    baseUrl,
    () => state.lastSeq,
    (ev: EventRecord) => {
      applyEvent(state, ev);
      render();
    },
    (conn) => {
      state.connection = conn;
      status.render(state);
    },
  );

  render();
  return { state, api, charts, alerts, overrides, setpoints, stop: () => stream.stop() };
}

declare global {
  interface Window {
    aquafarmDashboard?: Promise<Dashboard>;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  const root = document.getElementById("app");
  if (root) {
    window.aquafarmDashboard = mount(root, "");
  }
}
