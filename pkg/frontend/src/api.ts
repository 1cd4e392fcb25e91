/** Thin wrappers around the service's REST endpoints. */

import { DeviceName, StateSnapshot } from "./types.js";

export interface ApiResult<T = unknown> {
  ok: boolean;
  status: number;
  body: T;
}

async function request<T>(url: string, init?: RequestInit): Promise<ApiResult<T>> {
  const resp = await fetch(url, init);
  let body: unknown = null;
  try {
    body = await resp.json();
  } catch {
    body = null;
  }
  return { ok: resp.ok, status: resp.status, body: body as T };
}

function post<T>(url: string, doc: unknown): Promise<ApiResult<T>> {
  return request<T>(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(doc),
  });
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  getState(): Promise<ApiResult<StateSnapshot>> {
    return request(`${this.baseUrl}/api/state`);
  }

  getHistory(params: Record<string, string | number>): Promise<ApiResult> {
    const q = new URLSearchParams(
      Object.entries(params).map(([k, v]) => [k, String(v)]),
    );
    return request(`${this.baseUrl}/api/history?${q}`);
  }

  postOverride(device: DeviceName, action: "on" | "off" | "release", ttlS: number) {
    return post(`${this.baseUrl}/api/override`, {
      device,
      action,
      ttl_s: ttlS,
      operator_id: "dashboard",
    });
  }

  postSetpoints(changes: Record<string, number>) {
    return post(`${this.baseUrl}/api/setpoints`, changes);
  }

  ackAlert(id: number) {
    return post(`${this.baseUrl}/api/alerts/${id}/ack`, {});
  }

  setMode(mode: string) {
    return post(`${this.baseUrl}/api/mode`, { mode });
  }
}
