/** Wire types mirroring the telemetry service's JSON payloads. */

export type ChannelName = "level" | "temp" | "humidity" | "ph" | "behavior";

export const CHANNELS: ChannelName[] = ["level", "temp", "humidity", "ph", "behavior"];

export const DEVICES = ["motor", "heater", "cooler", "humidifier", "dehumidifier"] as const;
export type DeviceName = (typeof DEVICES)[number];

export interface EventRecord {
  seq: number;
  kind: "reading" | "decision" | "alert" | "override" | "setpoint_change";
  t: number;
  payload: Record<string, unknown>;
}

export interface AlertPayload {
  code: string;
  severity: "info" | "warning" | "critical";
  timestamp_s: number;
  message: string;
  subject: string;
  acknowledged: boolean;
}

export interface DecisionPayload {
  commands: Record<string, boolean | number>;
  fill_time_min: number | null;
  alerts: AlertPayload[];
  sources: Record<string, string>;
  setpoints: Record<string, number>;
  mode: string;
  timestamp_s: number;
}

export interface ConfigView {
  desired_water_level: number;
  lower_temperature_threshold: number;
  upper_temperature_threshold: number;
  lower_humidity_threshold: number;
  upper_humidity_threshold: number;
  motor_fill_rate: number;
  tick_interval_s: number;
}

export interface StateSnapshot {
  t: number;
  tick: number;
  mode: string;
  seq: number;
  frame: { values: Record<ChannelName, number> } | null;
  decision: DecisionPayload | null;
  alerts: Array<AlertPayload & { id: number }>;
  overrides: Array<{
    device: DeviceName;
    action: "on" | "off";
    ttl_s: number;
    operator_id: string;
    issued_at_s: number;
    expires_at_s: number;
  }>;
  config: ConfigView;
}
