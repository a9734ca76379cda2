/**
 * Protocol and domain types for the operator console.
 *
 * The backend speaks newline-delimited JSON over a local TCP socket; every
 * request carries a `type` plus an optional idempotency `msg_id`, and every
 * reply echoes `ok`/`data` along with a fresh device status snapshot.
 */

export type DeviceState =
  | "disarmed"
  | "armed"
  | "stimulating"
  | "fault"
  | "lockout";

export interface DeviceStatus {
  state: DeviceState;
  fault_reason: string | null;
  resistance_kohm: number | null;
  intensity_ua: number;
  clock_ms: number;
  mode: string;
}

export interface HandMapInfo {
  version: string;
  scale_mm: number;
  rows: string[]; // region codes per cell, '0' = background
}

export interface CalibrationState {
  finger: string;
  mode: string;
  channel: number;
  intensity_ua: number;
  steps: number;
  felt: boolean;
}

export interface CalibrationResult {
  finger: string;
  channel: number;
  intensity_ua: number;
  steps: number;
}

export interface TrialDescriptor {
  trial_index: number;
  channel: number | string | null;
  target_finger: string | null;
  visual_size: string | null;
  visual_opacity: string | null;
  note: string;
}

export interface StudyState {
  kind: string;
  participant: string;
  trials_total: number;
  trials_done: number;
  awaiting_report: boolean;
  current: TrialDescriptor | null;
  log_path: string | null;
}

export interface ReportDraft {
  mask_rows: string[] | null;
  strongest_point: [number, number] | null;
  quality: string | null;
}

export interface Snapshot {
  status: DeviceStatus;
  mode: string;
  calibration: CalibrationState | null;
  calibrations: Record<string, { channel: number; intensity_ua: number }>;
  study: StudyState | null;
  draft: ReportDraft | null;
  handmap: HandMapInfo;
}

export interface Reply {
  ok: boolean;
  type?: string;
  data?: Record<string, unknown>;
  error?: string;
  status?: DeviceStatus;
}

export interface PushMessage {
  push: string;
  status?: DeviceStatus;
}

export const QUALITY_KEYWORDS = [
  "tapping",
  "vibrating",
  "tingling",
  "pressing",
  "skin-stretching",
] as const;

export type QualityKeyword = (typeof QUALITY_KEYWORDS)[number];

/** Console poll cadence for live device status (5 Hz). */
export const STATUS_POLL_INTERVAL_MS = 200;

/** Minimal request surface the UI components need; the real client and the
 * test mocks both satisfy it. */
export interface BackendClient {
  request(type: string, payload?: Record<string, unknown>): Promise<Reply>;
  requestKeyed(type: string, payload?: Record<string, unknown>): Promise<Reply>;
}
