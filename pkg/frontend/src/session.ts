/**
 * Console session orchestration: connect, restore from the backend snapshot
 * (the console keeps no ground truth of its own), run trials, sync the
 * report draft, and poll live device status at 5 Hz.
 */

import { CalibrationStepper } from "./calibration.js";
import { LineClient } from "./lineClient.js";
import { MaskCanvas } from "./mask.js";
import type {
  DeviceStatus,
  Reply,
  ReportDraft,
  Snapshot,
  StudyState,
} from "./types.js";
import { STATUS_POLL_INTERVAL_MS } from "./types.js";

export class ConsoleSession {
  readonly client: LineClient;
  stepper: CalibrationStepper;
  mask: MaskCanvas | null = null;
  snapshot: Snapshot | null = null;
  status: DeviceStatus | null = null;
  private pollTimer: NodeJS.Timeout | null = null;

  onStatus: ((status: DeviceStatus) => void) | null = null;

  constructor(client?: LineClient) {
    this.client = client ?? new LineClient();
    this.stepper = new CalibrationStepper(this.client);
    this.client.onPush = (msg) => {
      if (msg.status) this.applyStatus(msg.status);
    };
  }

  async connect(port: number, host = "127.0.0.1"): Promise<Snapshot> {
    await this.client.connect(port, host);
    return this.refresh();
  }

  /** Pull the full backend snapshot; called on connect and on reconnect, so
   * a refreshed console resumes exactly where the session stands. */
  async refresh(): Promise<Snapshot> {
    const reply = await this.client.request("snapshot");
    if (!reply.ok || !reply.data) {
      throw new Error(reply.error ?? "snapshot failed");
    }
    const snap = reply.data as unknown as Snapshot;
    this.snapshot = snap;
    this.applyStatus(snap.status);
    this.stepper.restore(snap.calibration);
    this.mask = new MaskCanvas(snap.handmap);
    const draft = snap.draft as ReportDraft | null;
    if (draft?.mask_rows) {
      this.mask.loadRows(draft.mask_rows, draft.strongest_point, draft.quality);
    }
    return snap;
  }

  private applyStatus(status: DeviceStatus): void {
    this.status = status;
    this.stepper.updateStatus(status);
    this.onStatus?.(status);
  }

  startPolling(intervalMs = STATUS_POLL_INTERVAL_MS): void {
    this.stopPolling();
    this.pollTimer = setInterval(() => {
      this.client
        .request("status")
        .then((reply) => {
          if (reply.status) this.applyStatus(reply.status);
        })
        .catch(() => undefined);
    }, intervalMs);
  }

  stopPolling(): void {
    if (this.pollTimer) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }

  async startStudy(kind: string, participant = "p01"): Promise<Reply> {
    const reply = await this.client.requestKeyed("start_study", {
      kind,
      participant,
    });
    if (reply.status) this.applyStatus(reply.status);
    return reply;
  }

  async nextTrial(auto = false): Promise<Reply> {
    const reply = await this.client.requestKeyed("next_trial", { auto });
    if (reply.status) this.applyStatus(reply.status);
    if (reply.ok && !auto) this.mask?.clear();
    return reply;
  }

  /** Mirror the current paint state to the backend draft (refresh safety). */
  async syncDraft(): Promise<Reply | null> {
    if (!this.mask) return null;
    return this.client.request("update_draft", {
      mask_rows: this.mask.toRows(),
      strongest_point: this.mask.strongest,
      quality: this.mask.quality,
    });
  }

  /** Validate locally, then submit; the backend clears the trial draft. */
  async submitReport(): Promise<Reply> {
    if (!this.mask) throw new Error("no hand map loaded");
    const check = this.mask.validate();
    if (!check.ok) {
      return { ok: false, error: check.error };
    }
    const reply = await this.client.requestKeyed("submit_report", {
      mask_rows: this.mask.toRows(),
      strongest_point: this.mask.strongest,
      quality: this.mask.quality,
    });
    if (reply.status) this.applyStatus(reply.status);
    if (reply.ok) this.mask.clear();
    return reply;
  }

  async fetchRecord(index = -1): Promise<Reply> {
    return this.client.request("get_record", { index });
  }

  async resetLockout(): Promise<Reply> {
    const reply = await this.client.requestKeyed("reset_lockout");
    if (reply.status) this.applyStatus(reply.status);
    return reply;
  }

  study(): StudyState | null {
    return this.snapshot?.study ?? null;
  }

  close(): void {
    this.stopPolling();
    this.client.close();
  }
}
