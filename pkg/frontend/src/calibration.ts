/**
 * Calibration stepper: the four operator controls (+0.1 mA, switch channel,
 * "felt it", abort), each mapped to exactly one backend command.
 *
 * Stepping is disabled while the device sits in fault or lockout and while a
 * command is in flight; every press goes out with an idempotency key, so a
 * duplicate click can never double-step the intensity.
 */

import type {
  BackendClient,
  CalibrationResult,
  CalibrationState,
  DeviceStatus,
  Reply,
} from "./types.js";

export interface StepperView {
  active: boolean;
  finger: string | null;
  channel: number | null;
  intensityUa: number;
  steps: number;
  felt: boolean;
  busy: boolean;
  stepEnabled: boolean;
  lastError: string | null;
  result: CalibrationResult | null;
}

export class CalibrationStepper {
  private state: CalibrationState | null = null;
  private status: DeviceStatus | null = null;
  private busy = false;
  private lastError: string | null = null;
  private result: CalibrationResult | null = null;
  commandsSent = 0;

  constructor(private readonly client: BackendClient) {}

  /** Device status feed (poll or push) gates the controls. */
  updateStatus(status: DeviceStatus): void {
    this.status = status;
  }

  restore(state: CalibrationState | null): void {
    this.state = state;
  }

  view(): StepperView {
    return {
      active: this.state !== null,
      finger: this.state?.finger ?? null,
      channel: this.state?.channel ?? null,
      intensityUa: this.state?.intensity_ua ?? 0,
      steps: this.state?.steps ?? 0,
      felt: this.state?.felt ?? false,
      busy: this.busy,
      stepEnabled: this.stepEnabled(),
      lastError: this.lastError,
      result: this.result,
    };
  }

  stepEnabled(): boolean {
    if (this.busy || this.state === null) return false;
    const state = this.status?.state;
    return state !== "fault" && state !== "lockout";
  }

  async start(finger: string, mode = "study1"): Promise<Reply> {
    this.result = null;
    const reply = await this.exec("cal_start", { finger, mode });
    if (reply.ok) this.state = reply.data as unknown as CalibrationState;
    return reply;
  }

  /** One "+0.1 mA" press: exactly one backend command, or none when the
   * controls are disabled. */
  async stepUp(): Promise<Reply | null> {
    if (!this.stepEnabled()) return null;
    const reply = await this.exec("cal_step", {});
    if (reply.ok) this.state = reply.data as unknown as CalibrationState;
    return reply;
  }

  async switchChannel(channel: number): Promise<Reply | null> {
    if (this.busy || this.state === null) return null;
    const reply = await this.exec("cal_switch", { channel });
    if (reply.ok) this.state = reply.data as unknown as CalibrationState;
    return reply;
  }

  /** "Felt it": confirm the current intensity as the threshold. */
  async confirmFelt(): Promise<Reply | null> {
    if (this.busy || this.state === null) return null;
    const reply = await this.exec("cal_confirm", {});
    if (reply.ok) {
      this.result = reply.data as unknown as CalibrationResult;
      this.state = null;
    }
    return reply;
  }

  async abort(): Promise<Reply | null> {
    if (this.state === null) return null;
    const reply = await this.exec("cal_abort", {});
    if (reply.ok) this.state = null;
    return reply;
  }

  private async exec(
    type: string,
    payload: Record<string, unknown>,
  ): Promise<Reply> {
    this.busy = true;
    this.lastError = null;
    try {
      this.commandsSent += 1;
      const reply = await this.client.requestKeyed(type, payload);
      if (reply.status) this.status = reply.status;
      if (!reply.ok) this.lastError = reply.error ?? "backend refused";
      return reply;
    } finally {
      this.busy = false;
    }
  }
}
