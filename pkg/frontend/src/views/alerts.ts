/** Alert dashboard: poll the unacknowledged list every few seconds,
 * acknowledge optimistically, tolerate double-acks. Poll failures keep the
 * last good list and show a staleness banner with the last success time. */

import { Alert, ApiError, MfApi } from "../api.js";

export interface AlertDashboardState {
  alerts: Alert[];
  lastSuccess: number | null;
  stale: boolean;
  error: string | null;
}

export const DEFAULT_POLL_INTERVAL_MS = 5000;

export class AlertPoller {
  state: AlertDashboardState = { alerts: [], lastSuccess: null, stale: false, error: null };
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private api: MfApi,
    private onChange: (state: AlertDashboardState) => void = () => {},
    private now: () => number = Date.now,
  ) {}

  async tick(): Promise<AlertDashboardState> {
    try {
      const alerts = await this.api.listAlerts(false);
      this.state = { alerts, lastSuccess: this.now(), stale: false, error: null };
    } catch (err) {
      const message = err instanceof Error ? err.message : String(err);
      this.state = { ...this.state, stale: true, error: message };
    }
    this.onChange(this.state);
    return this.state;
  }

  start(intervalMs = DEFAULT_POLL_INTERVAL_MS): void {
    this.stop();
    void this.tick();
    this.timer = setInterval(() => void this.tick(), intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  /** Acknowledge and refresh; a concurrent ack elsewhere is fine. */
  async acknowledge(alertId: string): Promise<void> {
    try {
      await this.api.ackAlert(alertId);
    } catch (err) {
      if (!(err instanceof ApiError && err.code === "already_acknowledged")) {
        throw err;
      }
    }
    await this.tick();
  }
}
