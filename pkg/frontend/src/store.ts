// Campaign console state: polls the read endpoints on a timer, applies
// admin actions, and keeps one plain-data view the renderer can draw.
// Mutations refresh immediately after the server answers, so the UI never
// lags the server by more than one poll.

import {
  ApiError,
  blacklistArm as postBlacklist,
  addArm as postArm,
  getAllocation,
  getHistory,
  putFloorSchedule,
  reinstateArm as deleteBlacklist,
  runBatch,
  type Session,
} from "./client.js";
import { buildSeries } from "./chart.js";
import { validateArmId, validateFloorSchedule } from "./feasibility.js";
import type {
  AllocationResponse,
  CampaignView,
  FloorScheduleBody,
  HistoryResponse,
} from "./types.js";

export interface ConsoleState {
  view: CampaignView | null;
  // Arms whose blacklist request is in flight or not yet visible in a
  // poll; the renderer flags them before the server confirms.
  pendingBlacklist: string[];
  error: string | null;
  lastSync: number | null;
}

export interface ConsoleOptions {
  pollIntervalMs?: number;
  confirm?: (message: string) => boolean | Promise<boolean>;
  now?: () => number;
}

export const DEFAULT_POLL_INTERVAL_MS = 5000;

export function buildView(
  history: HistoryResponse,
  allocation: AllocationResponse,
): CampaignView {
  const last = history.epochs[history.epochs.length - 1];
  return {
    campaignId: history.campaign_id,
    epoch: history.epoch,
    blacklist: [...history.blacklist],
    series: buildSeries(history),
    posteriors: last ? last.posteriors : {},
    allocation,
    pendingAdmin: history.admin.filter((a) => a.effective_epoch > history.epoch),
  };
}

export class CampaignConsole {
  readonly campaignId: string;
  state: ConsoleState;

  private readonly session: Session;
  private readonly pollIntervalMs: number;
  private readonly confirm: (message: string) => boolean | Promise<boolean>;
  private readonly now: () => number;
  private readonly listeners = new Set<(state: ConsoleState) => void>();
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(session: Session, campaignId: string, options: ConsoleOptions = {}) {
    this.session = session;
    this.campaignId = campaignId;
    this.pollIntervalMs = options.pollIntervalMs ?? DEFAULT_POLL_INTERVAL_MS;
    this.confirm = options.confirm ?? (() => true);
    this.now = options.now ?? Date.now;
    this.state = { view: null, pendingBlacklist: [], error: null, lastSync: null };
  }

  subscribe(listener: (state: ConsoleState) => void): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  private update(patch: Partial<ConsoleState>): void {
    this.state = { ...this.state, ...patch };
    this.emit();
  }

  async refresh(): Promise<void> {
    try {
      const history = await getHistory(this.session, this.campaignId);
      const allocation = await getAllocation(this.session, this.campaignId);
      const confirmed = new Set(history.blacklist);
      this.update({
        view: buildView(history, allocation),
        pendingBlacklist: this.state.pendingBlacklist.filter(
          (arm) => !confirmed.has(arm),
        ),
        lastSync: this.now(),
      });
    } catch (err) {
      this.update({ error: messageOf(err) });
    }
  }

  startPolling(): void {
    if (this.timer !== null) {
      return;
    }
    this.timer = setInterval(() => {
      void this.refresh();
    }, this.pollIntervalMs);
  }

  stopPolling(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  // Blacklist flow: explicit confirmation, optimistic flag while the
  // request is out, reconciled against the server on the next poll. A
  // rejection (e.g. last live arm) surfaces the server's message as-is.
  async blacklistArm(arm: string): Promise<boolean> {
    const ok = await this.confirm(
      `Blacklist arm "${arm}"? It stops serving after the next batch.`,
    );
    if (!ok) {
      return false;
    }
    this.update({
      pendingBlacklist: [...this.state.pendingBlacklist, arm],
      error: null,
    });
    try {
      await postBlacklist(this.session, this.campaignId, arm);
    } catch (err) {
      this.update({
        pendingBlacklist: this.state.pendingBlacklist.filter((a) => a !== arm),
        error: messageOf(err),
      });
      return false;
    }
    await this.refresh();
    return true;
  }

  async reinstateArm(arm: string): Promise<boolean> {
    this.update({ error: null });
    try {
      await deleteBlacklist(this.session, this.campaignId, arm);
    } catch (err) {
      this.update({ error: messageOf(err) });
      return false;
    }
    await this.refresh();
    return true;
  }

  async addArm(arm: string): Promise<boolean> {
    const invalid = validateArmId(arm);
    if (invalid !== null) {
      this.update({ error: invalid });
      return false;
    }
    this.update({ error: null });
    try {
      await postArm(this.session, this.campaignId, arm);
    } catch (err) {
      this.update({ error: messageOf(err) });
      return false;
    }
    await this.refresh();
    return true;
  }

  async editFloorSchedule(schedule: FloorScheduleBody): Promise<boolean> {
    const armCount = this.state.view?.series.length;
    if (armCount !== undefined) {
      const invalid = validateFloorSchedule(schedule, armCount);
      if (invalid !== null) {
        this.update({ error: invalid });
        return false;
      }
    }
    this.update({ error: null });
    try {
      await putFloorSchedule(this.session, this.campaignId, schedule);
    } catch (err) {
      this.update({ error: messageOf(err) });
      return false;
    }
    await this.refresh();
    return true;
  }

  async triggerBatch(): Promise<boolean> {
    this.update({ error: null });
    try {
      await runBatch(this.session, this.campaignId);
    } catch (err) {
      this.update({ error: messageOf(err) });
      return false;
    }
    await this.refresh();
    return true;
  }
}

function messageOf(err: unknown): string {
  if (err instanceof ApiError || err instanceof Error) {
    return err.message;
  }
  return String(err);
}
