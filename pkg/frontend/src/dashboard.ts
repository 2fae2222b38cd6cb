// Job dashboard: polls one execution, tracks every percent value seen,
// keeps a log tail, and nests child instances via parent_id.

import type { ApiClient } from "./api.js";
import type { ExecutionSnapshot, LogEntry } from "./types.js";

export interface DashboardView {
  snapshot: ExecutionSnapshot | null;
  percent: number; // best-known completion, 0..100
  percentsSeen: number[]; // distinct values in arrival order
  elapsedMs: number;
  logTail: LogEntry[];
  children: ExecutionSnapshot[];
  terminal: boolean;
}

const TERMINAL = new Set(["succeeded", "failed"]);

export class JobDashboard {
  private startedAt = Date.now();
  private timer: ReturnType<typeof setTimeout> | null = null;
  readonly view: DashboardView = {
    snapshot: null,
    percent: 0,
    percentsSeen: [],
    elapsedMs: 0,
    logTail: [],
    children: [],
    terminal: false,
  };

  constructor(
    private client: ApiClient,
    private instanceId: string,
    private intervalMs = 1000,
    private logTailLength = 20
  ) {}

  // one poll step; returns true once the instance is terminal
  async poll(): Promise<boolean> {
    const snapshot = await this.client.getExecution(this.instanceId);
    const view = this.view;
    view.snapshot = snapshot;
    view.elapsedMs = Date.now() - this.startedAt;
    if (snapshot.status.state === "started") {
      const pct = snapshot.status.percent ?? 0;
      view.percent = Math.max(view.percent, pct);
      if (!view.percentsSeen.includes(pct)) view.percentsSeen.push(pct);
    } else if (snapshot.status.state === "succeeded") {
      view.percent = 100;
    }
    const log = await this.client.getLog(this.instanceId);
    view.logTail = log.slice(-this.logTailLength);
    view.children = await this.client.listExecutions(this.instanceId);
    view.terminal = TERMINAL.has(snapshot.status.state);
    return view.terminal;
  }

  // poll on an interval until terminal; onUpdate fires after every step
  start(onUpdate?: (view: DashboardView) => void): void {
    const step = async () => {
      let done = false;
      try {
        done = await this.poll();
      } catch {
        // transient poll failures are retried on the next tick
      }
      onUpdate?.(this.view);
      if (!done && this.timer !== null) {
        this.timer = setTimeout(step, this.intervalMs);
      }
    };
    this.timer = setTimeout(step, 0);
  }

  // navigation away cancels polling, not the job
  stop(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  async cancelJob(): Promise<boolean> {
    return this.client.cancelExecution(this.instanceId);
  }

  // convenience for tests and headless use: poll to completion
  async runToCompletion(): Promise<DashboardView> {
    for (;;) {
      if (await this.poll()) return this.view;
      await new Promise((resolve) => setTimeout(resolve, this.intervalMs));
    }
  }
}
