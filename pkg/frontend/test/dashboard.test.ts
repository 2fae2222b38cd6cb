// Dashboard unit tests against a scripted client; the live gateway
// integration lives in live.test.ts.

import { describe, expect, it } from "vitest";

import { JobDashboard } from "../src/dashboard.js";
import type { ApiClient } from "../src/api.js";
import type { ExecutionSnapshot, LogEntry, StatusDoc } from "../src/types.js";

function snap(status: StatusDoc, parentId: string | null = null): ExecutionSnapshot {
  return {
    id: "job1",
    user: "alice",
    service_id: "slow_echo",
    parent_id: parentId,
    status,
    submitted_at: "2026-08-24T00:00:00",
    finished_at: null,
    results: [],
  };
}

const ts = "2026-08-24T00:00:00";

class ScriptedClient {
  polls = 0;
  constructor(
    private sequence: ExecutionSnapshot[],
    private log: LogEntry[] = [],
    private children: ExecutionSnapshot[] = []
  ) {}

  async getExecution(): Promise<ExecutionSnapshot> {
    const i = Math.min(this.polls, this.sequence.length - 1);
    this.polls += 1;
    return this.sequence[i];
  }

  async getLog(): Promise<LogEntry[]> {
    return this.log;
  }

  async listExecutions(): Promise<ExecutionSnapshot[]> {
    return this.children;
  }

  async cancelExecution(): Promise<boolean> {
    return true;
  }
}

function dash(client: ScriptedClient, intervalMs = 1): JobDashboard {
  return new JobDashboard(client as unknown as ApiClient, "job1", intervalMs);
}

describe("JobDashboard", () => {
  it("records every distinct percent and finishes at 100", async () => {
    const client = new ScriptedClient([
      snap({ state: "accepted", timestamp: ts }),
      snap({ state: "started", percent: 10, timestamp: ts }),
      snap({ state: "started", percent: 10, timestamp: ts }),
      snap({ state: "started", percent: 60, timestamp: ts }),
      snap({ state: "succeeded", timestamp: ts }),
    ]);
    const view = await dash(client).runToCompletion();
    expect(view.percentsSeen).toEqual([10, 60]);
    expect(view.percent).toBe(100);
    expect(view.terminal).toBe(true);
    expect(view.snapshot?.status.state).toBe("succeeded");
  });

  it("never lowers the completion estimate", async () => {
    const client = new ScriptedClient([
      snap({ state: "started", percent: 70, timestamp: ts }),
      snap({ state: "started", percent: 30, timestamp: ts }),
      snap({ state: "failed", message: "boom", timestamp: ts }),
    ]);
    const d = dash(client);
    await d.poll();
    expect(d.view.percent).toBe(70);
    await d.poll();
    expect(d.view.percent).toBe(70); // stale lower report ignored
    expect(await d.poll()).toBe(true);
    expect(d.view.snapshot?.status.message).toBe("boom");
  });

  it("keeps only the configured log tail", async () => {
    const log = Array.from({ length: 50 }, (_, i) => ({
      timestamp: ts,
      level: "info",
      text: `line ${i}`,
    }));
    const client = new ScriptedClient(
      [snap({ state: "succeeded", timestamp: ts })],
      log
    );
    const d = new JobDashboard(client as unknown as ApiClient, "job1", 1, 5);
    await d.poll();
    expect(d.view.logTail.map((e) => e.text)).toEqual([
      "line 45",
      "line 46",
      "line 47",
      "line 48",
      "line 49",
    ]);
  });

  it("lists child instances nested under the parent", async () => {
    const child = { ...snap({ state: "succeeded", timestamp: ts }, "job1"), id: "child1" };
    const client = new ScriptedClient(
      [snap({ state: "succeeded", timestamp: ts })],
      [],
      [child]
    );
    const d = dash(client);
    await d.poll();
    expect(d.view.children.map((c) => c.id)).toEqual(["child1"]);
    expect(d.view.children[0].parent_id).toBe("job1");
  });

  it("stop() halts the polling loop without cancelling the job", async () => {
    const client = new ScriptedClient([
      snap({ state: "started", percent: 5, timestamp: ts }),
    ]);
    const d = dash(client, 5);
    d.start();
    await new Promise((resolve) => setTimeout(resolve, 30));
    d.stop();
    const after = client.polls;
    await new Promise((resolve) => setTimeout(resolve, 30));
    expect(client.polls).toBe(after);
    expect(after).toBeGreaterThanOrEqual(2);
  });
});
