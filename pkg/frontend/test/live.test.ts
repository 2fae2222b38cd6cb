// Integration against a real gateway spawned as a subprocess. Covers the
// UI contract criteria: client/server validation parity over the shared
// table, and a dashboard observing live progress of slow_echo(5 s).

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { JobDashboard } from "../src/dashboard.js";
import { validateValue } from "../src/validate.js";
import type { WidgetDescriptor } from "../src/types.js";

const TOKEN = "ui-test-token";
const USER = "ui";

interface ContractTable {
  files: string[];
  cases: { widget: WidgetDescriptor; raw: unknown; accept: boolean }[];
}

const table: ContractTable = JSON.parse(
  readFileSync(
    fileURLToPath(new URL("../../fixtures/widget_validation.json", import.meta.url)),
    "utf-8"
  )
);

let server: ChildProcess;
let dataDir: string;
let client: ApiClient;

beforeAll(async () => {
  dataDir = mkdtempSync(join(tmpdir(), "wpsenv-ui-"));
  writeFileSync(join(dataDir, "users.json"), JSON.stringify({ [TOKEN]: USER }));
  server = spawn("python3", ["-m", "wpsenv.cli", "serve"], {
    env: {
      ...process.env,
      WPSENV_BIND_ADDR: "127.0.0.1:0",
      WPSENV_DATA_DIR: dataDir,
    },
    stdio: ["ignore", "pipe", "inherit"],
  });
  const baseUrl = await new Promise<string>((resolve, reject) => {
    let buffer = "";
    server.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const match = buffer.match(/serving on (http:\/\/[^\s]+)/);
      if (match) resolve(match[1]);
    });
    server.on("exit", (code) => reject(new Error(`gateway exited with ${code}`)));
    setTimeout(() => reject(new Error("gateway did not start")), 30_000);
  });
  client = new ApiClient({ baseUrl, token: TOKEN });
  for (const path of table.files) {
    await client.putFile(path, "fixture");
  }
});

afterAll(() => {
  server?.kill();
  if (dataDir) rmSync(dataDir, { recursive: true, force: true });
});

describe("client/server validation parity", () => {
  it("agrees with the server on every shared contract case", async () => {
    const fileExists = (p: string) => table.files.includes(p);
    for (const c of table.cases) {
      const local = validateValue(c.widget, c.raw, fileExists);
      const remote = await client.validateRemote(c.widget, c.raw, USER);
      expect(local.accept, `${c.widget.kind} raw=${JSON.stringify(c.raw)}`).toBe(
        remote.accept
      );
      expect(local.accept).toBe(c.accept);
    }
  });
});

describe("live job dashboard", () => {
  it("shows at least two distinct percents during slow_echo(5s)", async () => {
    const started = await client.startExecution(
      "slow_echo",
      { payload: "live", duration: "5" },
      "async"
    );
    const dashboard = new JobDashboard(client, started.id, 250);
    const view = await dashboard.runToCompletion();
    expect(view.snapshot?.status.state).toBe("succeeded");
    expect(view.percent).toBe(100);
    expect(new Set(view.percentsSeen).size).toBeGreaterThanOrEqual(2);
    const sorted = [...view.percentsSeen].sort((a, b) => a - b);
    expect(view.percentsSeen).toEqual(sorted);
    expect(view.logTail.some((e) => e.text.includes("slow_echo"))).toBe(true);
  });

  it("nests scenario child instances via parent_id", async () => {
    await client.publishScenario({
      name: "Echo twice",
      wrapper_name: "echo_twice",
      inputs: [
        {
          identifier: "text",
          title: "text",
          dtype: { kind: "literal", base: "string" },
          widget: { kind: "edit" },
          human_name: "text",
          human_description: "",
        },
      ],
      outputs: [
        {
          identifier: "answer",
          title: "answer",
          dtype: { kind: "literal", base: "string" },
          widget: { kind: "edit" },
          human_name: "answer",
          human_description: "",
        },
      ],
      source:
        "function echo_twice(text) {" +
        " var a = slow_echo(text, 0);" +
        " var b = slow_echo(a.result, 0);" +
        " return b.result; }",
    });
    const run = await client.startExecution("echo_twice", { text: "hi" }, "sync");
    expect(run.status.state).toBe("succeeded");
    const dashboard = new JobDashboard(client, run.id, 100);
    await dashboard.poll();
    expect(dashboard.view.children.length).toBe(2);
    for (const child of dashboard.view.children) {
      expect(child.parent_id).toBe(run.id);
      expect(child.service_id).toBe("slow_echo");
    }
  });
});
