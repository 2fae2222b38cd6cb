// Thin REST client over the gateway. Every UI feature goes through this
// module; nothing in the frontend touches server internals.

import type {
  ChainPair,
  ExecutionSnapshot,
  FileStat,
  LogEntry,
  ServiceDescriptor,
  WidgetDescriptor,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    public reason: string,
    public detail?: unknown
  ) {
    super(reason);
  }
}

export interface ClientConfig {
  baseUrl: string;
  token: string;
  fetchImpl?: typeof fetch;
}

export class ApiClient {
  private baseUrl: string;
  private token: string;
  private fetchImpl: typeof fetch;

  constructor(config: ClientConfig) {
    this.baseUrl = config.baseUrl.replace(/\/+$/, "");
    this.token = config.token;
    this.fetchImpl = config.fetchImpl ?? fetch;
  }

  private async request(
    method: string,
    path: string,
    body?: unknown,
    raw?: boolean
  ): Promise<unknown> {
    const headers: Record<string, string> = {
      Authorization: `Bearer ${this.token}`,
    };
    let payload: string | Uint8Array | undefined;
    if (body !== undefined) {
      if (typeof body === "string" || body instanceof Uint8Array) {
        payload = body;
      } else {
        headers["Content-Type"] = "application/json";
        payload = JSON.stringify(body);
      }
    }
    const resp = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers,
      body: payload as BodyInit | undefined,
    });
    if (!resp.ok) {
      let code = "http";
      let reason = `${resp.status}`;
      let detail: unknown;
      try {
        detail = await resp.json();
        const doc = detail as { error?: string; reason?: string };
        code = doc.error ?? code;
        reason = doc.reason ?? reason;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, code, reason, detail);
    }
    if (raw) return new Uint8Array(await resp.arrayBuffer());
    return resp.json();
  }

  // -- catalog

  async listServices(query = ""): Promise<ServiceDescriptor[]> {
    const q = query ? `?query=${encodeURIComponent(query)}` : "";
    return (await this.request("GET", `/api/services${q}`)) as ServiceDescriptor[];
  }

  async getService(localId: string): Promise<ServiceDescriptor> {
    return (await this.request(
      "GET",
      `/api/services/${encodeURIComponent(localId)}`
    )) as ServiceDescriptor;
  }

  async chains(): Promise<ChainPair[]> {
    return (await this.request("GET", "/api/chains")) as ChainPair[];
  }

  // -- execution

  async startExecution(
    serviceId: string,
    values: Record<string, string>,
    mode: "sync" | "async" = "async"
  ): Promise<ExecutionSnapshot> {
    return (await this.request("POST", "/api/executions", {
      service_id: serviceId,
      values,
      mode,
    })) as ExecutionSnapshot;
  }

  async getExecution(id: string): Promise<ExecutionSnapshot> {
    return (await this.request(
      "GET",
      `/api/executions/${encodeURIComponent(id)}`
    )) as ExecutionSnapshot;
  }

  async listExecutions(parentId?: string): Promise<ExecutionSnapshot[]> {
    const q = parentId ? `?parent=${encodeURIComponent(parentId)}` : "";
    return (await this.request("GET", `/api/executions${q}`)) as ExecutionSnapshot[];
  }

  async getLog(id: string): Promise<LogEntry[]> {
    const doc = (await this.request(
      "GET",
      `/api/executions/${encodeURIComponent(id)}/log`
    )) as { log: LogEntry[] };
    return doc.log;
  }

  async cancelExecution(id: string): Promise<boolean> {
    const doc = (await this.request(
      "POST",
      `/api/executions/${encodeURIComponent(id)}/cancel`
    )) as { cancelled: boolean };
    return doc.cancelled;
  }

  // -- files

  async listFiles(dir = ""): Promise<FileStat[]> {
    const q = dir ? `?dir=${encodeURIComponent(dir)}` : "";
    const doc = (await this.request("GET", `/api/files${q}`)) as {
      files: FileStat[];
    };
    return doc.files;
  }

  async putFile(path: string, data: string | Uint8Array): Promise<FileStat> {
    return (await this.request("PUT", `/api/files/${path}`, data)) as FileStat;
  }

  async deleteFile(path: string): Promise<void> {
    await this.request("DELETE", `/api/files/${path}`);
  }

  // -- scenarios

  async publishScenario(pkg: {
    name: string;
    description?: string;
    wrapper_name: string;
    entry_function?: string;
    inputs: unknown[];
    outputs: unknown[];
    source: string;
  }): Promise<ServiceDescriptor> {
    return (await this.request("POST", "/api/scenarios", pkg)) as ServiceDescriptor;
  }

  // -- shared validation (server-side opinion for contract checks)

  async validateRemote(
    widget: WidgetDescriptor,
    raw: unknown,
    user?: string
  ): Promise<{ accept: boolean; reason?: string }> {
    return (await this.request("POST", "/api/validate", {
      widget,
      raw,
      user,
    })) as { accept: boolean; reason?: string };
  }
}
