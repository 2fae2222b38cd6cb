// Scenario editor model: source plus declared params, with the wrapper
// list (every callable service and its positional signature) at hand.

import { ApiError } from "./api.js";
import type { ApiClient } from "./api.js";
import type { BoundParam, ServiceDescriptor, ScriptErrorDoc } from "./types.js";

export interface WrapperInfo {
  name: string;
  signature: string; // e.g. "g_sum(first, second, result)"
  description: string;
}

// positional wrapper arguments: declared inputs, then one destination per
// file_save output
export function wrapperSignature(descriptor: ServiceDescriptor): string {
  const args = [
    ...descriptor.inputs.map((b) => b.identifier),
    ...descriptor.outputs
      .filter((b) => b.widget.kind === "file_save")
      .map((b) => b.identifier),
  ];
  return `${descriptor.wrapper_name}(${args.join(", ")})`;
}

export function wrapperList(services: ServiceDescriptor[]): WrapperInfo[] {
  return services
    .map((d) => ({
      name: d.wrapper_name,
      signature: wrapperSignature(d),
      description: d.description,
    }))
    .sort((a, b) => a.name.localeCompare(b.name));
}

export interface EditorState {
  name: string;
  description: string;
  wrapperName: string;
  entryFunction: string | null;
  source: string;
  inputs: BoundParam[];
  outputs: BoundParam[];
  // server-reported compile error, rendered at line/col in the editor
  scriptError: { reason: string; line: number; col: number } | null;
  otherError: string | null;
  published: ServiceDescriptor | null;
}

export function newEditor(): EditorState {
  return {
    name: "",
    description: "",
    wrapperName: "",
    entryFunction: null,
    source: "",
    inputs: [],
    outputs: [],
    scriptError: null,
    otherError: null,
    published: null,
  };
}

export async function publish(
  client: ApiClient,
  state: EditorState
): Promise<boolean> {
  state.scriptError = null;
  state.otherError = null;
  state.published = null;
  try {
    state.published = await client.publishScenario({
      name: state.name,
      description: state.description,
      wrapper_name: state.wrapperName,
      entry_function: state.entryFunction ?? undefined,
      inputs: state.inputs,
      outputs: state.outputs,
      source: state.source,
    });
    return true;
  } catch (err) {
    if (err instanceof ApiError && err.code === "script") {
      const doc = err.detail as ScriptErrorDoc;
      state.scriptError = { reason: doc.reason, line: doc.line, col: doc.col };
    } else if (err instanceof ApiError) {
      state.otherError = err.reason;
    } else {
      throw err;
    }
    return false;
  }
}
