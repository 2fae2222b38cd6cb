// Client-side validation against the shared contract table. The same table
// drives the server-side test suite; decisions must be identical.

import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { normalizeUserPath, validateValue } from "../src/validate.js";
import type { WidgetDescriptor, WidgetKind } from "../src/types.js";

interface ContractCase {
  widget: WidgetDescriptor;
  raw: unknown;
  accept: boolean;
}

interface ContractTable {
  files: string[];
  cases: ContractCase[];
}

const tablePath = fileURLToPath(
  new URL("../../fixtures/widget_validation.json", import.meta.url)
);
const table: ContractTable = JSON.parse(readFileSync(tablePath, "utf-8"));
const fileExists = (path: string) => table.files.includes(path);

const ALL_KINDS: WidgetKind[] = [
  "edit",
  "number",
  "checkbox",
  "rectangle",
  "file",
  "file_save",
  "select_table",
  "select_table_attr",
];

describe("shared validation contract", () => {
  it("covers every widget kind with at least 3 accepts and 3 rejects", () => {
    for (const kind of ALL_KINDS) {
      const cases = table.cases.filter((c) => c.widget.kind === kind);
      expect(cases.filter((c) => c.accept).length).toBeGreaterThanOrEqual(3);
      expect(cases.filter((c) => !c.accept).length).toBeGreaterThanOrEqual(3);
    }
  });

  it.each(
    table.cases.map((c, i) => [i, c.widget.kind, c.raw, c.accept, c] as const)
  )("case %i: %s raw=%j accept=%s", (_i, _kind, _raw, accept, c) => {
    const result = validateValue(c.widget, c.raw, fileExists);
    expect(result.accept).toBe(accept);
    if (!accept) expect(result.reason).toBeTruthy();
  });
});

describe("validateValue details", () => {
  it("rejects non-string raws for every kind", () => {
    for (const kind of ALL_KINDS) {
      for (const raw of [null, 7, true, ["x"], { a: 1 }]) {
        expect(validateValue({ kind }, raw).accept).toBe(false);
      }
    }
  });

  it("applies numeric bounds inclusively", () => {
    const widget: WidgetDescriptor = { kind: "number", min: 0, max: 10 };
    expect(validateValue(widget, "0").accept).toBe(true);
    expect(validateValue(widget, "10").accept).toBe(true);
    expect(validateValue(widget, "-0.001").accept).toBe(false);
    expect(validateValue(widget, "10.001").accept).toBe(false);
  });

  it("accepts scientific notation but not bare words", () => {
    expect(validateValue({ kind: "number" }, "2.5e-2").accept).toBe(true);
    expect(validateValue({ kind: "number" }, "Infinity").accept).toBe(false);
    expect(validateValue({ kind: "number" }, "NaN").accept).toBe(false);
  });

  it("treats rectangle WKT and csv forms alike", () => {
    expect(
      validateValue({ kind: "rectangle" }, "POLYGON((0 0, 4 0, 4 4, 0 4, 0 0))")
        .accept
    ).toBe(true);
    expect(validateValue({ kind: "rectangle" }, "0,0,4,4").accept).toBe(true);
    expect(validateValue({ kind: "rectangle" }, "5,0,4,4").accept).toBe(false);
  });
});

describe("normalizeUserPath", () => {
  it("collapses redundant segments", () => {
    expect(normalizeUserPath("./a//b/./c.txt")).toBe("a/b/c.txt");
  });

  it("rejects escapes and absolutes", () => {
    expect(normalizeUserPath("../up")).toBeNull();
    expect(normalizeUserPath("/abs")).toBeNull();
    expect(normalizeUserPath("c:/windows")).toBeNull();
    expect(normalizeUserPath("")).toBeNull();
  });
});
