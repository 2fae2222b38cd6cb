// Client-side mirror of the gateway's widget validation. The contract:
// for every case in the shared fixture table, this module and the server
// return the same accept/reject decision, and this module never accepts a
// value the server would reject.

import type { WidgetDescriptor } from "./types.js";

export interface ValidationResult {
  accept: boolean;
  reason?: string;
}

const IDENT_RE = /^[A-Za-z_][A-Za-z0-9_]*$/;
const TABLE_ATTR_RE = /^[A-Za-z_][A-Za-z0-9_]*\.[A-Za-z_][A-Za-z0-9_]*$/;
const POLYGON_RE = /^\s*POLYGON\s*\(\(\s*(.+?)\s*\)\)\s*$/i;
// strict decimal/scientific form; deliberately narrower than the server's
// parser (which also takes inf/nan spellings) so the client stays safe
const NUMBER_RE = /^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$/;

function reject(reason: string): ValidationResult {
  return { accept: false, reason };
}

const ACCEPT: ValidationResult = { accept: true };

function parseNumber(raw: string): number | null {
  const text = raw.trim();
  if (!NUMBER_RE.test(text)) return null;
  return Number(text);
}

export function normalizeUserPath(raw: string): string | null {
  if (!raw || raw.startsWith("/") || raw.startsWith("\\")) return null;
  if (raw.split("/")[0].includes(":")) return null;
  const parts: string[] = [];
  for (const part of raw.replace(/\\/g, "/").split("/")) {
    if (part === "" || part === ".") continue;
    if (part === "..") return null;
    parts.push(part);
  }
  if (parts.length === 0) return null;
  return parts.join("/");
}

function validateRectangle(raw: string): ValidationResult {
  const wkt = POLYGON_RE.exec(raw);
  if (raw.trim().toUpperCase().startsWith("POLYGON")) {
    if (!wkt) return reject("bad WKT POLYGON");
    const xs: number[] = [];
    for (const pair of wkt[1].split(",")) {
      const coords = pair.trim().split(/\s+/);
      if (coords.length !== 2) return reject("bad WKT vertex");
      const x = parseNumber(coords[0]);
      const y = parseNumber(coords[1]);
      if (x === null || y === null) return reject("non-numeric WKT vertex");
      xs.push(x, y);
    }
    return xs.length ? ACCEPT : reject("empty polygon");
  }
  const parts = raw.split(",").map((p) => p.trim());
  if (parts.length !== 4) return reject("rectangle needs minx,miny,maxx,maxy");
  const nums = parts.map(parseNumber);
  if (nums.some((n) => n === null)) return reject("non-numeric corner");
  const [minx, miny, maxx, maxy] = nums as number[];
  if (minx > maxx || miny > maxy) {
    return reject("rectangle min corner exceeds max corner");
  }
  return ACCEPT;
}

// fileExists checks a user-relative path; only the "file" widget needs it
export function validateValue(
  widget: WidgetDescriptor,
  raw: unknown,
  fileExists?: (path: string) => boolean
): ValidationResult {
  // form values arrive from JSON; anything but text is a type error
  if (typeof raw !== "string") {
    return reject(`${widget.kind}: expected text, got ${typeof raw}`);
  }
  switch (widget.kind) {
    case "edit":
      return ACCEPT;
    case "number": {
      const value = parseNumber(raw);
      if (value === null) return reject(`${raw} is not numeric`);
      if (widget.min != null && value < widget.min) {
        return reject(`${value} below minimum ${widget.min}`);
      }
      if (widget.max != null && value > widget.max) {
        return reject(`${value} above maximum ${widget.max}`);
      }
      return ACCEPT;
    }
    case "checkbox":
      return raw === "true" || raw === "false"
        ? ACCEPT
        : reject('expected "true" or "false"');
    case "rectangle":
      return validateRectangle(raw);
    case "file": {
      const path = normalizeUserPath(raw);
      if (path === null) return reject(`bad path ${raw}`);
      if (!fileExists || !fileExists(path)) {
        return reject(`${raw} not found in store`);
      }
      return ACCEPT;
    }
    case "file_save":
      return normalizeUserPath(raw) === null ? reject(`bad path ${raw}`) : ACCEPT;
    case "select_table":
      return IDENT_RE.test(raw) ? ACCEPT : reject(`bad table name ${raw}`);
    case "select_table_attr":
      return TABLE_ATTR_RE.test(raw)
        ? ACCEPT
        : reject(`expected table.attr, got ${raw}`);
    default:
      return reject(`unknown widget kind ${(widget as WidgetDescriptor).kind}`);
  }
}
