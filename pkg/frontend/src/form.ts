// Widget-generated execution forms. A FormModel is plain state the view
// layer renders; submit stays disabled until every field validates.

import { validateValue } from "./validate.js";
import type { BoundParam, ServiceDescriptor, WidgetKind } from "./types.js";

export type ControlKind =
  | "text"
  | "numeric"
  | "toggle"
  | "extent" // four numeric inputs: minx, miny, maxx, maxy
  | "file_picker"
  | "save_path"
  | "table_name"
  | "table_attr";

const CONTROL_FOR: Record<WidgetKind, ControlKind> = {
  edit: "text",
  number: "numeric",
  checkbox: "toggle",
  rectangle: "extent",
  file: "file_picker",
  file_save: "save_path",
  select_table: "table_name",
  select_table_attr: "table_attr",
};

export interface FormField {
  paramId: string;
  label: string;
  description: string;
  control: ControlKind;
  widget: BoundParam["widget"];
  direction: "in" | "out";
  required: boolean;
  raw: string;
  // extent fields edit four numeric parts that compose into `raw`
  extentParts?: [string, string, string, string];
  error: string | null;
  touched: boolean;
}

export interface FormModel {
  serviceId: string;
  fields: FormField[];
}

function fieldFor(bound: BoundParam, direction: "in" | "out"): FormField {
  return {
    paramId: bound.identifier,
    label: bound.human_name || bound.title || bound.identifier,
    description: bound.human_description ?? "",
    control: CONTROL_FOR[bound.widget.kind],
    widget: bound.widget,
    direction,
    required: direction === "in" ? (bound.min_occurs ?? 1) > 0 : true,
    raw: bound.widget.default ?? "",
    extentParts: bound.widget.kind === "rectangle" ? ["", "", "", ""] : undefined,
    error: null,
    touched: false,
  };
}

export function renderForm(descriptor: ServiceDescriptor): FormModel {
  return {
    serviceId: descriptor.local_id,
    fields: [
      ...descriptor.inputs.map((b) => fieldFor(b, "in")),
      ...descriptor.outputs.map((b) => fieldFor(b, "out")),
    ],
  };
}

function revalidate(field: FormField, fileExists?: (p: string) => boolean): void {
  if (!field.required && field.raw === "") {
    field.error = null;
    return;
  }
  const result = validateValue(field.widget, field.raw, fileExists);
  field.error = result.accept ? null : result.reason ?? "invalid value";
}

export function setField(
  model: FormModel,
  paramId: string,
  raw: string,
  fileExists?: (path: string) => boolean
): void {
  const field = model.fields.find((f) => f.paramId === paramId);
  if (!field) throw new Error(`no field ${paramId}`);
  field.raw = raw;
  field.touched = true;
  revalidate(field, fileExists);
}

export function setExtentPart(
  model: FormModel,
  paramId: string,
  part: 0 | 1 | 2 | 3,
  value: string
): void {
  const field = model.fields.find((f) => f.paramId === paramId);
  if (!field || !field.extentParts) throw new Error(`no extent field ${paramId}`);
  field.extentParts[part] = value;
  setField(model, paramId, field.extentParts.join(","));
}

export function canSubmit(
  model: FormModel,
  fileExists?: (path: string) => boolean
): boolean {
  for (const field of model.fields) {
    if (!field.required && field.raw === "") continue;
    if (!validateValue(field.widget, field.raw, fileExists).accept) return false;
  }
  return true;
}

// values payload for POST /api/executions; call only when canSubmit is true
export function rawValues(model: FormModel): Record<string, string> {
  const values: Record<string, string> = {};
  for (const field of model.fields) {
    if (field.raw !== "") values[field.paramId] = field.raw;
  }
  return values;
}
