export * from "./types.js";
export { validateValue, normalizeUserPath } from "./validate.js";
export type { ValidationResult } from "./validate.js";
export { ApiClient, ApiError } from "./api.js";
export type { ClientConfig } from "./api.js";
export {
  renderForm,
  setField,
  setExtentPart,
  canSubmit,
  rawValues,
} from "./form.js";
export type { FormModel, FormField, ControlKind } from "./form.js";
export { JobDashboard } from "./dashboard.js";
export type { DashboardView } from "./dashboard.js";
export { wrapperSignature, wrapperList, newEditor, publish } from "./scenarios.js";
export type { WrapperInfo, EditorState } from "./scenarios.js";
