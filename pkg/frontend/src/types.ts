// Wire types mirroring the gateway's JSON responses.

export type WidgetKind =
  | "edit"
  | "number"
  | "checkbox"
  | "rectangle"
  | "file"
  | "file_save"
  | "select_table"
  | "select_table_attr";

export interface WidgetDescriptor {
  kind: WidgetKind;
  min?: number | null;
  max?: number | null;
  default?: string | null;
}

export interface DataTypeSpec {
  kind: "literal" | "complex" | "bbox";
  base?: string;
  mime?: string | null;
  encoding?: string | null;
  schema?: string | null;
  crs?: string;
}

export interface BoundParam {
  identifier: string;
  title: string;
  min_occurs?: number;
  max_occurs?: number;
  dtype: DataTypeSpec;
  widget: WidgetDescriptor;
  human_name: string;
  human_description: string;
}

export interface ServiceDescriptor {
  local_id: string;
  display_name: string;
  description: string;
  endpoint: string;
  remote_identifier: string;
  inputs: BoundParam[];
  outputs: BoundParam[];
  wrapper_name: string;
  kind: string;
}

export type ExecutionState = "accepted" | "started" | "succeeded" | "failed";

export interface StatusDoc {
  state: ExecutionState;
  percent?: number;
  message?: string;
  timestamp: string;
}

export interface ResultRecord {
  param_id: string;
  kind: "literal" | "file";
  value: string;
}

export interface ExecutionSnapshot {
  id: string;
  user: string;
  service_id: string;
  parent_id: string | null;
  status: StatusDoc;
  submitted_at: string;
  finished_at: string | null;
  results: ResultRecord[];
}

export interface LogEntry {
  timestamp: string;
  level: string;
  text: string;
}

export interface FileStat {
  path: string;
  size: number;
}

export interface ChainPair {
  producer: { process: string; param: string };
  consumer: { process: string; param: string };
}

export interface ScriptErrorDoc {
  error: "script";
  reason: string;
  line: number;
  col: number;
}
