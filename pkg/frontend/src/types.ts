// Wire types for the lab control plane. These mirror the JSON the server
// emits; the dashboard holds no state of its own beyond what it derives
// from these documents.

export interface EventRecord {
  seq: number;
  ts: string;
  project: string;
  stage: string | null;
  kind: string;
  payload: Record<string, any>;
  artifact_refs: string[];
}

export interface ProjectSummary {
  project_id: string;
  mode: string;
  stage: string | null;
  completed: boolean;
  paused: boolean;
  risk_flags: number;
}

export interface StateDoc {
  project_id: string;
  mode: string;
  prompt: string;
  current_stage: string | null;
  completed: boolean;
  paused: boolean;
  manuscript_ref: string | null;
  figure_refs: string[];
  journal_refs: string[];
  metrics_finalized: Record<string, number>;
  risk_flags: number;
  [key: string]: any;
}

export interface StateResponse {
  head_seq: number;
  state: StateDoc;
}

export type CommandAction = "run" | "pause" | "resume" | "rollback" | "inject";

export interface Command {
  action: CommandAction;
  target_seq?: number;
  stage?: string;
  instruction?: string;
  idempotency_key?: string;
}

export interface ArtifactMeta {
  kind: string;
  size?: number;
  parents: string[];
  lineage: string[];
  [key: string]: any;
}

export interface RadarSeries {
  system: string;
  values: number[];
}

export interface RadarExport {
  paper_id: string;
  dimensions: string[];
  series: RadarSeries[];
}

export interface EvalResponse {
  baseline: string;
  candidate: string;
  gains: Record<string, number>;
  radar: RadarExport[];
}
