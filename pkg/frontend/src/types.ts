/** JSON payload shapes returned by the /v1 API. */

export interface ApiErrorBody {
  code: string;
  message: string;
  detail: unknown;
}

export interface Envelope<T> {
  ok: boolean;
  data?: T;
  error?: ApiErrorBody;
  request_id: string;
}

export interface SessionPayload {
  token: string;
  principal_id: string;
  expires_at: string;
}

export interface ProjectJson {
  project_id: string;
  name: string;
  created_by: string;
}

export interface RegionJson {
  min_lon: number;
  min_lat: number;
  max_lon: number;
  max_lat: number;
}

export interface SchemaFieldJson {
  name: string;
  kind: string;
  required: boolean;
}

export interface DatasetJson {
  dataset_id: string;
  name: string;
  study_type: string;
  schema: SchemaFieldJson[];
  project_id: string;
  region: RegionJson;
  head_version: number;
}

export interface DashboardPayload {
  project_id: string;
  datasets: number;
  dataset_list: DatasetJson[];
  working_sets_open: number;
  jobs_by_state: Record<string, number>;
  latest_model_runs: { dataset_id: string; job_id: string; ended_at: string }[];
  recent_events: EventJson[];
}

export interface RecordJson {
  record_id: string;
  values: Record<string, unknown>;
  digest: string;
}

export interface WorkingSetJson {
  ws_id: string;
  base: [string, number][];
  state: string;
  owner: string;
}

export interface JobJson {
  job_id: string;
  state: "queued" | "running" | "succeeded" | "failed" | "cancelled";
  backend: string | null;
  started_at: string | null;
  ended_at: string | null;
  error: string | null;
}

export interface EventJson {
  event_id: number;
  kind: string;
  attrs: Record<string, unknown>;
  occurred_at: string;
}

export interface DeliveryJson {
  delivery_id: string;
  event: EventJson;
  subscription_id: string;
  status: string;
}

/** Daily model state as the simulate/compare endpoints exchange it. */
export interface DailyStateJson {
  date: string;
  runoff_mm: number;
  et_mm: number;
  percolation_mm: number;
  soil_storage_mm: number;
  loads_kg: Record<string, number>;
}

export interface ComparisonReportJson {
  nutrient_totals_baseline: Record<string, number>;
  nutrient_totals_scenario: Record<string, number>;
  percent_reduction: Record<string, number>;
  total_runoff_baseline_mm: number;
  total_runoff_scenario_mm: number;
  runoff_delta_mm: number;
  daily_runoff_delta_mm: number[];
  daily_load_delta_kg: Record<string, number[]>;
}

export interface MergeResult {
  merged: boolean;
  conflicts: Record<string, string[]>;
  new_versions: Record<string, number>;
}
