import {
  ComparisonReportJson,
  DailyStateJson,
  DashboardPayload,
  DatasetJson,
  DeliveryJson,
  Envelope,
  JobJson,
  MergeResult,
  ProjectJson,
  RecordJson,
  SessionPayload,
  WorkingSetJson,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public detail: unknown = null,
  ) {
    super(message);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Thin /v1 gateway client.  Every payload the UI ever sees passes through
 * `unwrap`, which also appends it to `payloads` so tests can verify that no
 * displayed number was invented client-side. */
export class ApiClient {
  token: string | null = null;
  payloads: unknown[] = [];

  constructor(
    public baseUrl: string,
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    params?: Record<string, string>,
  ): Promise<T> {
    let url = this.baseUrl + path;
    if (params) url += "?" + new URLSearchParams(params).toString();
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    if (body !== undefined) headers["Content-Type"] = "application/json";
    const resp = await this.fetchFn(url, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const envelope = (await resp.json()) as Envelope<T>;
    if (!envelope.ok || envelope.error) {
      const err = envelope.error ?? {
        code: "unknown",
        message: `http ${resp.status}`,
        detail: null,
      };
      throw new ApiError(resp.status, err.code, err.message, err.detail);
    }
    this.payloads.push(envelope.data);
    return envelope.data as T;
  }

  async login(name: string, secret: string): Promise<SessionPayload> {
    const session = await this.request<SessionPayload>("POST", "/v1/sessions", {
      name,
      secret,
    });
    this.token = session.token;
    return session;
  }

  projects(): Promise<ProjectJson[]> {
    return this.request("GET", "/v1/projects");
  }

  dashboard(projectId: string): Promise<DashboardPayload> {
    return this.request("GET", `/v1/dashboard/${projectId}`);
  }

  datasets(projectId?: string): Promise<DatasetJson[]> {
    return this.request(
      "GET",
      "/v1/datasets",
      undefined,
      projectId ? { project_id: projectId } : undefined,
    );
  }

  records(datasetId: string): Promise<{ records: RecordJson[] }> {
    return this.request("GET", `/v1/datasets/${datasetId}/records`, undefined, {
      limit: "1000",
    });
  }

  createWorkingSet(pins: { dataset_id: string; version: number }[]): Promise<WorkingSetJson> {
    return this.request("POST", "/v1/working-sets", { pins });
  }

  wsRecords(wsId: string, datasetId: string): Promise<{ records: RecordJson[] }> {
    return this.request("GET", `/v1/working-sets/${wsId}/records`, undefined, {
      dataset_id: datasetId,
    });
  }

  merge(wsId: string, strategy = "abort_on_conflict"): Promise<MergeResult> {
    return this.request("POST", `/v1/working-sets/${wsId}/merge`, { strategy });
  }

  discard(wsId: string): Promise<{ ws_id: string; state: string }> {
    return this.request("DELETE", `/v1/working-sets/${wsId}`);
  }

  algorithms(): Promise<{ algo_id: string; name: string }[]> {
    return this.request("GET", "/v1/algorithms");
  }

  submitJob(spec: {
    algo_id: string;
    inputs: ({ kind: "dataset"; dataset_id: string; version: number } | { kind: "working_set"; ws_id: string })[];
    params: Record<string, string>;
  }): Promise<JobJson> {
    return this.request("POST", "/v1/jobs", spec);
  }

  job(jobId: string): Promise<JobJson> {
    return this.request("GET", `/v1/jobs/${jobId}`);
  }

  compare(
    baseline: DailyStateJson[],
    scenario: DailyStateJson[],
  ): Promise<ComparisonReportJson> {
    return this.request("POST", "/v1/models/watershed/compare", {
      baseline,
      scenario,
    });
  }

  subscribe(predicate: string): Promise<{ sub_id: string }> {
    return this.request("POST", "/v1/subscriptions", { predicate });
  }

  feed(since: number): Promise<DeliveryJson[]> {
    return this.request("GET", "/v1/events/feed", undefined, {
      since: String(since),
    });
  }
}
