import { ApiClient } from "./client.js";
import { ScenarioForm, toScenarioJson, validateForm } from "./scenario.js";
import {
  ComparisonReportJson,
  DailyStateJson,
  DatasetJson,
  JobJson,
  MergeResult,
  RecordJson,
  WorkingSetJson,
} from "./types.js";

export const JOB_POLL_MS = 1000;

const WATER_BALANCE = "water-balance";

export interface DatasetRoles {
  catchment: DatasetJson;
  weather: DatasetJson;
  baselineOut: DatasetJson;
  scenarioOut: DatasetJson;
}

function hasField(d: DatasetJson, field: string): boolean {
  return d.schema.some((f) => f.name === field);
}

/** Pick the datasets the workbench needs by schema shape: the catchment table
 * carries `land_uses`, weather carries `precip_mm`, and the two result
 * datasets carry `runoff_mm` (baseline sorts before scenario by name). */
export function classifyDatasets(datasets: DatasetJson[]): DatasetRoles {
  const catchment = datasets.find((d) => hasField(d, "land_uses"));
  const weather = datasets.find((d) => hasField(d, "precip_mm"));
  const outputs = datasets
    .filter((d) => hasField(d, "runoff_mm"))
    .sort((a, b) => a.name.localeCompare(b.name));
  if (!catchment || !weather || outputs.length < 2) {
    throw new Error(
      "project needs a catchment dataset, a weather dataset and two result datasets",
    );
  }
  return { catchment, weather, baselineOut: outputs[0], scenarioOut: outputs[1] };
}

/** Restructure a result record into the daily-state JSON the compare endpoint
 * accepts.  Pure reshaping — every number is carried through untouched. */
export function recordToState(record: RecordJson): DailyStateJson {
  const loads: Record<string, number> = {};
  for (const [key, value] of Object.entries(record.values)) {
    if (key.endsWith("_kg")) loads[key.slice(0, -3)] = value as number;
  }
  return {
    date: record.values["date"] as string,
    runoff_mm: record.values["runoff_mm"] as number,
    et_mm: record.values["et_mm"] as number,
    percolation_mm: record.values["percolation_mm"] as number,
    soil_storage_mm: record.values["soil_storage_mm"] as number,
    loads_kg: loads,
  };
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

export interface ComparisonOutcome {
  baseline: DailyStateJson[];
  scenario: DailyStateJson[];
  report: ComparisonReportJson;
}

/** Drives one what-if loop: working set → two model runs inside it →
 * server-side comparison → merge or discard. */
export class WorkbenchController {
  ws: WorkingSetJson | null = null;
  roles: DatasetRoles | null = null;
  lastJob: JobJson | null = null;

  constructor(
    private client: ApiClient,
    private pollMs: number = JOB_POLL_MS,
  ) {}

  async open(projectId: string): Promise<WorkingSetJson> {
    const datasets = await this.client.datasets(projectId);
    this.roles = classifyDatasets(datasets);
    const pins = [
      this.roles.catchment,
      this.roles.weather,
      this.roles.baselineOut,
      this.roles.scenarioOut,
    ].map((d) => ({ dataset_id: d.dataset_id, version: d.head_version }));
    this.ws = await this.client.createWorkingSet(pins);
    return this.ws;
  }

  private async waterBalanceId(): Promise<string> {
    const algos = await this.client.algorithms();
    const entry = algos.find((a) => a.name === WATER_BALANCE);
    if (!entry) throw new Error(`algorithm ${WATER_BALANCE} is not installed`);
    return entry.algo_id;
  }

  private async runJob(
    algoId: string,
    outputDatasetId: string,
    scenarioJson?: string,
  ): Promise<JobJson> {
    if (!this.ws) throw new Error("no working set is open");
    const params: Record<string, string> = { output_dataset_id: outputDatasetId };
    if (scenarioJson !== undefined) params["scenario"] = scenarioJson;
    let job = await this.client.submitJob({
      algo_id: algoId,
      inputs: [{ kind: "working_set", ws_id: this.ws.ws_id }],
      params,
    });
    while (job.state === "queued" || job.state === "running") {
      await sleep(this.pollMs);
      job = await this.client.job(job.job_id);
    }
    this.lastJob = job;
    if (job.state !== "succeeded") {
      throw new Error(`model run ${job.job_id} ${job.state}: ${job.error ?? ""}`);
    }
    return job;
  }

  private async wsStates(datasetId: string): Promise<DailyStateJson[]> {
    if (!this.ws) throw new Error("no working set is open");
    const { records } = await this.client.wsRecords(this.ws.ws_id, datasetId);
    return records
      .slice()
      .sort((a, b) => a.record_id.localeCompare(b.record_id))
      .map(recordToState);
  }

  /** Baseline run, scenario run, then server-side report card. */
  async runComparison(form: ScenarioForm): Promise<ComparisonOutcome> {
    const problems = validateForm(form);
    if (problems.length > 0) throw new Error(problems.join("; "));
    if (!this.ws || !this.roles) throw new Error("no working set is open");
    const algoId = await this.waterBalanceId();
    await this.runJob(algoId, this.roles.baselineOut.dataset_id);
    await this.runJob(algoId, this.roles.scenarioOut.dataset_id, toScenarioJson(form));
    const baseline = await this.wsStates(this.roles.baselineOut.dataset_id);
    const scenario = await this.wsStates(this.roles.scenarioOut.dataset_id);
    const report = await this.client.compare(baseline, scenario);
    return { baseline, scenario, report };
  }

  async merge(strategy = "abort_on_conflict"): Promise<MergeResult> {
    if (!this.ws) throw new Error("no working set is open");
    const result = await this.client.merge(this.ws.ws_id, strategy);
    this.ws = null;
    this.roles = null;
    return result;
  }

  async discard(): Promise<void> {
    if (!this.ws) throw new Error("no working set is open");
    await this.client.discard(this.ws.ws_id);
    this.ws = null;
    this.roles = null;
    this.lastJob = null;
  }
}
