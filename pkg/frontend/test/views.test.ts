import { describe, expect, it } from "vitest";

import { emptyForm, toScenarioJson, validateForm } from "../src/scenario.js";
import {
  renderDashboard,
  renderFeed,
  renderMapPane,
  renderReportCard,
} from "../src/views.js";
import { classifyDatasets, recordToState } from "../src/workbench.js";
import {
  ComparisonReportJson,
  DashboardPayload,
  DatasetJson,
  DeliveryJson,
} from "../src/types.js";

const region = { min_lon: -80, min_lat: 43, max_lon: -79, max_lat: 44 };

function dataset(name: string, fields: string[]): DatasetJson {
  return {
    dataset_id: `ds-${name}`,
    name,
    study_type: "discharge",
    schema: fields.map((f) => ({ name: f, kind: "float", required: true })),
    project_id: "p1",
    region,
    head_version: 2,
  };
}

describe("scenario form", () => {
  it("accepts efficiencies in [0, 1] and rejects the rest", () => {
    const form = emptyForm();
    form.efficiencies.push({ landUse: "crop", nutrient: "nitrogen", efficiency: 0.5 });
    expect(validateForm(form)).toEqual([]);
    form.efficiencies.push({ landUse: "crop", nutrient: "nitrogen", efficiency: 1.5 });
    expect(validateForm(form).length).toBe(1);
  });

  it("serializes to the job scenario parameter shape", () => {
    const form = emptyForm();
    form.efficiencies.push({ landUse: "crop", nutrient: "nitrogen", efficiency: 0.5 });
    form.cnDeltas["crop"] = -5;
    expect(JSON.parse(toScenarioJson(form))).toEqual({
      adjustments: [
        { land_use: "crop", nutrient: "nitrogen", removal_efficiency: 0.5 },
      ],
      cn_deltas: { crop: -5 },
    });
  });
});

describe("dataset classification", () => {
  it("picks roles by schema shape", () => {
    const roles = classifyDatasets([
      dataset("zz-scenario", ["runoff_mm"]),
      dataset("catchments", ["land_uses"]),
      dataset("weather", ["precip_mm"]),
      dataset("aa-baseline", ["runoff_mm"]),
    ]);
    expect(roles.catchment.name).toBe("catchments");
    expect(roles.weather.name).toBe("weather");
    expect(roles.baselineOut.name).toBe("aa-baseline");
    expect(roles.scenarioOut.name).toBe("zz-scenario");
  });

  it("throws when a role is missing", () => {
    expect(() => classifyDatasets([dataset("weather", ["precip_mm"])])).toThrow();
  });
});

describe("recordToState", () => {
  it("reshapes result records without touching numbers", () => {
    const state = recordToState({
      record_id: "2023-04-01T00:00:00Z",
      values: {
        date: "2023-04-01T00:00:00Z",
        runoff_mm: 1.25,
        et_mm: 2.0,
        percolation_mm: 0.5,
        soil_storage_mm: 30.75,
        nitrogen_kg: 4.5,
        phosphorus_kg: 0.125,
      },
      digest: "",
    });
    expect(state.runoff_mm).toBe(1.25);
    expect(state.loads_kg).toEqual({ nitrogen: 4.5, phosphorus: 0.125 });
  });
});

describe("views", () => {
  it("report card repeats payload numbers verbatim", () => {
    const report: ComparisonReportJson = {
      nutrient_totals_baseline: { nitrogen: 10.5 },
      nutrient_totals_scenario: { nitrogen: 5.25 },
      percent_reduction: { nitrogen: 0.5 },
      total_runoff_baseline_mm: 42.125,
      total_runoff_scenario_mm: 42.125,
      runoff_delta_mm: 0,
      daily_runoff_delta_mm: [],
      daily_load_delta_kg: {},
    };
    const html = renderReportCard(report);
    expect(html).toContain(">10.5<");
    expect(html).toContain(">5.25<");
    expect(html).toContain(">50.0000%<");
    expect(html).toContain(">42.125<");
  });

  it("dashboard shows counts, dataset rows and one bbox per dataset", () => {
    const summary: DashboardPayload = {
      project_id: "p1",
      datasets: 2,
      dataset_list: [dataset("a", ["x"]), dataset("b", ["y"])],
      working_sets_open: 1,
      jobs_by_state: { succeeded: 3 },
      latest_model_runs: [],
      recent_events: [],
    };
    const html = renderDashboard(summary);
    expect(html).toContain("datasets: 2");
    expect(html).toContain("open working sets: 1");
    expect(html).toContain("succeeded: 3");
    expect([...html.matchAll(/data-dataset-id=/g)].length).toBe(4); // rows + rects
    expect(renderMapPane([])).toContain("<svg");
  });

  it("escapes untrusted text", () => {
    const summary: DashboardPayload = {
      project_id: "<script>x</script>",
      datasets: 0,
      dataset_list: [],
      working_sets_open: 0,
      jobs_by_state: {},
      latest_model_runs: [],
      recent_events: [],
    };
    expect(renderDashboard(summary)).not.toContain("<script>");
  });

  it("feed renders entries keyed by event id with a badge", () => {
    const deliveries: DeliveryJson[] = [1, 2].map((id) => ({
      delivery_id: `del-${id}`,
      subscription_id: "sub-1",
      status: "delivered",
      event: {
        event_id: id,
        kind: "data_changed",
        attrs: {},
        occurred_at: "2023-06-01T00:00:00Z",
      },
    }));
    const html = renderFeed(deliveries, 2);
    expect([...html.matchAll(/data-event-id="(\d+)"/g)].map((m) => m[1])).toEqual([
      "1",
      "2",
    ]);
    expect(html).toContain('id="feed-badge">2<');
    expect(renderFeed(deliveries, 0)).not.toContain("feed-badge");
  });
});
