import {
  ComparisonReportJson,
  DailyStateJson,
  DashboardPayload,
  DatasetJson,
  DeliveryJson,
  JobJson,
} from "./types.js";

/** All views render to HTML strings; `app.ts` mounts them.  Every number that
 * appears in the markup is read verbatim from an API payload — the renderers
 * format, they never compute. */

function esc(text: unknown): string {
  return String(text)
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderLogin(error?: string): string {
  const banner = error ? `<p class="error">${esc(error)}</p>` : "";
  return `
<section id="login">
  <h1>Sign in</h1>
  ${banner}
  <form id="login-form">
    <label>Name <input name="name" autocomplete="username"></label>
    <label>Secret <input name="secret" type="password"></label>
    <button type="submit">Sign in</button>
  </form>
</section>`;
}

/** Bounding boxes only: each dataset region becomes one rect in a shared
 * lon/lat viewBox.  No tile server. */
export function renderMapPane(datasets: DatasetJson[]): string {
  if (datasets.length === 0) return `<svg id="map-pane" viewBox="0 0 1 1"></svg>`;
  const lons = datasets.flatMap((d) => [d.region.min_lon, d.region.max_lon]);
  const lats = datasets.flatMap((d) => [d.region.min_lat, d.region.max_lat]);
  const minLon = Math.min(...lons);
  const maxLon = Math.max(...lons);
  const minLat = Math.min(...lats);
  const maxLat = Math.max(...lats);
  const w = maxLon - minLon || 1;
  const h = maxLat - minLat || 1;
  const rects = datasets
    .map((d) => {
      const x = d.region.min_lon - minLon;
      // SVG y grows downward; latitude grows upward
      const y = maxLat - d.region.max_lat;
      const rw = d.region.max_lon - d.region.min_lon || w * 0.01;
      const rh = d.region.max_lat - d.region.min_lat || h * 0.01;
      return `<rect data-dataset-id="${esc(d.dataset_id)}" x="${x}" y="${y}" width="${rw}" height="${rh}"><title>${esc(d.name)}</title></rect>`;
    })
    .join("\n    ");
  return `<svg id="map-pane" viewBox="0 0 ${w} ${h}" preserveAspectRatio="xMidYMid meet">
    ${rects}
  </svg>`;
}

export function renderDashboard(summary: DashboardPayload): string {
  const rows = summary.dataset_list
    .map(
      (d) => `<tr data-dataset-id="${esc(d.dataset_id)}">
      <td>${esc(d.name)}</td><td>${esc(d.study_type)}</td><td>${d.head_version}</td>
    </tr>`,
    )
    .join("\n    ");
  const jobs = Object.entries(summary.jobs_by_state)
    .map(([state, n]) => `<li>${esc(state)}: ${n}</li>`)
    .join("\n    ");
  return `
<section id="dashboard">
  <h1>Project ${esc(summary.project_id)}</h1>
  <ul class="counts">
    <li>datasets: ${summary.datasets}</li>
    <li>open working sets: ${summary.working_sets_open}</li>
    ${jobs}
  </ul>
  <table id="dataset-table">
    <thead><tr><th>name</th><th>study type</th><th>head</th></tr></thead>
    <tbody>
    ${rows}
    </tbody>
  </table>
  ${renderMapPane(summary.dataset_list)}
</section>`;
}

export function renderJobStatus(job: JobJson): string {
  const error = job.error ? ` — ${esc(job.error)}` : "";
  return `<p id="job-status" data-state="${esc(job.state)}">job ${esc(job.job_id)}: ${esc(job.state)}${error}</p>`;
}

/** Totals + percent-reduction table.  Percentages are the API's fractions
 * scaled for display, nothing more. */
export function renderReportCard(report: ComparisonReportJson): string {
  const nutrients = Object.keys(report.percent_reduction).sort();
  const rows = nutrients
    .map(
      (n) => `<tr data-nutrient="${esc(n)}">
      <td>${esc(n)}</td>
      <td data-cell="baseline">${report.nutrient_totals_baseline[n]}</td>
      <td data-cell="scenario">${report.nutrient_totals_scenario[n]}</td>
      <td data-cell="reduction">${(report.percent_reduction[n] * 100).toFixed(4)}%</td>
    </tr>`,
    )
    .join("\n    ");
  return `
<table id="report-card">
  <thead><tr><th>nutrient</th><th>baseline (kg)</th><th>scenario (kg)</th><th>reduction</th></tr></thead>
  <tbody>
    ${rows}
    <tr data-nutrient="runoff_mm">
      <td>runoff (mm)</td>
      <td data-cell="baseline">${report.total_runoff_baseline_mm}</td>
      <td data-cell="scenario">${report.total_runoff_scenario_mm}</td>
      <td data-cell="reduction">${report.runoff_delta_mm}</td>
    </tr>
  </tbody>
</table>`;
}

function polyline(values: number[], width: number, height: number, cls: string): string {
  const peak = Math.max(...values, 1e-9);
  const step = values.length > 1 ? width / (values.length - 1) : width;
  const points = values
    .map((v, i) => `${(i * step).toFixed(2)},${(height - (v / peak) * height).toFixed(2)}`)
    .join(" ");
  return `<polyline class="${cls}" fill="none" points="${points}"/>`;
}

/** Baseline-vs-scenario charts of daily runoff and per-nutrient loads. */
export function renderCharts(
  baseline: DailyStateJson[],
  scenario: DailyStateJson[],
): string {
  const w = 320;
  const h = 120;
  const runoff = `<svg class="chart" id="chart-runoff" viewBox="0 0 ${w} ${h}">
    ${polyline(baseline.map((s) => s.runoff_mm), w, h, "baseline")}
    ${polyline(scenario.map((s) => s.runoff_mm), w, h, "scenario")}
  </svg>`;
  const nutrients = baseline.length ? Object.keys(baseline[0].loads_kg).sort() : [];
  const loads = nutrients
    .map(
      (n) => `<figure><figcaption>${esc(n)}</figcaption>
  <svg class="chart" id="chart-load-${esc(n)}" viewBox="0 0 ${w} ${h}">
    ${polyline(baseline.map((s) => s.loads_kg[n]), w, h, "baseline")}
    ${polyline(scenario.map((s) => s.loads_kg[n]), w, h, "scenario")}
  </svg></figure>`,
    )
    .join("\n");
  return `<div id="charts">${runoff}\n${loads}</div>`;
}

/** Feed entries, newest last, keyed by event id so nothing renders twice. */
export function renderFeed(deliveries: DeliveryJson[], badge: number): string {
  const items = deliveries
    .map(
      (d) => `<li data-event-id="${d.event.event_id}">
      <span class="kind">${esc(d.event.kind)}</span>
      <time>${esc(d.event.occurred_at)}</time>
    </li>`,
    )
    .join("\n    ");
  const badgeHtml = badge > 0 ? `<span id="feed-badge">${badge}</span>` : "";
  return `
<section id="feed">
  <h2>Notifications ${badgeHtml}</h2>
  <ol id="feed-list">
    ${items}
  </ol>
</section>`;
}
