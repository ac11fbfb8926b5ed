import { ApiClient, ApiError } from "./client.js";
import { FeedPoller } from "./feed.js";
import { emptyForm, ScenarioForm } from "./scenario.js";
import {
  renderCharts,
  renderDashboard,
  renderFeed,
  renderJobStatus,
  renderLogin,
  renderReportCard,
} from "./views.js";
import { WorkbenchController } from "./workbench.js";

/** Browser entry point.  One base-URL setting; everything else comes from
 * the /v1 API. */

const BASE_URL =
  (document.querySelector("meta[name=api-base]") as HTMLMetaElement | null)
    ?.content ?? "";

const client = new ApiClient(BASE_URL);
const workbench = new WorkbenchController(client);
const feed = new FeedPoller(client);

const root = () => document.getElementById("app")!;
const feedRoot = () => document.getElementById("feed-root")!;

function showError(err: unknown): void {
  const box = document.getElementById("error-box");
  if (!box) return;
  if (err instanceof ApiError) {
    box.textContent = `${err.code}: ${err.message}`;
    if (err.status === 401) showLogin("session expired — sign in again");
  } else {
    box.textContent = String(err);
  }
}

function showLogin(error?: string): void {
  feed.stop();
  root().innerHTML = renderLogin(error);
  const form = document.getElementById("login-form") as HTMLFormElement;
  form.addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const data = new FormData(form);
    try {
      await client.login(String(data.get("name")), String(data.get("secret")));
      await showDashboard();
    } catch (err) {
      showLogin(err instanceof ApiError ? err.message : String(err));
    }
  });
}

async function showDashboard(): Promise<void> {
  const projects = await client.projects();
  if (projects.length === 0) {
    root().innerHTML = "<p>No projects visible to this account.</p>";
    return;
  }
  const summary = await client.dashboard(projects[0].project_id);
  root().innerHTML =
    renderDashboard(summary) +
    `<button id="open-workbench">Open scenario workbench</button>`;
  document
    .getElementById("open-workbench")!
    .addEventListener("click", () => showWorkbench(summary.project_id));
  feed.start(() => {
    feedRoot().innerHTML = renderFeed(feed.entries(), feed.badge());
  });
}

function readScenarioForm(): ScenarioForm {
  const form = emptyForm();
  for (const row of document.querySelectorAll<HTMLElement>(".efficiency-row")) {
    const landUse = (row.querySelector(".land-use") as HTMLInputElement).value;
    const nutrient = (row.querySelector(".nutrient") as HTMLInputElement).value;
    const efficiency = Number(
      (row.querySelector(".efficiency") as HTMLInputElement).value,
    );
    if (landUse || nutrient) form.efficiencies.push({ landUse, nutrient, efficiency });
  }
  return form;
}

async function showWorkbench(projectId: string): Promise<void> {
  try {
    await workbench.open(projectId);
  } catch (err) {
    showError(err);
    return;
  }
  root().innerHTML = `
<section id="workbench">
  <h1>Scenario workbench</h1>
  <div id="error-box" class="error"></div>
  <div id="scenario-form">
    <div class="efficiency-row">
      <input class="land-use" placeholder="land use">
      <input class="nutrient" placeholder="nutrient">
      <input class="efficiency" type="number" min="0" max="1" step="0.05" value="0.5">
    </div>
  </div>
  <button id="run">Run comparison</button>
  <div id="job-root"></div>
  <div id="results"></div>
  <button id="merge" disabled>Merge</button>
  <button id="discard">Discard</button>
</section>`;
  const results = () => document.getElementById("results")!;
  document.getElementById("run")!.addEventListener("click", async () => {
    try {
      const outcome = await workbench.runComparison(readScenarioForm());
      if (workbench.lastJob) {
        document.getElementById("job-root")!.innerHTML = renderJobStatus(
          workbench.lastJob,
        );
      }
      results().innerHTML =
        renderCharts(outcome.baseline, outcome.scenario) +
        renderReportCard(outcome.report);
      (document.getElementById("merge") as HTMLButtonElement).disabled = false;
    } catch (err) {
      showError(err);
    }
  });
  document.getElementById("merge")!.addEventListener("click", async () => {
    try {
      await workbench.merge();
      await showDashboard();
    } catch (err) {
      showError(err);
    }
  });
  document.getElementById("discard")!.addEventListener("click", async () => {
    try {
      await workbench.discard();
      await showDashboard();
    } catch (err) {
      showError(err);
    }
  });
}

window.addEventListener("DOMContentLoaded", () => {
  showLogin();
});
