/** Client-side scenario form model.  Validation mirrors the server's ranges:
 * removal efficiencies live in [0, 1] and curve-number deltas must keep the
 * adjusted CN inside [30, 100] (the server clamps; the form refuses). */

export interface EfficiencyRow {
  landUse: string;
  nutrient: string;
  efficiency: number;
}

export interface ScenarioForm {
  efficiencies: EfficiencyRow[];
  cnDeltas: Record<string, number>;
}

export function emptyForm(): ScenarioForm {
  return { efficiencies: [], cnDeltas: {} };
}

export function validateForm(form: ScenarioForm): string[] {
  const problems: string[] = [];
  for (const row of form.efficiencies) {
    if (!row.landUse) problems.push("efficiency row is missing a land use");
    if (!row.nutrient) problems.push("efficiency row is missing a nutrient");
    if (!Number.isFinite(row.efficiency) || row.efficiency < 0 || row.efficiency > 1) {
      problems.push(
        `removal efficiency for ${row.landUse}/${row.nutrient} must be in [0, 1]`,
      );
    }
  }
  for (const [use, delta] of Object.entries(form.cnDeltas)) {
    if (!Number.isFinite(delta) || Math.abs(delta) > 70) {
      problems.push(`curve-number delta for ${use} is out of range`);
    }
  }
  return problems;
}

/** Serialize the form to the JSON the water-balance job's `scenario`
 * parameter expects. */
export function toScenarioJson(form: ScenarioForm): string {
  return JSON.stringify({
    adjustments: form.efficiencies.map((row) => ({
      land_use: row.landUse,
      nutrient: row.nutrient,
      removal_efficiency: row.efficiency,
    })),
    cn_deltas: form.cnDeltas,
  });
}
