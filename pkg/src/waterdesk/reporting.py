"""Report rendering: delimited report cards plus matplotlib figures.

Used by the CLI's model commands; everything is written to a target
directory so scripted runs leave a browsable artifact trail.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .watershed import ComparisonReport, compare  # noqa: E402


def write_report_card(report: ComparisonReport, out_dir: Path) -> Path:
    path = out_dir / "report_card.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["nutrient", "baseline_kg", "scenario_kg", "percent_reduction"])
        for n in sorted(report.nutrient_totals_baseline):
            w.writerow([
                n,
                repr(report.nutrient_totals_baseline[n]),
                repr(report.nutrient_totals_scenario[n]),
                repr(report.percent_reduction[n] * 100.0),
            ])
        w.writerow(["runoff_mm",
                    repr(report.total_runoff_baseline_mm),
                    repr(report.total_runoff_scenario_mm),
                    ""])
    return path


def write_daily_series(states, out_dir: Path, name: str) -> Path:
    path = out_dir / f"{name}_daily.csv"
    nutrients = sorted({n for s in states for n in s.loads_kg})
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "runoff_mm", "et_mm", "percolation_mm", "soil_storage_mm"]
                   + [f"{n}_kg" for n in nutrients])
        for s in states:
            w.writerow([s.to_json()["date"], repr(s.runoff_mm), repr(s.et_mm),
                        repr(s.percolation_mm), repr(s.soil_storage_mm)]
                       + [repr(s.loads_kg.get(n, 0.0)) for n in nutrients])
    return path


def render_comparison_figures(baseline, scenario, out_dir: Path) -> list:
    """Daily-runoff line chart and nutrient-total bars, baseline vs
    scenario. Returns the written paths."""
    written = []
    dates = [s.date for s in baseline]

    fig, ax = plt.subplots(figsize=(9, 4))
    ax.plot(dates, [s.runoff_mm for s in baseline], label="baseline", lw=1.2)
    ax.plot(dates, [s.runoff_mm for s in scenario], label="scenario", lw=1.2)
    ax.set_ylabel("runoff (mm)")
    ax.set_title("Daily runoff")
    ax.legend()
    fig.autofmt_xdate()
    path = out_dir / "daily_runoff.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    report = compare(baseline, scenario)
    nutrients = sorted(report.nutrient_totals_baseline)
    if nutrients:
        fig, ax = plt.subplots(figsize=(7, 4))
        xs = range(len(nutrients))
        width = 0.38
        ax.bar([x - width / 2 for x in xs],
               [report.nutrient_totals_baseline[n] for n in nutrients],
               width, label="baseline")
        ax.bar([x + width / 2 for x in xs],
               [report.nutrient_totals_scenario[n] for n in nutrients],
               width, label="scenario")
        ax.set_xticks(list(xs))
        ax.set_xticklabels(nutrients)
        ax.set_ylabel("load (kg)")
        ax.set_title("Nutrient loads")
        ax.legend()
        path = out_dir / "nutrient_loads.png"
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    return written


def write_comparison_bundle(baseline, scenario, out_dir) -> list:
    """Report card + per-series CSVs + figures; returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = compare(baseline, scenario)
    written = [
        write_report_card(report, out_dir),
        write_daily_series(baseline, out_dir, "baseline"),
        write_daily_series(scenario, out_dir, "scenario"),
    ]
    written.extend(render_comparison_figures(baseline, scenario, out_dir))
    return written
