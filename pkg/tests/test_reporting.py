import csv
from datetime import datetime, timedelta, timezone

from waterdesk.reporting import (
    render_comparison_figures,
    write_comparison_bundle,
    write_daily_series,
    write_report_card,
)
from waterdesk.watershed import (
    BmpAdjustment,
    BmpScenario,
    Catchment,
    DailyWeather,
    GeoRegion,
    LandUse,
    compare,
    simulate,
)


def series(scenario=None, days=30):
    c = Catchment(
        catchment_id="c1", area_ha=250.0,
        land_uses=(
            LandUse("crop", 0.6, 78.0, {"nitrogen": 4.0, "phosphorus": 0.4}),
            LandUse("forest", 0.4, 58.0, {"nitrogen": 1.0, "phosphorus": 0.05}),
        ),
        soil_capacity_mm=120.0, et_coefficient=0.8,
        region=GeoRegion(-80.0, 43.0, -79.0, 44.0),
    )
    start = datetime(2023, 4, 1, tzinfo=timezone.utc)
    weather = [DailyWeather(start + timedelta(days=i), 25.0 if i % 3 else 0.0, 2.5)
               for i in range(days)]
    return simulate(c, weather, scenario)


SCEN = BmpScenario(adjustments=(BmpAdjustment("crop", "nitrogen", 0.5),),
                   cn_deltas={"crop": -5.0})


def test_report_card_numbers_match_compare(tmp_path):
    base, scen = series(), series(SCEN)
    report = compare(base, scen)
    path = write_report_card(report, tmp_path)
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    by_nutrient = {r["nutrient"]: r for r in rows}
    for n in ("nitrogen", "phosphorus"):
        assert float(by_nutrient[n]["baseline_kg"]) == report.nutrient_totals_baseline[n]
        assert float(by_nutrient[n]["scenario_kg"]) == report.nutrient_totals_scenario[n]
        assert float(by_nutrient[n]["percent_reduction"]) == report.percent_reduction[n] * 100
    runoff = by_nutrient["runoff_mm"]
    assert float(runoff["baseline_kg"]) == report.total_runoff_baseline_mm


def test_daily_series_csv_shape(tmp_path):
    base = series()
    path = write_daily_series(base, tmp_path, "baseline")
    lines = path.read_text().strip().split("\n")
    assert lines[0] == ("date,runoff_mm,et_mm,percolation_mm,soil_storage_mm,"
                       "nitrogen_kg,phosphorus_kg")
    assert len(lines) == 1 + len(base)
    first = lines[1].split(",")
    assert first[0] == "2023-04-01T00:00:00Z"
    assert float(first[1]) == base[0].runoff_mm  # repr round-trips exactly


def test_figures_are_png_files(tmp_path):
    base, scen = series(), series(SCEN)
    paths = render_comparison_figures(base, scen, tmp_path)
    assert [p.name for p in paths] == ["daily_runoff.png", "nutrient_loads.png"]
    for p in paths:
        data = p.read_bytes()
        assert data[:8] == b"\x89PNG\r\n\x1a\n" and len(data) > 1000


def test_bundle_writes_everything(tmp_path):
    out = tmp_path / "bundle"
    paths = write_comparison_bundle(series(), series(SCEN), out)
    names = sorted(p.name for p in paths)
    assert names == ["baseline_daily.csv", "daily_runoff.png", "nutrient_loads.png",
                     "report_card.csv", "scenario_daily.csv"]
    assert all(p.exists() and p.stat().st_size > 0 for p in paths)
