"""Daily water balance and nutrient loading for a catchment.

Runoff uses the SCS curve-number method per land use; a single soil
bucket takes the infiltrated remainder, evapotranspires at a fixed
coefficient of PET, and spills storage above capacity as percolation.
Dissolved nutrient loads are runoff volume times an export
concentration per land use, reduced by BMP removal efficiency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from datetime import datetime

from .canonical import canonical_timestamp
from .coretypes import FieldDef, GeoRegion, Record, Schema, new_id
from .errors import (
    EmptySeries,
    InvalidCatchment,
    SeriesMismatch,
    UnknownLandUse,
    ValidationFailed,
)

CN_MIN, CN_MAX = 30.0, 100.0

# 1 mm of runoff over 1 ha is 10 m^3 = 10,000 L; kg = L * mg/L * 1e-6,
# so load_kg = depth_mm * area_ha * conc_mg_per_L * 0.01.
MM_HA_MGL_TO_KG = 0.01


@dataclass(frozen=True)
class LandUse:
    use: str
    fraction: float
    curve_number: float
    export_concentration_mg_per_l: dict  # nutrient -> mg/L

    def to_json(self):
        return {
            "use": self.use,
            "fraction": self.fraction,
            "curve_number": self.curve_number,
            "export_concentration_mg_per_l": dict(self.export_concentration_mg_per_l),
        }


@dataclass(frozen=True)
class Catchment:
    catchment_id: str
    area_ha: float
    land_uses: tuple
    soil_capacity_mm: float
    et_coefficient: float
    region: GeoRegion

    def validate(self):
        if self.area_ha <= 0:
            raise InvalidCatchment("area_ha must be positive")
        if self.soil_capacity_mm <= 0:
            raise InvalidCatchment("soil_capacity_mm must be positive")
        if not 0.0 <= self.et_coefficient <= 1.0:
            raise InvalidCatchment("et_coefficient must be in [0, 1]")
        if not self.land_uses:
            raise InvalidCatchment("at least one land use required")
        total = sum(lu.fraction for lu in self.land_uses)
        if abs(total - 1.0) > 1e-9:
            raise InvalidCatchment(f"land-use fractions sum to {total}, expected 1")
        for lu in self.land_uses:
            if not CN_MIN <= lu.curve_number <= CN_MAX:
                raise InvalidCatchment(f"curve number {lu.curve_number} outside [{CN_MIN}, {CN_MAX}]")
            if lu.fraction < 0:
                raise InvalidCatchment("land-use fractions must be non-negative")
            for nutrient, conc in lu.export_concentration_mg_per_l.items():
                if conc < 0:
                    raise InvalidCatchment(f"negative concentration for {nutrient!r}")

    def nutrients(self):
        out = set()
        for lu in self.land_uses:
            out.update(lu.export_concentration_mg_per_l)
        return sorted(out)

    def to_json(self):
        return {
            "catchment_id": self.catchment_id,
            "area_ha": self.area_ha,
            "land_uses": [lu.to_json() for lu in self.land_uses],
            "soil_capacity_mm": self.soil_capacity_mm,
            "et_coefficient": self.et_coefficient,
            "region": self.region.to_json(),
        }

    @classmethod
    def from_json(cls, d) -> "Catchment":
        return cls(
            catchment_id=d["catchment_id"],
            area_ha=d["area_ha"],
            land_uses=tuple(
                LandUse(lu["use"], lu["fraction"], lu["curve_number"],
                        dict(lu["export_concentration_mg_per_l"]))
                for lu in d["land_uses"]
            ),
            soil_capacity_mm=d["soil_capacity_mm"],
            et_coefficient=d["et_coefficient"],
            region=GeoRegion.from_json(d["region"]),
        )


@dataclass(frozen=True)
class DailyWeather:
    date: datetime
    precip_mm: float
    pet_mm: float


@dataclass(frozen=True)
class DailyState:
    date: datetime
    runoff_mm: float
    et_mm: float
    percolation_mm: float
    soil_storage_mm: float
    loads_kg: dict  # nutrient -> kg

    def to_json(self):
        return {
            "date": canonical_timestamp(self.date),
            "runoff_mm": self.runoff_mm,
            "et_mm": self.et_mm,
            "percolation_mm": self.percolation_mm,
            "soil_storage_mm": self.soil_storage_mm,
            "loads_kg": dict(self.loads_kg),
        }


@dataclass(frozen=True)
class BmpAdjustment:
    land_use: str
    nutrient: str
    removal_efficiency: float

    def __post_init__(self):
        if not 0.0 <= self.removal_efficiency <= 1.0:
            raise ValidationFailed("removal efficiency must be in [0, 1]")


@dataclass(frozen=True)
class BmpScenario:
    adjustments: tuple = ()
    cn_deltas: dict = field(default_factory=dict)  # land use -> delta
    scenario_id: str = field(default_factory=lambda: new_id("bmp"))

    def to_json(self):
        return {
            "scenario_id": self.scenario_id,
            "adjustments": [
                {"land_use": a.land_use, "nutrient": a.nutrient,
                 "removal_efficiency": a.removal_efficiency}
                for a in self.adjustments
            ],
            "cn_deltas": dict(self.cn_deltas),
        }

    @classmethod
    def from_json(cls, d) -> "BmpScenario":
        return cls(
            adjustments=tuple(
                BmpAdjustment(a["land_use"], a["nutrient"], a["removal_efficiency"])
                for a in d.get("adjustments", ())
            ),
            cn_deltas=dict(d.get("cn_deltas", {})),
            scenario_id=d.get("scenario_id", new_id("bmp")),
        )


def curve_number_runoff(precip_mm: float, cn: float) -> float:
    """SCS runoff depth: S = 25400/CN - 254; Q = (P - 0.2 S)^2 / (P + 0.8 S)
    when P exceeds the initial abstraction 0.2 S, else zero."""
    s = 25400.0 / cn - 254.0
    ia = 0.2 * s
    if precip_mm <= ia:
        return 0.0
    return (precip_mm - ia) ** 2 / (precip_mm + 0.8 * s)


def apply_bmp(catchment: Catchment, scenario: BmpScenario) -> Catchment:
    """Adjusted copy; the original is untouched. Efficiency scales export
    concentrations by (1 - e); CN deltas are clamped to [30, 100]."""
    uses = {lu.use for lu in catchment.land_uses}
    for adj in scenario.adjustments:
        if adj.land_use not in uses:
            raise UnknownLandUse(f"no land use {adj.land_use!r} in catchment")
        lu = next(l for l in catchment.land_uses if l.use == adj.land_use)
        if adj.nutrient not in lu.export_concentration_mg_per_l:
            raise ValidationFailed(f"land use {adj.land_use!r} has no nutrient {adj.nutrient!r}")
    for use in scenario.cn_deltas:
        if use not in uses:
            raise UnknownLandUse(f"no land use {use!r} in catchment")
    adjusted = []
    for lu in catchment.land_uses:
        conc = dict(lu.export_concentration_mg_per_l)
        for adj in scenario.adjustments:
            if adj.land_use == lu.use:
                conc[adj.nutrient] = conc[adj.nutrient] * (1.0 - adj.removal_efficiency)
        cn = lu.curve_number + scenario.cn_deltas.get(lu.use, 0.0)
        cn = min(CN_MAX, max(CN_MIN, cn))
        adjusted.append(replace(lu, curve_number=cn, export_concentration_mg_per_l=conc))
    return replace(catchment, land_uses=tuple(adjusted))


def simulate(catchment: Catchment, weather, scenario: BmpScenario | None = None):
    """Run the daily balance over a weather series; returns DailyState
    per day in order. Pure and deterministic."""
    catchment.validate()
    weather = list(weather)
    if not weather:
        raise EmptySeries("weather series is empty")
    for i, w in enumerate(weather):
        if w.precip_mm < 0 or w.pet_mm < 0:
            raise ValidationFailed(f"negative forcing on {w.date}")
        if i and weather[i - 1].date >= w.date:
            raise ValidationFailed("weather dates must be strictly increasing")
    if scenario is not None:
        catchment = apply_bmp(catchment, scenario)

    nutrients = catchment.nutrients()
    storage = 0.0
    out = []
    for day in weather:
        p = day.precip_mm
        per_use_q = [curve_number_runoff(p, lu.curve_number) for lu in catchment.land_uses]
        runoff = sum(lu.fraction * q for lu, q in zip(catchment.land_uses, per_use_q))
        infiltration = p - runoff
        storage += infiltration
        et = min(catchment.et_coefficient * day.pet_mm, storage)
        storage -= et
        percolation = max(0.0, storage - catchment.soil_capacity_mm)
        storage -= percolation
        loads = {}
        for nutrient in nutrients:
            loads[nutrient] = sum(
                lu.fraction * q * catchment.area_ha
                * lu.export_concentration_mg_per_l.get(nutrient, 0.0)
                * MM_HA_MGL_TO_KG
                for lu, q in zip(catchment.land_uses, per_use_q)
            )
        out.append(DailyState(day.date, runoff, et, percolation, storage, loads))
    return out


@dataclass(frozen=True)
class ComparisonReport:
    nutrient_totals_baseline: dict
    nutrient_totals_scenario: dict
    percent_reduction: dict  # nutrient -> fraction in [0, 1], 0 when base is 0
    total_runoff_baseline_mm: float
    total_runoff_scenario_mm: float
    runoff_delta_mm: float
    daily_runoff_delta_mm: list
    daily_load_delta_kg: dict  # nutrient -> list

    def to_json(self):
        return {
            "nutrient_totals_baseline": self.nutrient_totals_baseline,
            "nutrient_totals_scenario": self.nutrient_totals_scenario,
            "percent_reduction": self.percent_reduction,
            "total_runoff_baseline_mm": self.total_runoff_baseline_mm,
            "total_runoff_scenario_mm": self.total_runoff_scenario_mm,
            "runoff_delta_mm": self.runoff_delta_mm,
            "daily_runoff_delta_mm": self.daily_runoff_delta_mm,
            "daily_load_delta_kg": self.daily_load_delta_kg,
        }


def compare(baseline, scenario) -> ComparisonReport:
    baseline = list(baseline)
    scenario = list(scenario)
    if len(baseline) != len(scenario):
        raise SeriesMismatch("series lengths differ")
    for b, s in zip(baseline, scenario):
        if b.date != s.date:
            raise SeriesMismatch(f"date mismatch: {b.date} vs {s.date}")
    nutrients = sorted({n for d in baseline + scenario for n in d.loads_kg})
    base_totals = {n: sum(d.loads_kg.get(n, 0.0) for d in baseline) for n in nutrients}
    scen_totals = {n: sum(d.loads_kg.get(n, 0.0) for d in scenario) for n in nutrients}
    reduction = {}
    for n in nutrients:
        base = base_totals[n]
        reduction[n] = 0.0 if base == 0 else (base - scen_totals[n]) / base
    base_runoff = sum(d.runoff_mm for d in baseline)
    scen_runoff = sum(d.runoff_mm for d in scenario)
    return ComparisonReport(
        nutrient_totals_baseline=base_totals,
        nutrient_totals_scenario=scen_totals,
        percent_reduction=reduction,
        total_runoff_baseline_mm=base_runoff,
        total_runoff_scenario_mm=scen_runoff,
        runoff_delta_mm=base_runoff - scen_runoff,
        daily_runoff_delta_mm=[b.runoff_mm - s.runoff_mm for b, s in zip(baseline, scenario)],
        daily_load_delta_kg={
            n: [b.loads_kg.get(n, 0.0) - s.loads_kg.get(n, 0.0)
                for b, s in zip(baseline, scenario)]
            for n in nutrients
        },
    )


# -- dataset schemas and record codecs ----------------------------------

WEATHER_SCHEMA = Schema((
    FieldDef("date", "timestamp"),
    FieldDef("precip_mm", "float"),
    FieldDef("pet_mm", "float"),
))

CATCHMENT_SCHEMA = Schema((
    FieldDef("catchment_id", "string"),
    FieldDef("area_ha", "float"),
    FieldDef("soil_capacity_mm", "float"),
    FieldDef("et_coefficient", "float"),
    FieldDef("land_uses", "string"),  # JSON-encoded land-use list
    FieldDef("min_lon", "float"),
    FieldDef("min_lat", "float"),
    FieldDef("max_lon", "float"),
    FieldDef("max_lat", "float"),
))


def result_schema(nutrients) -> Schema:
    fields = [
        FieldDef("date", "timestamp"),
        FieldDef("runoff_mm", "float"),
        FieldDef("et_mm", "float"),
        FieldDef("percolation_mm", "float"),
        FieldDef("soil_storage_mm", "float"),
    ]
    fields.extend(FieldDef(f"{n}_kg", "float") for n in sorted(nutrients))
    return Schema(tuple(fields))


def catchment_to_record(catchment: Catchment) -> Record:
    r = catchment.region
    return Record(catchment.catchment_id, {
        "catchment_id": catchment.catchment_id,
        "area_ha": float(catchment.area_ha),
        "soil_capacity_mm": float(catchment.soil_capacity_mm),
        "et_coefficient": float(catchment.et_coefficient),
        "land_uses": json.dumps([lu.to_json() for lu in catchment.land_uses], sort_keys=True),
        "min_lon": r.min_lon, "min_lat": r.min_lat,
        "max_lon": r.max_lon, "max_lat": r.max_lat,
    })


def catchment_from_record(record: Record) -> Catchment:
    v = record.values
    return Catchment(
        catchment_id=v["catchment_id"],
        area_ha=v["area_ha"],
        land_uses=tuple(
            LandUse(lu["use"], lu["fraction"], lu["curve_number"],
                    dict(lu["export_concentration_mg_per_l"]))
            for lu in json.loads(v["land_uses"])
        ),
        soil_capacity_mm=v["soil_capacity_mm"],
        et_coefficient=v["et_coefficient"],
        region=GeoRegion(v["min_lon"], v["min_lat"], v["max_lon"], v["max_lat"]),
    )


def weather_from_records(records):
    days = [DailyWeather(r.values["date"], float(r.values["precip_mm"]),
                         float(r.values["pet_mm"])) for r in records]
    days.sort(key=lambda d: d.date)
    return days


WATER_BALANCE_NAME = "water-balance"
WATER_BALANCE_VERSION = "1.0.0"

WATER_BALANCE_PARAMS = Schema((
    FieldDef("output_dataset_id", "string", required=True),
    FieldDef("scenario", "string", required=False),   # BmpScenario as JSON
    FieldDef("catchment_id", "string", required=False),
))


def water_balance_runner(ctx, io):
    """Job body for the registered model: reads the pinned catchment and
    weather datasets, simulates, writes the result dataset."""
    datasets = io.datasets()
    catchment_records = weather_records = None
    for records in datasets.values():
        if not records:
            continue
        fields = records[0].values.keys()
        if "land_uses" in fields:
            catchment_records = records
        elif "precip_mm" in fields:
            weather_records = records
    if catchment_records is None:
        raise InvalidCatchment("no pinned dataset holds catchment records")
    if weather_records is None:
        raise EmptySeries("no pinned dataset holds weather records")
    wanted = ctx.params.get("catchment_id")
    if wanted is not None:
        catchment_records = [r for r in catchment_records
                             if r.values["catchment_id"] == wanted]
        if not catchment_records:
            raise InvalidCatchment(f"no catchment {wanted!r} in pinned dataset")
    catchment = catchment_from_record(catchment_records[0])
    scenario = None
    if ctx.params.get("scenario"):
        scenario = BmpScenario.from_json(json.loads(ctx.params["scenario"]))
    ctx.check_cancelled()
    states = simulate(catchment, weather_from_records(weather_records), scenario)
    ctx.check_cancelled()
    io.write(ctx.params["output_dataset_id"], states_to_records(states))


def states_to_records(states):
    out = []
    for st in states:
        values = {
            "date": st.date,
            "runoff_mm": st.runoff_mm,
            "et_mm": st.et_mm,
            "percolation_mm": st.percolation_mm,
            "soil_storage_mm": st.soil_storage_mm,
        }
        for n, kg in st.loads_kg.items():
            values[f"{n}_kg"] = kg
        out.append(Record(canonical_timestamp(st.date), values))
    return out
