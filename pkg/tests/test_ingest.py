import random

import pytest

from conftest import make_dataset
from waterdesk.coretypes import FieldDef, Schema
from waterdesk.errors import (
    FetchFailed,
    UnknownDataset,
    UnmappedRequiredField,
    ValidationFailed,
)
from waterdesk.ingest import FieldMapping, SourceDescriptor, generate_plan

TEMP_SCHEMA = Schema((
    FieldDef("site", "string"),
    FieldDef("date", "timestamp"),
    FieldDef("temp_c", "float"),
))


def temp_source(dataset_id, uri, fmt="csv"):
    return SourceDescriptor(
        uri=str(uri),
        format=fmt,
        field_map=(
            FieldMapping("site", "site", "trim"),
            FieldMapping("date", "date", "parse_timestamp", "%Y-%m-%d"),
            FieldMapping("temp_c", "temp_c", "to_float"),
        ),
        key_fields=("site", "date"),
        target_dataset_id=dataset_id,
    )


def write_csv(tmp_path, rows, name="data.csv"):
    path = tmp_path / name
    lines = ["site,date,temp_c"] + rows
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def temp_dataset(platform, admin, project):
    return make_dataset(platform, admin, project, name="stream-temps",
                        study_type="discharge", schema=TEMP_SCHEMA)


def test_register_source(platform, admin, temp_dataset, tmp_path):
    src = temp_source(temp_dataset.dataset_id, write_csv(tmp_path, []))
    sid = platform.register_source(src, admin)
    assert any(s.source_id == sid for s in platform.list_sources(admin))


def test_register_source_unmapped_required(platform, admin, temp_dataset, tmp_path):
    src = SourceDescriptor(
        uri=str(tmp_path / "x.csv"), format="csv",
        field_map=(FieldMapping("site", "site"),
                   FieldMapping("temp_c", "temp_c", "to_float")),
        key_fields=("site",), target_dataset_id=temp_dataset.dataset_id)
    with pytest.raises(UnmappedRequiredField) as exc:
        platform.register_source(src, admin)
    assert exc.value.detail == {"field": "date"}


def test_register_source_empty_key_fields(temp_dataset, tmp_path):
    with pytest.raises(ValidationFailed):
        SourceDescriptor(uri=str(tmp_path), format="csv",
                         field_map=(FieldMapping("site", "site"),),
                         key_fields=(), target_dataset_id=temp_dataset.dataset_id)


def test_register_source_unknown_dataset(platform, admin, tmp_path):
    src = temp_source("ds-missing", tmp_path / "x.csv")
    with pytest.raises(UnknownDataset):
        platform.register_source(src, admin)


def test_plan_has_six_canonical_steps(platform, admin, temp_dataset, tmp_path):
    src = temp_source(temp_dataset.dataset_id, write_csv(tmp_path, []))
    platform.register_source(src, admin)
    plan = platform.generate_plan(src.source_id)
    assert [s["step"] for s in plan.steps] == [
        "fetch", "parse", "map", "validate", "dedup", "upsert"]
    assert plan.steps[1]["format"] == "csv"


def test_plan_deterministic_apart_from_ids(platform, admin, temp_dataset, tmp_path):
    src = temp_source(temp_dataset.dataset_id, write_csv(tmp_path, []))
    platform.register_source(src, admin)
    a = platform.generate_plan(src.source_id).to_json()
    b = platform.generate_plan(src.source_id).to_json()
    for k in ("plan_id", "generated_at"):
        a.pop(k), b.pop(k)
    assert a == b


def test_jsonlines_plan(platform, admin, temp_dataset, tmp_path):
    src = temp_source(temp_dataset.dataset_id, tmp_path / "x.jsonl", fmt="json-lines")
    platform.register_source(src, admin)
    plan = platform.generate_plan(src.source_id)
    assert plan.steps[1]["format"] == "json-lines"


def test_unknown_source(platform):
    from waterdesk.errors import UnknownSource

    with pytest.raises(UnknownSource):
        platform.generate_plan("src-missing")


def rows_for(n):
    return [f"s{i},2023-01-{(i % 28) + 1:02d},{10 + i}.5" for i in range(n)]


def run(platform, admin, src):
    plan = platform.generate_plan(src.source_id)
    return platform.run_import(plan.plan_id, admin)


def test_fresh_import_then_idempotent_rerun(platform, admin, temp_dataset, tmp_path):
    src = temp_source(temp_dataset.dataset_id, write_csv(tmp_path, rows_for(10)))
    platform.register_source(src, admin)
    first = run(platform, admin, src)
    assert (first.fetched, first.inserted, first.new_version) == (10, 10, 2)
    second = run(platform, admin, src)
    assert second.fetched == 10
    assert (second.inserted, second.updated) == (0, 0)
    assert second.unchanged == 10
    assert second.new_version is None


def test_bad_row_quarantined(platform, admin, temp_dataset, tmp_path):
    rows = rows_for(3)
    rows.insert(1, "sX,2023-02-01,abc")  # temp_c not parseable under to_float
    src = temp_source(temp_dataset.dataset_id, write_csv(tmp_path, rows))
    platform.register_source(src, admin)
    report = run(platform, admin, src)
    assert report.inserted == 3
    assert [r for r, _ in report.rejected] == [2]
    assert "temp_c" in report.rejected[0][1]


def test_update_counts(platform, admin, temp_dataset, tmp_path):
    src = temp_source(temp_dataset.dataset_id, write_csv(tmp_path, rows_for(4)))
    platform.register_source(src, admin)
    run(platform, admin, src)
    # change one temperature, keep keys
    rows = rows_for(4)
    rows[0] = "s0,2023-01-01,99.9"
    write_csv(tmp_path, rows)
    report = run(platform, admin, src)
    assert (report.inserted, report.updated, report.unchanged) == (0, 1, 3)
    assert report.new_version == 3


def test_fetch_failure_aborts(platform, admin, temp_dataset, tmp_path):
    src = temp_source(temp_dataset.dataset_id, tmp_path / "missing.csv")
    platform.register_source(src, admin)
    plan = platform.generate_plan(src.source_id)
    with pytest.raises(FetchFailed):
        platform.run_import(plan.plan_id, admin)


def test_export_empty_csv_header_only(platform, admin, temp_dataset):
    data = platform.export_dataset(temp_dataset.dataset_id, "head", "csv", admin)
    assert data.decode() == "site,date,temp_c\n"


def test_export_line_count(platform, admin, temp_dataset, tmp_path):
    src = temp_source(temp_dataset.dataset_id, write_csv(tmp_path, rows_for(10)))
    platform.register_source(src, admin)
    run(platform, admin, src)
    data = platform.export_dataset(temp_dataset.dataset_id, "head", "csv", admin)
    assert len(data.decode().strip().split("\n")) == 11


def test_export_import_round_trip_all_unchanged(platform, admin, project,
                                                temp_dataset, tmp_path):
    src = temp_source(temp_dataset.dataset_id, write_csv(tmp_path, rows_for(10)))
    platform.register_source(src, admin)
    run(platform, admin, src)
    exported = platform.export_dataset(temp_dataset.dataset_id, "head", "csv", admin)
    back = tmp_path / "roundtrip.csv"
    back.write_bytes(exported)
    # identically-schemed sibling dataset; exported dates are ISO with Z
    sibling = make_dataset(platform, admin, project, name="stream-temps-copy",
                           study_type="discharge", schema=TEMP_SCHEMA)
    src2 = SourceDescriptor(
        uri=str(back), format="csv",
        field_map=(
            FieldMapping("site", "site"),
            FieldMapping("date", "date", "parse_timestamp", "%Y-%m-%dT%H:%M:%S%z"),
            FieldMapping("temp_c", "temp_c", "to_float"),
        ),
        key_fields=("site", "date"), target_dataset_id=sibling.dataset_id)
    platform.register_source(src2, admin)
    first = run(platform, admin, src2)
    assert first.inserted == 10
    # re-import into the original: everything unchanged
    src3 = SourceDescriptor(
        uri=str(back), format="csv",
        field_map=src2.field_map, key_fields=("site", "date"),
        target_dataset_id=temp_dataset.dataset_id)
    platform.register_source(src3, admin)
    again = run(platform, admin, src3)
    assert again.unchanged == 10 and again.new_version is None


def test_import_determinism(platform, admin, project, tmp_path):
    a = make_dataset(platform, admin, project, name="det-a", study_type="discharge",
                     schema=TEMP_SCHEMA)
    b = make_dataset(platform, admin, project, name="det-b", study_type="discharge",
                     schema=TEMP_SCHEMA)
    path = write_csv(tmp_path, rows_for(7))
    for ds in (a, b):
        src = temp_source(ds.dataset_id, path)
        platform.register_source(src, admin)
        run(platform, admin, src)
    assert (platform.store.head(a.dataset_id).record_index
            == platform.store.head(b.dataset_id).record_index)


def test_conservation_on_random_fixtures(platform, admin, project, tmp_path):
    rng = random.Random(99)
    schema = TEMP_SCHEMA
    for trial in range(10):
        ds = make_dataset(platform, admin, project, name=f"rand-{trial}",
                          study_type="discharge", schema=schema)
        rows = []
        for i in range(rng.randrange(0, 25)):
            kind = rng.random()
            if kind < 0.15:
                rows.append(f"s{i},not-a-date,1.0")  # bad timestamp
            elif kind < 0.25:
                rows.append(f"s{i},2023-01-02,xx")  # bad float
            elif kind < 0.35 and rows:
                rows.append(f"s{rng.randrange(i)},2023-01-01,{i}.0")  # possible dup key
            else:
                rows.append(f"s{i},2023-01-0{rng.randrange(1, 9)},{i}.0")
        src = temp_source(ds.dataset_id, write_csv(tmp_path, rows, f"r{trial}.csv"))
        platform.register_source(src, admin)
        report = run(platform, admin, src)
        assert report.fetched == len(rows)
        assert report.fetched == (report.inserted + report.updated
                                  + report.unchanged + len(report.rejected))
        assert (report.new_version is None) == (report.inserted + report.updated == 0)


def test_jsonlines_import(platform, admin, project, tmp_path):
    ds = make_dataset(platform, admin, project, name="jl", study_type="discharge",
                      schema=TEMP_SCHEMA)
    path = tmp_path / "x.jsonl"
    path.write_text('{"site":"s1","date":"2023-01-01","temp_c":"4.5"}\n'
                    'not json\n'
                    '{"site":"s2","date":"2023-01-02","temp_c":"5.5"}\n')
    src = temp_source(ds.dataset_id, path, fmt="json-lines")
    platform.register_source(src, admin)
    report = run(platform, admin, src)
    assert report.inserted == 2 and len(report.rejected) == 1
