import pytest

from conftest import FISH_SCHEMA, fish, make_dataset
from waterdesk.canonical import canonical_json
from waterdesk.coretypes import (
    AlgorithmEntry,
    DatasetDescriptor,
    FieldDef,
    GeoRegion,
    Schema,
)
from waterdesk.errors import (
    DuplicateAlgorithm,
    DuplicateName,
    NoSuchVersion,
    PermissionDenied,
    SchemaInvalid,
    StaleBase,
    ValidationFailed,
)


def test_create_dataset_version_1_empty(platform, admin, project):
    desc = make_dataset(platform, admin, project)
    head = platform.store.head(desc.dataset_id)
    assert head.version == 1
    assert head.parent_version is None
    assert head.record_index == {}
    assert platform.read_records(desc.dataset_id, 1, None, admin) == []


def test_empty_schema_rejected():
    with pytest.raises(SchemaInvalid):
        Schema(())


def test_duplicate_name_in_project(platform, admin, project):
    make_dataset(platform, admin, project, name="dup")
    with pytest.raises(DuplicateName):
        make_dataset(platform, admin, project, name="dup")


def test_append_two_records(platform, admin, project):
    desc = make_dataset(platform, admin, project)
    v2 = platform.append_records(desc.dataset_id, 1, [fish("a"), fish("b")], admin)
    assert v2.version == 2
    assert len(v2.record_index) == 2


def test_append_empty_is_identity(platform, admin, project):
    desc = make_dataset(platform, admin, project)
    platform.append_records(desc.dataset_id, 1, [fish("a")], admin)
    v3 = platform.append_records(desc.dataset_id, 2, [], admin)
    assert v3.record_index == platform.store.version(desc.dataset_id, 2).record_index


def test_append_missing_required_field_names_it(platform, admin, project):
    desc = make_dataset(platform, admin, project)
    from waterdesk.coretypes import Record

    bad = Record("x", {"site": "s1", "count": 2})  # species missing
    with pytest.raises(ValidationFailed) as exc:
        platform.append_records(desc.dataset_id, 1, [bad], admin)
    assert "species" in str(exc.value.detail)


def test_append_stale_base(platform, admin, project):
    desc = make_dataset(platform, admin, project)
    platform.append_records(desc.dataset_id, 1, [fish("a")], admin)
    with pytest.raises(StaleBase):
        platform.append_records(desc.dataset_id, 1, [fish("b")], admin)


def test_upsert_by_record_id(platform, admin, project):
    desc = make_dataset(platform, admin, project)
    platform.append_records(desc.dataset_id, 1, [fish("a", count=1)], admin)
    platform.append_records(desc.dataset_id, 2, [fish("a", count=9)], admin)
    records = platform.read_records(desc.dataset_id, "head", None, admin)
    assert len(records) == 1 and records[0].values["count"] == 9


def test_read_filter_matches_linear_scan(platform, admin, project):
    desc = make_dataset(platform, admin, project)
    records = [fish(f"r{i}", species="brook trout" if i % 3 == 0 else "perch", count=i)
               for i in range(20)]
    platform.append_records(desc.dataset_id, 1, records, admin)
    got = platform.read_records(desc.dataset_id, "head",
                                'species == "brook trout"', admin)
    # reference linear scan oracle
    expected = sorted((r for r in records if r.values["species"] == "brook trout"),
                      key=lambda r: r.record_id)
    assert [r.record_id for r in got] == [r.record_id for r in expected]


def test_snapshots_immutable_bytewise(platform, admin, project):
    desc = make_dataset(platform, admin, project)
    platform.append_records(desc.dataset_id, 1, [fish("a"), fish("b")], admin)
    before = canonical_json([r.to_json() for r in
                             platform.read_records(desc.dataset_id, 2, None, admin)])
    platform.append_records(desc.dataset_id, 2, [fish("a", count=99), fish("c")], admin)
    after = canonical_json([r.to_json() for r in
                            platform.read_records(desc.dataset_id, 2, None, admin)])
    assert before == after


def test_version_density_and_parent_path(platform, admin, project):
    desc = make_dataset(platform, admin, project)
    for i in range(5):
        platform.append_records(desc.dataset_id, i + 1, [fish(f"r{i}")], admin)
    versions = [platform.store.version(desc.dataset_id, v) for v in range(1, 7)]
    assert [v.version for v in versions] == list(range(1, 7))
    assert versions[0].parent_version is None
    for prev, cur in zip(versions, versions[1:]):
        assert cur.parent_version == prev.version
    with pytest.raises(NoSuchVersion):
        platform.store.version(desc.dataset_id, 7)


def test_no_such_version_read(platform, admin, project):
    desc = make_dataset(platform, admin, project)
    with pytest.raises(NoSuchVersion):
        platform.read_records(desc.dataset_id, 9, None, admin)


def test_read_requires_permission(platform, admin, project):
    desc = make_dataset(platform, admin, project)
    nobody = platform.acl.add_principal("nobody", "user", "pw").principal_id
    with pytest.raises(PermissionDenied):
        platform.read_records(desc.dataset_id, 1, None, nobody)


def test_register_algorithm_and_list(platform, admin):
    entry = AlgorithmEntry("water-balance", "1.0.0", "model",
                           Schema((FieldDef("output_dataset_id", "string"),)))
    algo_id = platform.register_algorithm(entry, admin)
    assert platform.store.algorithm(algo_id).name == "water-balance"
    assert any(e.algo_id == algo_id for e in platform.store.list_algorithms("model"))
    with pytest.raises(DuplicateAlgorithm):
        platform.register_algorithm(
            AlgorithmEntry("water-balance", "1.0.0", "model",
                           Schema((FieldDef("x", "string"),))), admin)


def test_seventeen_study_types_with_five_named(platform):
    codes = [st.code for st in platform.store.study_types]
    assert len(codes) == 17
    for named in ("benthics", "fish", "channel_morphology", "channel_stability",
                  "discharge"):
        assert named in codes
    placeholders = [st for st in platform.store.study_types
                    if "Placeholder" in st.label]
    assert len(placeholders) == 12


def test_list_datasets_filters(platform, admin, project):
    a = make_dataset(platform, admin, project, name="benthos-1", study_type="benthics",
                     region=GeoRegion(-80, 43, -79, 44))
    make_dataset(platform, admin, project, name="fish-1", study_type="fish",
                 region=GeoRegion(-70, 40, -69, 41))
    only_benthics = platform.list_datasets(admin, study_type="benthics")
    assert [d.dataset_id for d in only_benthics] == [a.dataset_id]
    assert platform.list_datasets(admin, region=GeoRegion(0, 0, 1, 1)) == []
    # query box equal to a dataset region intersects (closed boxes)
    hits = platform.list_datasets(admin, region=GeoRegion(-80, 43, -79, 44))
    assert a.dataset_id in [d.dataset_id for d in hits]
    # touching edge counts too
    hits = platform.list_datasets(admin, region=GeoRegion(-79, 44, -78, 45))
    assert a.dataset_id in [d.dataset_id for d in hits]


def test_list_datasets_hides_unreadable(platform, admin, project):
    desc = make_dataset(platform, admin, project)
    outsider = platform.acl.add_principal("outsider", "user", "pw").principal_id
    assert platform.list_datasets(outsider) == []
    from waterdesk.access import Policy

    platform.grant(Policy(outsider, "reader", ("dataset", desc.dataset_id)), admin)
    assert [d.dataset_id for d in platform.list_datasets(outsider)] == [desc.dataset_id]


def test_region_invariant():
    with pytest.raises(ValidationFailed):
        GeoRegion(1.0, 0.0, 0.0, 1.0)


def test_descriptor_fields(project):
    desc = DatasetDescriptor("n", "fish", FISH_SCHEMA, project.project_id,
                             GeoRegion(0, 0, 1, 1))
    js = desc.to_json()
    assert js["name"] == "n" and js["study_type"] == "fish"
    assert len(js["schema"]) == 4
