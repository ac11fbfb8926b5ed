import random

import pytest

from conftest import fish, make_dataset
from waterdesk.canonical import canonical_json
from waterdesk.coretypes import Record
from waterdesk.errors import (
    NoSuchVersion,
    PermissionDenied,
    UnknownWorkingSet,
    ValidationFailed,
    WorkingSetClosed,
)
from waterdesk.workingset import OverlayOp, apply_overlay


def seeded(platform, admin, project, n=3):
    desc = make_dataset(platform, admin, project)
    platform.append_records(desc.dataset_id, 1,
                            [fish(f"r{i}", count=i) for i in range(n)], admin)
    return desc


def snapshot_bytes(platform, admin, dataset_id, version="head"):
    records = platform.read_records(dataset_id, version, None, admin)
    return canonical_json([r.to_json() for r in records])


def test_fresh_ws_reads_equal_pinned_snapshot(platform, admin, project):
    desc = seeded(platform, admin, project)
    ws = platform.create_working_set([(desc.dataset_id, 2)], admin)
    direct = platform.read_records(desc.dataset_id, 2, None, admin)
    via_ws = platform.ws_read(ws.ws_id, desc.dataset_id, None, admin)
    assert [r.to_json() for r in via_ws] == [r.to_json() for r in direct]


def test_pin_nonexistent_version(platform, admin, project):
    desc = seeded(platform, admin, project)
    with pytest.raises(NoSuchVersion):
        platform.create_working_set([(desc.dataset_id, 9)], admin)


def test_owner_needs_read(platform, admin, project):
    desc = seeded(platform, admin, project)
    outsider = platform.acl.add_principal("out", "user", "pw").principal_id
    with pytest.raises(PermissionDenied):
        platform.create_working_set([(desc.dataset_id, 2)], outsider)


def test_upsert_new_record_shows_added(platform, admin, project):
    desc = seeded(platform, admin, project)
    ws = platform.create_working_set([(desc.dataset_id, 2)], admin)
    diff = platform.ws_write(ws.ws_id, desc.dataset_id,
                             {"new1": OverlayOp("upsert", fish("new1"))}, admin)
    assert len(diff[desc.dataset_id]["added"]) == 1


def test_delete_then_upsert_is_net_modify(platform, admin, project):
    desc = seeded(platform, admin, project)
    ws = platform.create_working_set([(desc.dataset_id, 2)], admin)
    platform.ws_write(ws.ws_id, desc.dataset_id, {"r0": OverlayOp("delete")}, admin)
    diff = platform.ws_write(ws.ws_id, desc.dataset_id,
                             {"r0": OverlayOp("upsert", fish("r0", count=42))}, admin)
    d = diff[desc.dataset_id]
    assert len(d["modified"]) == 1 and not d["added"] and not d["deleted"]


def test_overlay_read_set_algebra(platform, admin, project):
    desc = make_dataset(platform, admin, project)
    platform.append_records(desc.dataset_id, 1, [fish("a"), fish("b")], admin)
    ws = platform.create_working_set([(desc.dataset_id, 2)], admin)
    platform.ws_write(ws.ws_id, desc.dataset_id,
                      {"a": OverlayOp("delete"),
                       "c": OverlayOp("upsert", fish("c"))}, admin)
    got = [r.record_id for r in platform.ws_read(ws.ws_id, desc.dataset_id, None, admin)]
    assert got == ["b", "c"]


def test_ws_read_filter_matches_materialize_then_scan(platform, admin, project):
    desc = seeded(platform, admin, project, n=10)
    ws = platform.create_working_set([(desc.dataset_id, 2)], admin)
    platform.ws_write(ws.ws_id, desc.dataset_id,
                      {"r1": OverlayOp("upsert", fish("r1", species="perch")),
                       "r2": OverlayOp("delete")}, admin)
    everything = platform.ws_read(ws.ws_id, desc.dataset_id, None, admin)
    got = platform.ws_read(ws.ws_id, desc.dataset_id, 'species == "perch"', admin)
    oracle = [r for r in everything if r.values["species"] == "perch"]
    assert [r.record_id for r in got] == [r.record_id for r in oracle]


def test_overlay_validation(platform, admin, project):
    desc = seeded(platform, admin, project)
    ws = platform.create_working_set([(desc.dataset_id, 2)], admin)
    bad = Record("x", {"site": "s"})  # species/count missing
    with pytest.raises(ValidationFailed):
        platform.ws_write(ws.ws_id, desc.dataset_id, {"x": OverlayOp("upsert", bad)}, admin)


def test_no_op_diff_dropped(platform, admin, project):
    desc = seeded(platform, admin, project)
    ws = platform.create_working_set([(desc.dataset_id, 2)], admin)
    assert platform.diff(ws.ws_id) == {}
    # upsert identical to base and delete of an absent record are no-ops
    base = platform.read_records(desc.dataset_id, 2, None, admin)
    same = base[0]
    platform.ws_write(ws.ws_id, desc.dataset_id,
                      {same.record_id: OverlayOp("upsert", same),
                       "ghost": OverlayOp("delete")}, admin)
    assert platform.diff(ws.ws_id) == {}


def test_diff_counts(platform, admin, project):
    desc = seeded(platform, admin, project)
    ws = platform.create_working_set([(desc.dataset_id, 2)], admin)
    platform.ws_write(ws.ws_id, desc.dataset_id, {
        "add1": OverlayOp("upsert", fish("add1")),
        "r0": OverlayOp("upsert", fish("r0", count=99)),
        "r1": OverlayOp("delete"),
    }, admin)
    d = platform.diff(ws.ws_id)[desc.dataset_id]
    assert (len(d["added"]), len(d["modified"]), len(d["deleted"])) == (1, 1, 1)


def test_isolation_until_merge(platform, admin, project):
    desc = seeded(platform, admin, project)
    before = snapshot_bytes(platform, admin, desc.dataset_id)
    ws = platform.create_working_set([(desc.dataset_id, 2)], admin)
    for i in range(5):
        platform.ws_write(ws.ws_id, desc.dataset_id,
                          {f"w{i}": OverlayOp("upsert", fish(f"w{i}"))}, admin)
    assert snapshot_bytes(platform, admin, desc.dataset_id) == before
    platform.discard(ws.ws_id, admin)
    assert snapshot_bytes(platform, admin, desc.dataset_id) == before


def test_write_after_merge_closed(platform, admin, project):
    desc = seeded(platform, admin, project)
    ws = platform.create_working_set([(desc.dataset_id, 2)], admin)
    platform.ws_write(ws.ws_id, desc.dataset_id,
                      {"x": OverlayOp("upsert", fish("x"))}, admin)
    result = platform.merge(ws.ws_id, "abort_on_conflict", admin)
    assert result["merged"] and result["new_versions"][desc.dataset_id] == 3
    with pytest.raises(WorkingSetClosed):
        platform.ws_write(ws.ws_id, desc.dataset_id,
                          {"y": OverlayOp("upsert", fish("y"))}, admin)


def test_fast_forward_merge_applies_full_diff(platform, admin, project):
    desc = seeded(platform, admin, project)
    ws = platform.create_working_set([(desc.dataset_id, 2)], admin)
    platform.ws_write(ws.ws_id, desc.dataset_id, {
        "n1": OverlayOp("upsert", fish("n1")),
        "r0": OverlayOp("delete"),
    }, admin)
    result = platform.merge(ws.ws_id, "abort_on_conflict", admin)
    assert result["conflicts"] == {}
    ids = [r.record_id for r in platform.read_records(desc.dataset_id, "head", None, admin)]
    assert "n1" in ids and "r0" not in ids


def test_conflicting_merge_aborts_without_writes(platform, admin, project):
    desc = seeded(platform, admin, project)
    ws = platform.create_working_set([(desc.dataset_id, 2)], admin)
    platform.ws_write(ws.ws_id, desc.dataset_id,
                      {"r0": OverlayOp("upsert", fish("r0", count=100))}, admin)
    # head moves with a different edit to the same record
    platform.append_records(desc.dataset_id, 2, [fish("r0", count=200)], admin)
    before = snapshot_bytes(platform, admin, desc.dataset_id)
    result = platform.merge(ws.ws_id, "abort_on_conflict", admin)
    assert not result["merged"]
    assert result["conflicts"] == {desc.dataset_id: ["r0"]}
    assert snapshot_bytes(platform, admin, desc.dataset_id) == before
    assert platform.working_set(ws.ws_id).state == "open"


def test_conflicting_merge_strategy_ours(platform, admin, project):
    desc = seeded(platform, admin, project)
    ws = platform.create_working_set([(desc.dataset_id, 2)], admin)
    platform.ws_write(ws.ws_id, desc.dataset_id,
                      {"r0": OverlayOp("upsert", fish("r0", count=100))}, admin)
    platform.append_records(desc.dataset_id, 2, [fish("r0", count=200)], admin)
    result = platform.merge(ws.ws_id, "ours", admin)
    assert result["merged"]
    head = {r.record_id: r.values for r in
            platform.read_records(desc.dataset_id, "head", None, admin)}
    assert head["r0"]["count"] == 100


def test_conflicting_merge_strategy_theirs(platform, admin, project):
    desc = seeded(platform, admin, project)
    ws = platform.create_working_set([(desc.dataset_id, 2)], admin)
    platform.ws_write(ws.ws_id, desc.dataset_id,
                      {"r0": OverlayOp("upsert", fish("r0", count=100))}, admin)
    platform.append_records(desc.dataset_id, 2, [fish("r0", count=200)], admin)
    result = platform.merge(ws.ws_id, "theirs", admin)
    assert result["merged"]
    head = {r.record_id: r.values for r in
            platform.read_records(desc.dataset_id, "head", None, admin)}
    assert head["r0"]["count"] == 200


def test_double_discard_and_read_after_discard(platform, admin, project):
    desc = seeded(platform, admin, project)
    ws = platform.create_working_set([(desc.dataset_id, 2)], admin)
    platform.discard(ws.ws_id, admin)
    with pytest.raises((WorkingSetClosed, UnknownWorkingSet)):
        platform.discard(ws.ws_id, admin)
    with pytest.raises(UnknownWorkingSet):
        platform.ws_read(ws.ws_id, desc.dataset_id, None, admin)


def test_overlay_apply_idempotent_and_order_independent():
    base = {f"r{i}": fish(f"r{i}", count=i) for i in range(4)}
    overlay = {"r0": OverlayOp("delete"),
               "r1": OverlayOp("upsert", fish("r1", count=9)),
               "zz": OverlayOp("upsert", fish("zz"))}
    once = apply_overlay(base, overlay)
    assert apply_overlay(once, overlay) == once
    shuffled = dict(reversed(list(overlay.items())))
    assert apply_overlay(base, shuffled) == once


# -- randomized three-way oracle -----------------------------------------

def brute_force_three_way(base, head, overlay_states):
    """Independent comparator: per-record state triples.

    States are digests or None. Returns (conflicts, ours_head, theirs_head).
    """
    conflicts = []
    ours = dict(head)
    theirs = dict(head)
    for rid, desired in overlay_states.items():
        b, h = base.get(rid), head.get(rid)
        overlay_changed = desired != b
        head_changed = h != b
        if not overlay_changed:
            continue
        if head_changed and desired != h:
            conflicts.append(rid)
            if desired is None:
                ours.pop(rid, None)
            else:
                ours[rid] = desired
        else:
            for target in (ours, theirs):
                if desired is None:
                    target.pop(rid, None)
                else:
                    target[rid] = desired
    return sorted(conflicts), ours, theirs


def random_three_way_instance(rng, platform, admin, project, trial):
    ids = [f"r{i}" for i in range(rng.randrange(1, 11))]
    desc = make_dataset(platform, admin, project, name=f"merge-{trial}")
    base_records = [fish(rid, count=rng.randrange(5)) for rid in ids
                    if rng.random() < 0.7]
    platform.append_records(desc.dataset_id, 1, base_records, admin)
    base_index = dict(platform.store.head(desc.dataset_id).record_index)
    ws = platform.create_working_set([(desc.dataset_id, 2)], admin)
    # random head edits
    head_edits = []
    head_deletes = {}
    for rid in ids:
        roll = rng.random()
        if roll < 0.3:
            head_edits.append(fish(rid, count=rng.randrange(100, 200)))
    if head_edits:
        platform.append_records(desc.dataset_id, 2, head_edits, admin)
    # random overlay edits
    ops = {}
    for rid in ids:
        roll = rng.random()
        if roll < 0.25:
            ops[rid] = OverlayOp("upsert", fish(rid, count=rng.randrange(200, 300)))
        elif roll < 0.40:
            ops[rid] = OverlayOp("delete")
        elif roll < 0.50 and rid in base_index:
            # upsert identical to base: must be a merge no-op
            rec = next(r for r in base_records if r.record_id == rid)
            ops[rid] = OverlayOp("upsert", rec)
    if ops:
        platform.ws_write(ws.ws_id, desc.dataset_id, ops, admin)
    overlay_states = {rid: (op.record.digest if op.kind == "upsert" else None)
                      for rid, op in ops.items()}
    return desc, ws, base_index, overlay_states


@pytest.mark.parametrize("strategy", ["abort_on_conflict", "ours", "theirs"])
def test_merge_matches_comparator_randomized(platform, admin, project, strategy):
    rng = random.Random(hash(strategy) & 0xFFFF)
    for trial in range(40):
        desc, ws, base_index, overlay_states = random_three_way_instance(
            rng, platform, admin, project, f"{strategy}-{trial}")
        head_index = dict(platform.store.head(desc.dataset_id).record_index)
        conflicts, ours, theirs = brute_force_three_way(
            base_index, head_index, overlay_states)
        result = platform.merge(ws.ws_id, strategy, admin)
        if strategy == "abort_on_conflict":
            got_conflicts = sorted(result["conflicts"].get(desc.dataset_id, []))
            assert got_conflicts == conflicts
            if conflicts:
                assert not result["merged"]
                assert dict(platform.store.head(desc.dataset_id).record_index) == head_index
                continue
            predicted = ours
        else:
            assert result["merged"]
            predicted = ours if strategy == "ours" else theirs
        assert dict(platform.store.head(desc.dataset_id).record_index) == predicted
