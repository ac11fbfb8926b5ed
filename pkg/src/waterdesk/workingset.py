"""Copy-on-write overlays and three-way merge over dataset snapshots.

The overlay algebra here is pure; lifecycle, locking and permission
checks live in the platform facade.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime

from .coretypes import Record, new_id, utcnow
from .errors import ValidationFailed


@dataclass(frozen=True)
class OverlayOp:
    kind: str  # upsert | delete
    record: Record | None = None

    def __post_init__(self):
        if self.kind not in ("upsert", "delete"):
            raise ValidationFailed(f"unknown overlay op {self.kind!r}")
        if self.kind == "upsert" and self.record is None:
            raise ValidationFailed("upsert needs a record")


@dataclass
class WorkingSet:
    owner: str
    base: tuple  # ((dataset_id, version), ...)
    overlay: dict = field(default_factory=dict)  # dataset_id -> {record_id: OverlayOp}
    state: str = "open"
    created_at: datetime = field(default_factory=utcnow)
    ws_id: str = field(default_factory=lambda: new_id("ws"))

    def pinned_version(self, dataset_id: str) -> int:
        for ds, v in self.base:
            if ds == dataset_id:
                return v
        raise ValidationFailed(f"dataset {dataset_id} is not pinned in working set {self.ws_id}")

    def to_json(self):
        return {
            "ws_id": self.ws_id,
            "owner": self.owner,
            "base": [{"dataset_id": ds, "version": v} for ds, v in self.base],
            "state": self.state,
            "overlay_counts": {ds: len(ops) for ds, ops in self.overlay.items()},
        }


def apply_overlay(base_records: dict, overlay: dict) -> dict:
    """base/result: record_id -> Record. Idempotent per record and
    order-independent across distinct record ids."""
    out = dict(base_records)
    for rid, op in overlay.items():
        if op.kind == "delete":
            out.pop(rid, None)
        else:
            out[rid] = op.record
    return out


def compute_diff(base_index: dict, overlay: dict) -> dict:
    """No-op overlay entries (upsert equal to base, delete of an absent
    record) are dropped. Returns {"added": [...], "modified": [...],
    "deleted": [...]}; added/modified carry the overlay Record."""
    added, modified, deleted = [], [], []
    for rid in sorted(overlay):
        op = overlay[rid]
        base_digest = base_index.get(rid)
        if op.kind == "delete":
            if base_digest is not None:
                deleted.append(rid)
        else:
            if base_digest is None:
                added.append(op.record)
            elif op.record.digest != base_digest:
                modified.append((rid, base_digest, op.record.digest, op.record))
    return {"added": added, "modified": modified, "deleted": deleted}


def changeset_json(diffs_by_dataset: dict) -> dict:
    out = {}
    for ds, d in diffs_by_dataset.items():
        out[ds] = {
            "added": [r.to_json() for r in d["added"]],
            "modified": [
                {"record_id": rid, "old_digest": old, "new_digest": new,
                 "record": rec.to_json()}
                for rid, old, new, rec in d["modified"]
            ],
            "deleted": list(d["deleted"]),
        }
    return out


def three_way(base_index: dict, head_index: dict, overlay: dict):
    """Three-way compare per record between the base pin, the current
    head and the overlay.

    Returns (conflicts, merged_ours, merged_theirs, new_blobs) where the
    merged values are record indexes (record_id -> digest) and new_blobs
    maps digest -> values for overlay-introduced content.
    """
    conflicts = []
    ours = dict(head_index)
    theirs = dict(head_index)
    new_blobs = {}
    for rid in sorted(overlay):
        op = overlay[rid]
        desired = op.record.digest if op.kind == "upsert" else None
        base_d = base_index.get(rid)
        head_d = head_index.get(rid)
        if desired == base_d:
            continue  # overlay is a no-op for this record
        if op.kind == "upsert":
            new_blobs[op.record.digest] = op.record.values
        head_changed = head_d != base_d
        if head_changed and desired != head_d:
            conflicts.append(rid)
            _apply(ours, rid, desired)  # strategy ours: overlay wins
            # strategy theirs: head wins, overlay entry dropped
        else:
            _apply(ours, rid, desired)
            _apply(theirs, rid, desired)
    return conflicts, ours, theirs, new_blobs


def _apply(index: dict, rid: str, desired: str | None):
    if desired is None:
        index.pop(rid, None)
    else:
        index[rid] = desired
