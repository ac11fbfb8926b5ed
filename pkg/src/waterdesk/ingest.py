"""Source registration, plan generation and incremental import/export.

Adapters cover csv (RFC 4180, UTF-8, header row mandatory) and
json-lines. Row-level failures are quarantined into the report's
rejected list; file-level fetch/parse failures abort the import.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .canonical import canonical_timestamp, digest
from .coretypes import Record, Schema, new_id, utcnow
from .errors import FetchFailed, ParseFailed, UnmappedRequiredField, ValidationFailed

TRANSFORMS = ("identity", "to_float", "to_int", "parse_timestamp", "trim")

CANONICAL_STEPS = ("fetch", "parse", "map", "validate", "dedup", "upsert")


@dataclass(frozen=True)
class FieldMapping:
    source_column: str
    schema_field: str
    transform: str = "identity"
    timestamp_format: str | None = None

    def __post_init__(self):
        if self.transform not in TRANSFORMS:
            raise ValidationFailed(f"unknown transform {self.transform!r}")
        if self.transform == "parse_timestamp" and not self.timestamp_format:
            raise ValidationFailed("parse_timestamp requires an explicit format string")

    def to_json(self):
        d = {"source_column": self.source_column, "schema_field": self.schema_field,
             "transform": self.transform}
        if self.timestamp_format:
            d["timestamp_format"] = self.timestamp_format
        return d


@dataclass
class SourceDescriptor:
    uri: str
    format: str  # csv | json-lines
    field_map: tuple
    key_fields: tuple
    target_dataset_id: str
    source_id: str = field(default_factory=lambda: new_id("src"))

    def __post_init__(self):
        if self.format not in ("csv", "json-lines"):
            raise ValidationFailed(f"unknown source format {self.format!r}")
        if not self.key_fields:
            raise ValidationFailed("key_fields must be non-empty")
        mapped = {m.schema_field for m in self.field_map}
        for k in self.key_fields:
            if k not in mapped:
                raise ValidationFailed(f"key field {k!r} is not mapped")

    def validate_against(self, schema: Schema):
        mapped = {m.schema_field for m in self.field_map}
        for f in schema.fields:
            if f.required and f.name not in mapped:
                raise UnmappedRequiredField(f.name, detail={"field": f.name})
        for m in self.field_map:
            if m.schema_field not in schema.field_names():
                raise ValidationFailed(f"mapping targets unknown schema field {m.schema_field!r}")

    def to_json(self):
        return {
            "source_id": self.source_id,
            "uri": self.uri,
            "format": self.format,
            "field_map": [m.to_json() for m in self.field_map],
            "key_fields": list(self.key_fields),
            "target_dataset_id": self.target_dataset_id,
        }


@dataclass
class IngestPlan:
    source_id: str
    steps: tuple
    plan_id: str = field(default_factory=lambda: new_id("plan"))
    generated_at: datetime = field(default_factory=utcnow)

    def to_json(self):
        return {
            "plan_id": self.plan_id,
            "source_id": self.source_id,
            "steps": [dict(s) for s in self.steps],
            "generated_at": canonical_timestamp(self.generated_at),
        }


@dataclass
class ImportReport:
    plan_id: str
    fetched: int
    inserted: int
    updated: int
    unchanged: int
    rejected: list  # (row number, reason)
    new_version: int | None

    def check_conservation(self):
        assert self.fetched == self.inserted + self.updated + self.unchanged + len(self.rejected)
        assert (self.new_version is None) == (self.inserted == 0 and self.updated == 0)

    def to_json(self):
        return {
            "plan_id": self.plan_id,
            "fetched": self.fetched,
            "inserted": self.inserted,
            "updated": self.updated,
            "unchanged": self.unchanged,
            "rejected": [{"row": r, "reason": why} for r, why in self.rejected],
            "new_version": self.new_version,
        }


def generate_plan(source: SourceDescriptor) -> IngestPlan:
    steps = (
        {"step": "fetch", "uri": source.uri},
        {"step": "parse", "format": source.format},
        {"step": "map", "mappings": [m.to_json() for m in source.field_map]},
        {"step": "validate", "mode": "per-row"},
        {"step": "dedup", "key_fields": list(source.key_fields)},
        {"step": "upsert", "target_dataset_id": source.target_dataset_id},
    )
    return IngestPlan(source.source_id, steps)


# -- fetch + parse ------------------------------------------------------

def fetch_bytes(uri: str) -> bytes:
    if re.match(r"^https?://", uri):
        import httpx

        try:
            resp = httpx.get(uri, timeout=30.0)
        except httpx.HTTPError as exc:
            raise FetchFailed(f"fetch failed for {uri}: {exc}")
        if resp.status_code != 200:
            raise FetchFailed(f"fetch failed for {uri}: status {resp.status_code}")
        return resp.content
    path = Path(uri)
    if not path.exists():
        raise FetchFailed(f"fetch failed for {uri}: no such file")
    return path.read_bytes()


def parse_rows(data: bytes, fmt: str):
    """Yield (row_number, dict) pairs; row numbers are 1-based data rows.

    Per-row json decode errors are yielded as (row_number, ParseFailed).
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseFailed(f"input is not UTF-8: {exc}")
    if fmt == "csv":
        reader = csv.reader(io.StringIO(text, newline=""))
        try:
            rows = list(reader)
        except csv.Error as exc:
            raise ParseFailed(f"csv parse failed: {exc}")
        if not rows:
            raise ParseFailed("csv input has no header row")
        header = rows[0]
        for n, row in enumerate(rows[1:], start=1):
            if len(row) != len(header):
                yield n, ParseFailed(f"row {n}: expected {len(header)} columns, got {len(row)}")
            else:
                yield n, dict(zip(header, row))
    elif fmt == "json-lines":
        n = 0
        for line in text.splitlines():
            if not line.strip():
                continue
            n += 1
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("not a JSON object")
                yield n, obj
            except ValueError as exc:
                yield n, ParseFailed(f"row {n}: {exc}")
    else:
        raise ParseFailed(f"unknown format {fmt!r}")


def apply_transform(mapping: FieldMapping, raw):
    if raw is None:
        return None
    t = mapping.transform
    if t == "identity":
        return raw
    if t == "trim":
        return raw.strip() if isinstance(raw, str) else raw
    if t == "to_float":
        if isinstance(raw, str) and raw.strip() == "":
            return None
        return float(raw)
    if t == "to_int":
        if isinstance(raw, str) and raw.strip() == "":
            return None
        return int(str(raw).strip())
    if t == "parse_timestamp":
        dt = datetime.strptime(str(raw), mapping.timestamp_format)
        return dt if dt.tzinfo else dt.replace(tzinfo=timezone.utc)
    raise ValidationFailed(f"unknown transform {t!r}")


def map_and_validate(source: SourceDescriptor, schema: Schema, rows):
    """Turn parsed rows into Records keyed by the key_fields digest.

    Returns (records_in_order, rejected). Later rows with the same key
    supersede earlier ones; superseded rows are counted as rejected.
    """
    staged = {}  # record_id -> (row_number, Record)
    order = []
    rejected = []
    for n, row in rows:
        if isinstance(row, ParseFailed):
            rejected.append((n, row.message))
            continue
        values = {}
        problems = []
        for m in source.field_map:
            raw = row.get(m.source_column)
            if raw is None:
                values[m.schema_field] = None
                continue
            try:
                values[m.schema_field] = apply_transform(m, raw)
            except (ValueError, TypeError) as exc:
                problems.append(f"column {m.source_column!r}: {exc}")
        if not problems:
            problems = schema.check_values({k: v for k, v in values.items() if v is not None})
        if problems:
            rejected.append((n, "; ".join(problems)))
            continue
        key = {k: values[k] for k in source.key_fields}
        if any(v is None for v in key.values()):
            rejected.append((n, "null key field"))
            continue
        rid = digest(key)
        values = {k: v for k, v in values.items() if v is not None}
        if rid in staged:
            prev_n, _ = staged[rid]
            rejected.append((prev_n, f"duplicate key; superseded by row {n}"))
            order.remove(rid)
        staged[rid] = (n, Record(rid, values))
        order.append(rid)
    return [staged[rid][1] for rid in order], rejected


# -- export -------------------------------------------------------------

def export_records(schema: Schema, records, fmt: str) -> bytes:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        names = schema.field_names()
        writer.writerow(names)
        for r in records:
            writer.writerow([_csv_value(r.values.get(n)) for n in names])
        return buf.getvalue().encode("utf-8")
    if fmt == "json-lines":
        lines = [json.dumps(r.to_json()["values"], sort_keys=True) for r in records]
        return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")
    raise ValidationFailed(f"unknown export format {fmt!r}")


def _csv_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, datetime):
        return canonical_timestamp(v)
    if isinstance(v, (list, tuple)):
        return json.dumps(list(v))
    return str(v)
