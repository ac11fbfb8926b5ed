"""Domain types for the versioned dataset store."""

from __future__ import annotations

import re
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .canonical import canonical_timestamp, digest
from .errors import SchemaInvalid, ValidationFailed

FIELD_KINDS = ("string", "integer", "float", "boolean", "timestamp", "geo_point")

SEMVER_RE = re.compile(r"^\d+\.\d+\.\d+$")


def new_id(prefix: str) -> str:
    return f"{prefix}-{uuid.uuid4().hex[:12]}"


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class FieldDef:
    name: str
    kind: str
    required: bool = True


@dataclass(frozen=True)
class Schema:
    fields: tuple

    def __post_init__(self):
        if not self.fields:
            raise SchemaInvalid("schema must have at least one field")
        names = [f.name for f in self.fields]
        if len(set(names)) != len(names):
            raise SchemaInvalid("field names must be unique")
        for f in self.fields:
            if f.kind not in FIELD_KINDS:
                raise SchemaInvalid(f"unknown field kind {f.kind!r}")
            if not f.name:
                raise SchemaInvalid("field names must be non-empty")

    def field_names(self):
        return [f.name for f in self.fields]

    def check_values(self, values: dict):
        """Return a list of problem strings; empty means valid."""
        problems = []
        known = {f.name: f for f in self.fields}
        for f in self.fields:
            if f.required and values.get(f.name) is None:
                problems.append(f"missing required field {f.name!r}")
        for name, v in values.items():
            f = known.get(name)
            if f is None:
                problems.append(f"unknown field {name!r}")
            elif v is not None and not _kind_ok(f.kind, v):
                problems.append(f"field {f.name!r} expects {f.kind}, got {type(v).__name__}")
        return problems

    def to_json(self):
        return [{"name": f.name, "kind": f.kind, "required": f.required} for f in self.fields]

    @classmethod
    def from_json(cls, data) -> "Schema":
        try:
            return cls(tuple(FieldDef(d["name"], d["kind"], bool(d.get("required", True))) for d in data))
        except (TypeError, KeyError) as exc:
            raise SchemaInvalid(f"malformed schema: {exc}")


def _kind_ok(kind: str, v) -> bool:
    if kind == "string":
        return isinstance(v, str)
    if kind == "integer":
        return isinstance(v, int) and not isinstance(v, bool)
    if kind == "float":
        return isinstance(v, (int, float)) and not isinstance(v, bool)
    if kind == "boolean":
        return isinstance(v, bool)
    if kind == "timestamp":
        return isinstance(v, datetime)
    if kind == "geo_point":
        return (
            isinstance(v, (list, tuple))
            and len(v) == 2
            and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in v)
        )
    return False


@dataclass(frozen=True)
class GeoRegion:
    """Closed WGS84 bounding box in decimal degrees."""

    min_lon: float
    min_lat: float
    max_lon: float
    max_lat: float

    def __post_init__(self):
        if self.min_lon > self.max_lon or self.min_lat > self.max_lat:
            raise ValidationFailed("region min must not exceed max on either axis")

    def intersects(self, other: "GeoRegion") -> bool:
        return (
            self.min_lon <= other.max_lon
            and other.min_lon <= self.max_lon
            and self.min_lat <= other.max_lat
            and other.min_lat <= self.max_lat
        )

    def to_json(self):
        return {
            "min_lon": self.min_lon,
            "min_lat": self.min_lat,
            "max_lon": self.max_lon,
            "max_lat": self.max_lat,
        }

    @classmethod
    def from_json(cls, d) -> "GeoRegion":
        return cls(d["min_lon"], d["min_lat"], d["max_lon"], d["max_lat"])


@dataclass
class DatasetDescriptor:
    name: str
    study_type: str
    schema: Schema
    project_id: str
    region: GeoRegion
    created_by: str = ""
    created_at: datetime = field(default_factory=utcnow)
    dataset_id: str = field(default_factory=lambda: new_id("ds"))

    def to_json(self):
        return {
            "dataset_id": self.dataset_id,
            "name": self.name,
            "study_type": self.study_type,
            "schema": self.schema.to_json(),
            "project_id": self.project_id,
            "region": self.region.to_json(),
            "created_by": self.created_by,
            "created_at": canonical_timestamp(self.created_at),
        }


@dataclass(frozen=True)
class Record:
    record_id: str
    values: dict
    digest: str = ""

    def __post_init__(self):
        object.__setattr__(self, "digest", digest(self.values))

    def to_json(self):
        return {"record_id": self.record_id, "values": _values_json(self.values), "digest": self.digest}


def _values_json(values: dict):
    out = {}
    for k, v in values.items():
        if isinstance(v, datetime):
            out[k] = canonical_timestamp(v)
        elif isinstance(v, tuple):
            out[k] = list(v)
        else:
            out[k] = v
    return out


@dataclass(frozen=True)
class DatasetVersion:
    dataset_id: str
    version: int
    parent_version: int | None
    record_index: dict  # record_id -> digest, treat as immutable
    created_by_activity: str

    def to_json(self):
        return {
            "dataset_id": self.dataset_id,
            "version": self.version,
            "parent_version": self.parent_version,
            "record_count": len(self.record_index),
            "created_by_activity": self.created_by_activity,
        }


@dataclass(frozen=True)
class StudyType:
    code: str
    label: str


# Seed catalog: five named study types; the remaining twelve of the
# catalog's seventeen are shipped as clearly labelled placeholders.
SEED_STUDY_TYPES = tuple(
    [
        StudyType("benthics", "Benthics"),
        StudyType("fish", "Fish"),
        StudyType("channel_morphology", "Channel Morphology"),
        StudyType("channel_stability", "Channel Stability"),
        StudyType("discharge", "Discharge"),
    ]
    + [StudyType(f"study_{n:02d}", f"Placeholder Study Type {n}") for n in range(6, 18)]
)


@dataclass
class AlgorithmEntry:
    name: str
    version: str
    kind: str  # model | analysis | ingest-plan
    param_schema: Schema
    algo_id: str = field(default_factory=lambda: new_id("algo"))
    registered_at: datetime = field(default_factory=utcnow)

    def __post_init__(self):
        if self.kind not in ("model", "analysis", "ingest-plan"):
            raise ValidationFailed(f"unknown algorithm kind {self.kind!r}")
        if not SEMVER_RE.match(self.version):
            raise ValidationFailed(f"algorithm version {self.version!r} is not semantic")

    def to_json(self):
        return {
            "algo_id": self.algo_id,
            "name": self.name,
            "version": self.version,
            "kind": self.kind,
            "param_schema": self.param_schema.to_json(),
            "registered_at": canonical_timestamp(self.registered_at),
        }
