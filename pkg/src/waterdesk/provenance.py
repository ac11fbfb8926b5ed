"""Append-only activity log and lineage DAG.

Every change on the platform (creation, edit, import, merge, job run,
login) lands here as an Activity linking input entities to output
entities with the acting principal and wall-clock duration.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from datetime import datetime

from .canonical import canonical_timestamp
from .coretypes import GeoRegion, new_id
from .errors import InvalidActivity, UnknownEntity

ACTIVITY_KINDS = ("create", "edit", "import", "merge", "job_run", "login")
ENTITY_KINDS = ("dataset_version", "algorithm", "working_set", "job")


@dataclass(frozen=True)
class EntityRef:
    kind: str
    id: str
    version: int | None = None

    def key(self):
        return (self.kind, self.id, self.version)

    def to_json(self):
        d = {"kind": self.kind, "id": self.id}
        if self.version is not None:
            d["version"] = self.version
        return d

    @classmethod
    def from_json(cls, d) -> "EntityRef":
        return cls(d["kind"], d["id"], d.get("version"))


@dataclass
class Activity:
    kind: str
    agent: str
    inputs: tuple
    outputs: tuple
    params: dict
    started_at: datetime
    ended_at: datetime
    activity_id: str = field(default_factory=lambda: new_id("act"))

    @property
    def duration_ms(self) -> int:
        return int(round((self.ended_at - self.started_at).total_seconds() * 1000))

    def to_json(self):
        return {
            "activity_id": self.activity_id,
            "kind": self.kind,
            "agent": self.agent,
            "inputs": [e.to_json() for e in self.inputs],
            "outputs": [e.to_json() for e in self.outputs],
            "params": self.params,
            "started_at": canonical_timestamp(self.started_at),
            "ended_at": canonical_timestamp(self.ended_at),
            "duration_ms": self.duration_ms,
        }


class ProvenanceLog:
    def __init__(self, on_recorded=None):
        self._lock = threading.RLock()
        self._activities: list[Activity] = []
        self._by_id: dict[str, Activity] = {}
        self._on_recorded = on_recorded

    def record(self, kind: str, agent: str, inputs, outputs, params,
               started_at: datetime, ended_at: datetime,
               activity_id: str | None = None) -> Activity:
        if kind not in ACTIVITY_KINDS:
            raise InvalidActivity(f"unknown activity kind {kind!r}")
        if ended_at < started_at:
            raise InvalidActivity("ended_at precedes started_at")
        if kind != "login" and not outputs:
            raise InvalidActivity(f"{kind} activity must have outputs")
        for ref in list(inputs) + list(outputs):
            if ref.kind not in ENTITY_KINDS:
                raise InvalidActivity(f"unknown entity kind {ref.kind!r}")
        act = Activity(kind, agent, tuple(inputs), tuple(outputs), dict(params),
                       started_at, ended_at)
        if activity_id is not None:
            act.activity_id = activity_id
        with self._lock:
            self._activities.append(act)
            self._by_id[act.activity_id] = act
        if self._on_recorded is not None:
            self._on_recorded(act)
        return act

    def record_activity(self, activity: Activity) -> str:
        """Validate and append a fully built Activity."""
        dur = activity.params.get("duration_ms")
        if dur is not None and dur != activity.duration_ms:
            raise InvalidActivity("duration_ms does not match timestamps")
        self.record(activity.kind, activity.agent, activity.inputs, activity.outputs,
                    activity.params, activity.started_at, activity.ended_at)
        return activity.activity_id

    def activities(self) -> list[Activity]:
        with self._lock:
            return list(self._activities)

    def activity(self, activity_id: str) -> Activity:
        with self._lock:
            try:
                return self._by_id[activity_id]
            except KeyError:
                raise UnknownEntity(f"no activity {activity_id}")

    # -- lineage ----------------------------------------------------------

    def lineage(self, entity: EntityRef, direction: str = "upstream",
                max_depth: int | None = None):
        """BFS over the bipartite entity/activity graph.

        Returns ``(nodes, edges)``: nodes are dicts tagged ``entity`` or
        ``activity`` in deterministic order, edges are (from, to) id pairs.
        """
        if direction not in ("upstream", "downstream"):
            raise InvalidActivity(f"unknown direction {direction!r}")
        acts = self.activities()
        producers: dict = {}
        consumers: dict = {}
        known = set()
        for a in acts:
            for e in a.outputs:
                producers.setdefault(e.key(), []).append(a)
                known.add(e.key())
            for e in a.inputs:
                consumers.setdefault(e.key(), []).append(a)
                known.add(e.key())
        if entity.key() not in known:
            raise UnknownEntity(f"no provenance for {entity.kind}:{entity.id}")

        nodes = []
        edges = []
        seen_entities = set()
        seen_acts = set()

        def visit_entity(e: EntityRef, depth: int):
            if e.key() in seen_entities:
                return
            seen_entities.add(e.key())
            nodes.append({"type": "entity", "ref": e})
            if max_depth is not None and depth >= max_depth:
                return
            step = producers if direction == "upstream" else consumers
            for a in sorted(step.get(e.key(), []), key=lambda a: a.activity_id):
                visit_activity(a, e, depth + 1)

        def visit_activity(a: Activity, via: EntityRef, depth: int):
            if direction == "upstream":
                edges.append((a.activity_id, _ekey_str(via)))
            else:
                edges.append((_ekey_str(via), a.activity_id))
            if a.activity_id in seen_acts:
                return
            seen_acts.add(a.activity_id)
            nodes.append({"type": "activity", "activity": a})
            nxt = a.inputs if direction == "upstream" else a.outputs
            for e in sorted(nxt, key=lambda e: e.key()[:2] + ((e.version or 0),)):
                if direction == "upstream":
                    edges.append((_ekey_str(e), a.activity_id))
                else:
                    edges.append((a.activity_id, _ekey_str(e)))
                visit_entity(e, depth)

        visit_entity(entity, 0)
        return nodes, sorted(set(edges))

    def lineage_json(self, entity: EntityRef, direction: str = "upstream",
                     max_depth: int | None = None):
        nodes, edges = self.lineage(entity, direction, max_depth)
        out_nodes = []
        for n in nodes:
            if n["type"] == "entity":
                out_nodes.append({"type": "entity", **n["ref"].to_json()})
            else:
                a = n["activity"]
                out_nodes.append({"type": "activity", "activity_id": a.activity_id,
                                  "kind": a.kind, "agent": a.agent,
                                  "duration_ms": a.duration_ms})
        return {"nodes": out_nodes, "edges": [{"from": f, "to": t} for f, t in edges]}

    def lineage_dot(self, entity: EntityRef, direction: str = "upstream",
                    max_depth: int | None = None) -> str:
        nodes, edges = self.lineage(entity, direction, max_depth)
        lines = ["digraph lineage {"]
        for n in nodes:
            if n["type"] == "entity":
                lines.append(f'  "{_ekey_str(n["ref"])}" [shape=box];')
            else:
                a = n["activity"]
                lines.append(f'  "{a.activity_id}" [shape=ellipse,label="{a.kind}"];')
        for f, t in edges:
            lines.append(f'  "{f}" -> "{t}";')
        lines.append("}")
        return "\n".join(lines)

    # -- cumulative effects ------------------------------------------------

    def cumulative_results(self, region: GeoRegion, region_of_dataset, algo_name=None,
                           window=None):
        """Job-run activities whose output dataset region intersects ``region``.

        ``region_of_dataset(dataset_id) -> GeoRegion | None`` is injected.
        Newest first; ``window`` is an inclusive (from, to) pair on ended_at.
        """
        out = []
        for a in self.activities():
            if a.kind != "job_run":
                continue
            if algo_name is not None and a.params.get("algorithm") != algo_name:
                continue
            if window is not None:
                lo, hi = window
                if (lo is not None and a.ended_at < lo) or (hi is not None and a.ended_at > hi):
                    continue
            for e in a.outputs:
                if e.kind != "dataset_version":
                    continue
                r = region_of_dataset(e.id)
                if r is not None and r.intersects(region):
                    out.append((a, e))
        out.sort(key=lambda pair: (pair[0].ended_at, pair[0].activity_id), reverse=True)
        return out


def _ekey_str(e: EntityRef) -> str:
    return f"{e.kind}:{e.id}" + (f"@{e.version}" if e.version is not None else "")
