"""The platform facade.

One object wires the storage engine, access control, provenance log,
notification hub, job scheduler, working sets and ingestion together and
enforces every operation's permission checks, provenance duties and
event emissions. The HTTP gateway and CLI sit on top of this.
"""

from __future__ import annotations

import threading
from contextlib import ExitStack
from dataclasses import dataclass, field as dc_field

from . import ingest, watershed, workingset
from .access import AccessControl, Policy
from .compute import Backend, JobSpec, Scheduler
from .coretypes import (
    AlgorithmEntry,
    DatasetDescriptor,
    DatasetVersion,
    GeoRegion,
    Record,
    new_id,
    utcnow,
)
from .errors import (
    ConfigInvalid,
    MergeConflicts,
    NoSuchVersion,
    PermissionDenied,
    UnknownAlgorithm,
    UnknownDataset,
    UnknownProject,
    UnknownResource,
    UnknownSource,
    UnknownWorkingSet,
    ValidationFailed,
    WorkingSetClosed,
)
from .notify import NotificationHub, evaluate, parse_predicate
from .provenance import EntityRef, ProvenanceLog
from .store import VersionedStore
from .workingset import OverlayOp, WorkingSet


@dataclass
class PlatformConfig:
    session_ttl_hours: float = 8.0
    allow_public_read: bool = False
    backends: list = dc_field(default_factory=lambda: [{"name": "local", "capacity": 2}])
    webhook_poster: object = None
    synchronous_webhooks: bool = False
    webhook_backoff_s: float = 1.0

    @classmethod
    def from_dict(cls, raw: dict) -> "PlatformConfig":
        try:
            auth = raw.get("auth", {})
            backends = raw.get("compute", {}).get("backends", None)
            cfg = cls(
                session_ttl_hours=float(auth.get("session_ttl_hours", 8)),
                allow_public_read=bool(auth.get("allow_public_read", False)),
            )
            if backends is not None:
                cfg.backends = [
                    {"name": b["name"], "capacity": int(b["capacity"]),
                     "kind": b.get("kind", "local")}
                    for b in backends
                ]
            return cfg
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigInvalid(f"bad config: {exc}")


class Project:
    def __init__(self, name: str, created_by: str):
        self.project_id = new_id("proj")
        self.name = name
        self.created_by = created_by
        self.created_at = utcnow()

    def to_json(self):
        return {"project_id": self.project_id, "name": self.name,
                "created_by": self.created_by}


class _JobIO:
    """Read/write surface handed to algorithm runners.

    Dataset pins read frozen snapshots; a working-set pin reads through
    the overlay and routes writes back into the overlay, so a scenario
    run never touches shared data.
    """

    def __init__(self, platform: "Platform", spec: JobSpec):
        self._p = platform
        self._spec = spec
        self._ws_id = None
        for pin in spec.inputs:
            if pin[0] == "working_set":
                self._ws_id = pin[1]
        self.written: list = []

    def datasets(self) -> dict:
        out = {}
        for pin in self._spec.inputs:
            if pin[0] == "dataset":
                out[pin[1]] = self._p.store.records_of(pin[1], pin[2])
            else:
                ws = self._p._ws(pin[1])
                for ds_id, version in ws.base:
                    out[ds_id] = self._p._ws_materialize(ws, ds_id)
        return out

    def write(self, dataset_id: str, records):
        self.written.append((dataset_id, list(records)))

    def commit(self, actor: str, activity_id: str):
        """Returns output EntityRefs. Working-set jobs write overlays."""
        refs = []
        if self._ws_id is not None:
            ws = self._p._ws(self._ws_id)
            for dataset_id, records in self.written:
                ops = {r.record_id: OverlayOp("upsert", r) for r in records}
                self._p.ws_write(self._ws_id, dataset_id, ops, actor,
                                 _skip_validation=False)
            if self.written:
                refs.append(EntityRef("working_set", self._ws_id))
            return refs
        for dataset_id, records in self.written:
            nv = self._p._append(dataset_id, records, actor, activity_id,
                                 emit=False)
            refs.append(EntityRef("dataset_version", dataset_id, nv.version))
        return refs


class Platform:
    def __init__(self, config: PlatformConfig | None = None):
        self.config = config or PlatformConfig()
        self.store = VersionedStore()
        self.projects: dict[str, Project] = {}
        self.acl = AccessControl(
            scope_resolver=self._scopes,
            session_ttl_hours=self.config.session_ttl_hours,
            allow_public_read=self.config.allow_public_read,
        )
        self.hub = NotificationHub(
            read_gate=self._delivery_gate,
            webhook_poster=self.config.webhook_poster,
            synchronous_webhooks=self.config.synchronous_webhooks,
            backoff_base_s=self.config.webhook_backoff_s,
        )
        self.prov = ProvenanceLog(on_recorded=self._on_activity)
        self.scheduler = Scheduler(body=self._job_body, on_finished=self._job_finished)
        self._runners: dict[str, object] = {}
        self._working_sets: dict[str, WorkingSet] = {}
        self._sources: dict[str, ingest.SourceDescriptor] = {}
        self._plans: dict[str, ingest.IngestPlan] = {}
        self._ws_lock = threading.RLock()
        for b in self.config.backends:
            self.scheduler.register_backend(Backend(**b))

    # -- scope and gate plumbing ---------------------------------------

    def _scopes(self, resource):
        chain = [resource]
        if resource[0] == "dataset" and resource[1] != "*":
            try:
                desc = self.store.descriptor(resource[1])
                chain.append(("project", desc.project_id))
            except UnknownDataset:
                pass
        if resource != ("platform", "*"):
            chain.append(("platform", "*"))
        return chain

    def _delivery_gate(self, principal_id, attrs) -> bool:
        if "dataset_id" in attrs:
            return self.acl.check(principal_id, "read", ("dataset", attrs["dataset_id"])).allow
        if "project_id" in attrs:
            return self.acl.check(principal_id, "read", ("project", attrs["project_id"])).allow
        return True

    def _on_activity(self, act):
        attrs = {"activity_id": act.activity_id, "activity_kind": act.kind,
                 "actor": act.agent}
        for ref in act.outputs:
            if ref.kind == "dataset_version":
                try:
                    desc = self.store.descriptor(ref.id)
                    attrs["dataset_id"] = ref.id
                    attrs["project_id"] = desc.project_id
                except UnknownDataset:
                    pass
                break
        self.hub.publish("provenance_changed", attrs)

    def _data_changed(self, dataset_id: str, version: int, actor: str):
        desc = self.store.descriptor(dataset_id)
        r = desc.region
        self.hub.publish("data_changed", {
            "dataset_id": dataset_id,
            "project_id": desc.project_id,
            "version": version,
            "actor": actor,
            "study_type": desc.study_type,
            "min_lon": r.min_lon, "min_lat": r.min_lat,
            "max_lon": r.max_lon, "max_lat": r.max_lat,
        })

    # -- principals, sessions, policy ----------------------------------

    def bootstrap_admin(self, name: str, secret: str):
        """First principal; gets a platform-wide admin allow policy."""
        p = self.acl.add_principal(name, "user", secret)
        self.acl.add_policy(Policy(p.principal_id, "admin", ("platform", "*")))
        return p

    def add_principal(self, name: str, actor: str, kind: str = "user",
                      secret: str | None = None, member_of: tuple = ()):
        self.acl.require(actor, "admin", ("platform", "*"))
        return self.acl.add_principal(name, kind, secret, member_of)

    def authenticate(self, name: str, secret: str):
        tok = self.acl.authenticate(name, secret)
        now = utcnow()
        self.prov.record("login", tok.principal_id, [], [], {}, now, now)
        return tok

    def grant(self, policy: Policy, actor: str) -> str:
        self.acl.principal(policy.principal_id)  # UnknownPrincipal if absent
        self._check_resource_exists(policy.resource)
        pid = self.acl.grant(policy, actor)
        if policy.resource[0] == "project":
            attrs = {"project_id": policy.resource[1], "actor": actor}
            self.hub.publish("project_changed", attrs)
            grantee = self.acl.principal(policy.principal_id)
            if grantee.kind == "team":
                self.hub.publish("team_changed", attrs)
        return pid

    def _check_resource_exists(self, resource):
        kind, rid = resource
        if rid == "*" or kind == "platform":
            return
        try:
            if kind == "dataset":
                self.store.descriptor(rid)
            elif kind == "project":
                if rid not in self.projects:
                    raise UnknownProject(f"no project {rid}")
            elif kind == "working_set":
                if rid not in self._working_sets:
                    raise UnknownWorkingSet(f"no working set {rid}")
            elif kind == "algorithm":
                self.store.algorithm(rid)
            elif kind == "subscription":
                if not any(s.sub_id == rid for s in self.hub.subscriptions()):
                    raise UnknownResource(f"no subscription {rid}")
        except (UnknownDataset, UnknownProject, UnknownWorkingSet, UnknownAlgorithm) as exc:
            raise UnknownResource(str(exc))

    # -- projects -------------------------------------------------------

    def create_project(self, name: str, actor: str) -> Project:
        self.acl.require(actor, "write", ("platform", "*"))
        proj = Project(name, actor)
        self.projects[proj.project_id] = proj
        self.acl.add_policy(Policy(actor, "admin", ("project", proj.project_id)))
        self.hub.publish("project_changed", {"project_id": proj.project_id, "actor": actor})
        return proj

    def list_projects(self, actor: str):
        return [p for p in self.projects.values()
                if self.acl.check(actor, "read", ("project", p.project_id)).allow]

    # -- datasets -------------------------------------------------------

    def create_dataset(self, descriptor: DatasetDescriptor, actor: str) -> DatasetVersion:
        if descriptor.project_id not in self.projects:
            raise UnknownProject(f"no project {descriptor.project_id}")
        self.acl.require(actor, "write", ("project", descriptor.project_id))
        descriptor.created_by = actor
        activity_id = new_id("act")
        v1 = self.store.create_dataset(descriptor, activity_id)
        now = utcnow()
        self.prov.record("create", actor, [],
                         [EntityRef("dataset_version", descriptor.dataset_id, 1)],
                         {"name": descriptor.name}, now, now, activity_id=activity_id)
        self._data_changed(descriptor.dataset_id, 1, actor)
        return v1

    def _append(self, dataset_id: str, records, actor: str, activity_id: str,
                emit: bool = True, base_version: int | None = None) -> DatasetVersion:
        with self.store.writer(dataset_id):
            head = self.store.head(dataset_id)
            base = base_version if base_version is not None else head.version
            index = dict(head.record_index)
            blobs = {}
            for r in records:
                index[r.record_id] = r.digest
                blobs[r.digest] = r.values
            nv = self.store.commit_index(dataset_id, base, index, blobs, activity_id)
        if emit:
            self._data_changed(dataset_id, nv.version, actor)
        return nv

    def append_records(self, dataset_id: str, base_version: int, records, actor: str) -> DatasetVersion:
        self.acl.require(actor, "write", ("dataset", dataset_id))
        desc = self.store.descriptor(dataset_id)
        bad = {}
        for r in records:
            problems = desc.schema.check_values(r.values)
            if problems:
                bad[r.record_id] = problems
        if bad:
            raise ValidationFailed(
                f"records failed schema validation: {sorted(bad)}", detail=bad)
        started = utcnow()
        activity_id = new_id("act")
        nv = self._append(dataset_id, records, actor, activity_id,
                          emit=False, base_version=base_version)
        self.prov.record(
            "edit", actor,
            [EntityRef("dataset_version", dataset_id, base_version)],
            [EntityRef("dataset_version", dataset_id, nv.version)],
            {"records": len(list(records))}, started, utcnow(), activity_id=activity_id)
        self._data_changed(dataset_id, nv.version, actor)
        return nv

    def read_records(self, dataset_id: str, version="head", filter_text: str | None = None,
                     actor: str = ""):
        self.acl.require(actor, "read", ("dataset", dataset_id))
        records = self.store.records_of(dataset_id, version)
        return _filter_records(records, filter_text)

    def list_datasets(self, actor: str, project_id: str | None = None,
                      study_type: str | None = None, region: GeoRegion | None = None):
        out = []
        for d in self.store.list_descriptors():
            if project_id is not None and d.project_id != project_id:
                continue
            if study_type is not None and d.study_type != study_type:
                continue
            if region is not None and not d.region.intersects(region):
                continue
            if not self.acl.check(actor, "read", ("dataset", d.dataset_id)).allow:
                continue
            out.append(d)
        return sorted(out, key=lambda d: d.dataset_id)

    def register_algorithm(self, entry: AlgorithmEntry, actor: str) -> str:
        self.acl.require(actor, "admin", ("platform", "*"))
        algo_id = self.store.register_algorithm(entry)
        self.hub.publish("algorithm_changed", {
            "algo_id": algo_id, "algorithm": entry.name,
            "actor": actor,
        })
        return algo_id

    # -- working sets ---------------------------------------------------

    def _ws(self, ws_id: str) -> WorkingSet:
        with self._ws_lock:
            ws = self._working_sets.get(ws_id)
        if ws is None or ws.state == "discarded":
            raise UnknownWorkingSet(f"no working set {ws_id}")
        return ws

    def create_working_set(self, pins, owner: str) -> WorkingSet:
        for dataset_id, version in pins:
            self.acl.require(owner, "read", ("dataset", dataset_id))
            self.store.version(dataset_id, version)  # NoSuchVersion if absent
        ws = WorkingSet(owner=owner, base=tuple((d, v) for d, v in pins))
        with self._ws_lock:
            self._working_sets[ws.ws_id] = ws
        return ws

    def _ws_authorize(self, ws: WorkingSet, actor: str, action: str):
        if actor == ws.owner:
            return
        self.acl.require(actor, action, ("working_set", ws.ws_id))

    def ws_write(self, ws_id: str, dataset_id: str, ops: dict, actor: str,
                 _skip_validation: bool = False):
        ws = self._ws(ws_id)
        if ws.state != "open":
            raise WorkingSetClosed(f"working set {ws_id} is {ws.state}")
        self._ws_authorize(ws, actor, "write")
        ws.pinned_version(dataset_id)
        desc = self.store.descriptor(dataset_id)
        bad = {}
        for rid, op in ops.items():
            if op.kind == "upsert":
                problems = desc.schema.check_values(op.record.values)
                if problems:
                    bad[rid] = problems
        if bad:
            raise ValidationFailed(f"overlay records failed validation: {sorted(bad)}",
                                   detail=bad)
        overlay = ws.overlay.setdefault(dataset_id, {})
        overlay.update(ops)  # last write per record id wins
        return self.diff(ws_id)

    def ws_read(self, ws_id: str, dataset_id: str, filter_text: str | None = None,
                actor: str = ""):
        ws = self._ws(ws_id)
        self._ws_authorize(ws, actor, "read")
        return _filter_records(self._ws_materialize(ws, dataset_id), filter_text)

    def _ws_materialize(self, ws: WorkingSet, dataset_id: str):
        version = ws.pinned_version(dataset_id)
        base = {r.record_id: r for r in self.store.records_of(dataset_id, version)}
        merged = workingset.apply_overlay(base, ws.overlay.get(dataset_id, {}))
        return sorted(merged.values(), key=lambda r: r.record_id)

    def diff(self, ws_id: str) -> dict:
        ws = self._ws(ws_id)
        out = {}
        for dataset_id, version in ws.base:
            overlay = ws.overlay.get(dataset_id, {})
            if not overlay:
                continue
            base_index = self.store.version(dataset_id, version).record_index
            d = workingset.compute_diff(base_index, overlay)
            if d["added"] or d["modified"] or d["deleted"]:
                out[dataset_id] = d
        return out

    def merge(self, ws_id: str, strategy: str, actor: str) -> dict:
        if strategy not in ("abort_on_conflict", "ours", "theirs"):
            raise ValidationFailed(f"unknown merge strategy {strategy!r}")
        ws = self._ws(ws_id)
        if ws.state != "open":
            raise WorkingSetClosed(f"working set {ws_id} is {ws.state}")
        affected = sorted(self.diff(ws_id))
        for dataset_id in affected:
            self.acl.require(actor, "write", ("dataset", dataset_id))
        started = utcnow()
        with ExitStack() as stack:
            for dataset_id in affected:  # dataset_id order avoids deadlock
                stack.enter_context(self.store.writer(dataset_id))
            plans = {}
            all_conflicts = {}
            for dataset_id in affected:
                base_index = self.store.version(dataset_id, ws.pinned_version(dataset_id)).record_index
                head = self.store.head(dataset_id)
                conflicts, ours, theirs, new_blobs = workingset.three_way(
                    base_index, head.record_index, ws.overlay.get(dataset_id, {}))
                if conflicts:
                    all_conflicts[dataset_id] = conflicts
                plans[dataset_id] = (head, ours, theirs, new_blobs)
            if strategy == "abort_on_conflict" and all_conflicts:
                return {"merged": False, "conflicts": all_conflicts, "new_versions": {}}
            new_versions = {}
            activity_id = new_id("act")
            for dataset_id in affected:
                head, ours, theirs, new_blobs = plans[dataset_id]
                index = ours if strategy in ("abort_on_conflict", "ours") else theirs
                if index == head.record_index:
                    continue  # e.g. theirs dropped every overlay entry
                nv = self.store.commit_index(dataset_id, head.version, index,
                                             new_blobs, activity_id)
                new_versions[dataset_id] = nv.version
        ws.state = "merged"
        if new_versions:
            self.prov.record(
                "merge", actor,
                [EntityRef("working_set", ws_id)]
                + [EntityRef("dataset_version", d, v) for d, v in ws.base],
                [EntityRef("dataset_version", d, v) for d, v in new_versions.items()],
                {"strategy": strategy}, started, utcnow(), activity_id=activity_id)
            for dataset_id, version in new_versions.items():
                self._data_changed(dataset_id, version, actor)
        return {"merged": True, "conflicts": all_conflicts, "new_versions": new_versions}

    def discard(self, ws_id: str, actor: str):
        ws = self._ws(ws_id)
        if ws.state != "open":
            raise WorkingSetClosed(f"working set {ws_id} is {ws.state}")
        if actor != ws.owner:
            self.acl.require(actor, "admin", ("working_set", ws.ws_id))
        ws.state = "discarded"

    def working_set(self, ws_id: str) -> WorkingSet:
        return self._ws(ws_id)

    # -- ingestion ------------------------------------------------------

    def register_source(self, source: ingest.SourceDescriptor, actor: str) -> str:
        desc = self.store.descriptor(source.target_dataset_id)  # UnknownDataset if absent
        self.acl.require(actor, "write", ("dataset", source.target_dataset_id))
        source.validate_against(desc.schema)
        self._sources[source.source_id] = source
        return source.source_id

    def list_sources(self, actor: str):
        return [s for s in self._sources.values()
                if self.acl.check(actor, "read", ("dataset", s.target_dataset_id)).allow]

    def source(self, source_id: str) -> ingest.SourceDescriptor:
        try:
            return self._sources[source_id]
        except KeyError:
            raise UnknownSource(f"no source {source_id}")

    def generate_plan(self, source_id: str) -> ingest.IngestPlan:
        plan = ingest.generate_plan(self.source(source_id))
        self._plans[plan.plan_id] = plan
        return plan

    def run_import(self, plan_id: str, actor: str) -> ingest.ImportReport:
        plan = self._plans.get(plan_id)
        if plan is None:
            raise UnknownSource(f"no plan {plan_id}")
        source = self.source(plan.source_id)
        self.acl.require(actor, "write", ("dataset", source.target_dataset_id))
        desc = self.store.descriptor(source.target_dataset_id)
        started = utcnow()
        data = ingest.fetch_bytes(source.uri)
        rows = ingest.parse_rows(data, source.format)
        records, rejected = ingest.map_and_validate(source, desc.schema, rows)
        inserted = updated = unchanged = 0
        changed = []
        with self.store.writer(source.target_dataset_id):
            head = self.store.head(source.target_dataset_id)
            for r in records:
                prev = head.record_index.get(r.record_id)
                if prev is None:
                    inserted += 1
                    changed.append(r)
                elif prev != r.digest:
                    updated += 1
                    changed.append(r)
                else:
                    unchanged += 1
            activity_id = new_id("act")
            new_version = None
            if changed:
                nv = self._append(source.target_dataset_id, changed, actor,
                                  activity_id, emit=False, base_version=head.version)
                new_version = nv.version
        ended = utcnow()
        out_version = new_version if new_version is not None else head.version
        self.prov.record(
            "import", actor,
            [EntityRef("dataset_version", source.target_dataset_id, head.version)],
            [EntityRef("dataset_version", source.target_dataset_id, out_version)],
            {"source_id": source.source_id, "plan_id": plan_id},
            started, ended, activity_id=activity_id)
        if new_version is not None:
            self._data_changed(source.target_dataset_id, new_version, actor)
        report = ingest.ImportReport(plan_id, len(records) + len(rejected),
                                     inserted, updated, unchanged, rejected, new_version)
        report.check_conservation()
        return report

    def export_dataset(self, dataset_id: str, version="head", fmt: str = "csv",
                       actor: str = "") -> bytes:
        self.acl.require(actor, "read", ("dataset", dataset_id))
        desc = self.store.descriptor(dataset_id)
        records = self.store.records_of(dataset_id, version)
        return ingest.export_records(desc.schema, records, fmt)

    # -- compute --------------------------------------------------------

    def register_backend(self, backend: Backend, actor: str):
        self.acl.require(actor, "admin", ("platform", "*"))
        self.scheduler.register_backend(backend)

    def register_runner(self, algo_name: str, fn):
        self._runners[algo_name] = fn

    def install_water_balance(self, actor: str) -> str:
        entry = AlgorithmEntry(
            name=watershed.WATER_BALANCE_NAME,
            version=watershed.WATER_BALANCE_VERSION,
            kind="model",
            param_schema=watershed.WATER_BALANCE_PARAMS,
        )
        algo_id = self.register_algorithm(entry, actor)
        self.register_runner(entry.name, watershed.water_balance_runner)
        return algo_id

    def submit_job(self, spec: JobSpec, actor: str):
        entry = self.store.algorithm(spec.algo_id)
        problems = entry.param_schema.check_values(spec.params)
        if problems:
            raise ValidationFailed("job params failed validation: " + "; ".join(problems),
                                   detail=problems, )
        self.acl.require(actor, "execute", ("algorithm", spec.algo_id))
        for pin in spec.inputs:
            if pin[0] == "dataset":
                self.store.version(pin[1], pin[2])
                self.acl.require(actor, "read", ("dataset", pin[1]))
            else:
                ws = self._ws(pin[1])
                self._ws_authorize(ws, actor, "read")
        spec.submitted_by = actor
        return self.scheduler.submit(spec)

    def job_status(self, job_id: str):
        return self.scheduler.job(job_id)

    def cancel_job(self, job_id: str, actor: str):
        job = self.scheduler.job(job_id)
        if actor != job.spec.submitted_by:
            self.acl.require(actor, "admin", ("platform", "*"))
        return self.scheduler.cancel(job_id)

    def _job_body(self, job, ctx):
        entry = self.store.algorithm(job.spec.algo_id)
        runner = self._runners.get(entry.name)
        if runner is None:
            raise UnknownAlgorithm(f"no runner installed for {entry.name!r}")
        io = _JobIO(self, job.spec)
        runner(ctx, io)
        ctx.check_cancelled()
        activity_id = new_id("act")
        job.activity_id = activity_id
        return io.commit(job.spec.submitted_by, activity_id)

    def _job_finished(self, job):
        if job.state != "succeeded":
            return
        entry = self.store.algorithm(job.spec.algo_id)
        inputs = [EntityRef("algorithm", job.spec.algo_id)]
        for pin in job.spec.inputs:
            if pin[0] == "dataset":
                inputs.append(EntityRef("dataset_version", pin[1], pin[2]))
            else:
                inputs.append(EntityRef("working_set", pin[1]))
        outputs = list(job.outputs) or [EntityRef("job", job.job_id)]
        self.prov.record(
            "job_run", job.spec.submitted_by, inputs, outputs,
            {"algorithm": entry.name, "job_id": job.job_id},
            job.started_at, job.ended_at,
            activity_id=getattr(job, "activity_id", None))
        for ref in job.outputs:
            if ref.kind == "dataset_version":
                self._data_changed(ref.id, ref.version, job.spec.submitted_by)

    # -- provenance queries ---------------------------------------------

    def lineage(self, entity: EntityRef, direction: str = "upstream",
                max_depth: int | None = None):
        return self.prov.lineage_json(entity, direction, max_depth)

    def lineage_dot(self, entity: EntityRef, direction: str = "upstream"):
        return self.prov.lineage_dot(entity, direction)

    def cumulative_results(self, region: GeoRegion, algo_name: str | None = None,
                           window=None):
        def region_of(dataset_id):
            try:
                return self.store.descriptor(dataset_id).region
            except UnknownDataset:
                return None

        return self.prov.cumulative_results(region, region_of, algo_name, window)

    # -- notifications --------------------------------------------------

    def subscribe(self, principal_id: str, predicate_text: str, channel: str = "feed",
                  webhook_url: str | None = None):
        return self.hub.subscribe(principal_id, predicate_text, channel, webhook_url)

    def feed(self, principal_id: str, since_event_id: int = 0, limit: int = 100):
        return self.hub.feed(principal_id, since_event_id, limit)

    # -- dashboard ------------------------------------------------------

    def dashboard_summary(self, project_id: str, actor: str) -> dict:
        if project_id not in self.projects:
            raise UnknownProject(f"no project {project_id}")
        self.acl.require(actor, "read", ("project", project_id))
        ds = [d for d in self.store.list_descriptors() if d.project_id == project_id]
        ds_ids = {d.dataset_id for d in ds}
        with self._ws_lock:
            open_ws = [w for w in self._working_sets.values()
                       if w.state == "open" and any(d in ds_ids for d, _ in w.base)]
        jobs_by_state: dict[str, int] = {}
        latest_runs = {}
        for job in self.scheduler.jobs():
            touches = any(
                (pin[0] == "dataset" and pin[1] in ds_ids) for pin in job.spec.inputs
            ) or any(o.kind == "dataset_version" and o.id in ds_ids for o in job.outputs)
            if not touches:
                continue
            jobs_by_state[job.state] = jobs_by_state.get(job.state, 0) + 1
            if job.state == "succeeded":
                for o in job.outputs:
                    if o.kind == "dataset_version" and o.id in ds_ids:
                        prev = latest_runs.get(o.id)
                        if prev is None or job.ended_at > prev.ended_at:
                            latest_runs[o.id] = job
        recent = [e.to_json() for e in self.hub.events()
                  if e.attrs.get("project_id") == project_id][-10:]
        return {
            "project_id": project_id,
            "datasets": len(ds),
            "dataset_list": [
                d.to_json()
                | {"head_version": self.store.head(d.dataset_id).version}
                for d in ds],
            "working_sets_open": len(open_ws),
            "jobs_by_state": jobs_by_state,
            "latest_model_runs": [
                {"dataset_id": ds_id, "job_id": j.job_id,
                 "ended_at": j.to_json()["ended_at"]}
                for ds_id, j in sorted(latest_runs.items())
            ],
            "recent_events": recent,
        }


def _filter_records(records, filter_text: str | None):
    if filter_text is None or filter_text.strip() == "":
        return list(records)
    node = parse_predicate(filter_text)
    return [r for r in records if evaluate(node, r.values)]
