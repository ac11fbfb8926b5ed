"""HTTP+JSON gateway over the platform facade.

Every response is an envelope ``{ok, data | error, request_id}``; inner
module errors map to stable codes and statuses (401 unauthenticated,
403 denied, 404 not found, 409 conflict, 422 validation, 500 other).
All endpoints live under ``/v1``; mutating calls need a
``Authorization: Bearer <token>`` header.
"""

from __future__ import annotations

import json
import uuid
from datetime import datetime, timezone

from fastapi import Depends, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response

from . import watershed
from .access import Policy
from .compute import Backend, JobSpec
from .coretypes import (
    AlgorithmEntry,
    DatasetDescriptor,
    GeoRegion,
    Record,
    Schema,
)
from .errors import (
    ConflictError,
    NotFoundError,
    PermissionDenied,
    PlatformError,
    Unauthenticated,
    ValidationError,
)
from .ingest import FieldMapping, SourceDescriptor
from .platform import Platform
from .provenance import EntityRef
from .workingset import OverlayOp

STATUS_BY_FAMILY = (
    (Unauthenticated, 401),
    (PermissionDenied, 403),
    (NotFoundError, 404),
    (ConflictError, 409),
    (ValidationError, 422),
)


def _status_for(exc: PlatformError) -> int:
    for family, status in STATUS_BY_FAMILY:
        if isinstance(exc, family):
            return status
    return 500


def ok(data, request_id: str, status: int = 200) -> JSONResponse:
    return JSONResponse({"ok": True, "data": data, "request_id": request_id},
                        status_code=status)


def fail(code: str, message: str, detail, request_id: str, status: int) -> JSONResponse:
    return JSONResponse(
        {"ok": False,
         "error": {"code": code, "message": message, "detail": detail},
         "request_id": request_id},
        status_code=status,
    )


def parse_iso(s: str) -> datetime:
    dt = datetime.fromisoformat(s.replace("Z", "+00:00"))
    return dt if dt.tzinfo else dt.replace(tzinfo=timezone.utc)


def coerce_values(schema: Schema, values: dict) -> dict:
    """JSON carries no timestamps; coerce per the dataset schema."""
    kinds = {f.name: f.kind for f in schema.fields}
    out = {}
    for k, v in values.items():
        kind = kinds.get(k)
        if kind == "timestamp" and isinstance(v, str):
            out[k] = parse_iso(v)
        elif kind == "float" and isinstance(v, int) and not isinstance(v, bool):
            out[k] = float(v)
        else:
            out[k] = v
    return out


def parse_bbox(bbox: str) -> GeoRegion:
    parts = [float(x) for x in bbox.split(",")]
    if len(parts) != 4:
        raise ValidationError("bbox must be min_lon,min_lat,max_lon,max_lat")
    return GeoRegion(*parts)


def create_app(platform: Platform) -> FastAPI:
    app = FastAPI(title="waterdesk", version="0.1.0")
    app.state.platform = platform

    def rid() -> str:
        return uuid.uuid4().hex[:16]

    @app.exception_handler(PlatformError)
    async def on_platform_error(request: Request, exc: PlatformError):
        return fail(exc.code, exc.message, exc.detail,
                    getattr(request.state, "request_id", rid()), _status_for(exc))

    @app.exception_handler(RequestValidationError)
    async def on_request_error(request: Request, exc: RequestValidationError):
        return fail("bad_request", "malformed request body", str(exc), rid(), 422)

    @app.exception_handler(json.JSONDecodeError)
    async def on_bad_json(request: Request, exc: json.JSONDecodeError):
        return fail("bad_request", "request body is not valid JSON", str(exc), rid(), 422)

    @app.exception_handler(KeyError)
    async def on_missing_key(request: Request, exc: KeyError):
        return fail("bad_request", f"missing required field {exc}", None, rid(), 422)

    @app.middleware("http")
    async def attach_request_id(request: Request, call_next):
        request.state.request_id = rid()
        response = await call_next(request)
        return response

    async def actor(request: Request) -> str:
        auth = request.headers.get("authorization", "")
        if not auth.lower().startswith("bearer "):
            raise Unauthenticated("missing bearer token")
        return platform.acl.resolve_token(auth[7:].strip())

    def _rid(request: Request) -> str:
        return getattr(request.state, "request_id", "?")

    # -- sessions & health ---------------------------------------------

    @app.get("/v1/health")
    async def health(request: Request):
        return ok({"status": "up", "version": "0.1.0"}, _rid(request))

    @app.post("/v1/sessions")
    async def create_session(request: Request):
        body = await request.json()
        tok = platform.authenticate(body.get("name", ""), body.get("secret", ""))
        return ok({
            "token": tok.token,
            "principal_id": tok.principal_id,
            "expires_at": tok.expires_at.isoformat(),
        }, _rid(request))

    # -- projects ------------------------------------------------------

    @app.get("/v1/projects")
    async def list_projects(request: Request, who: str = Depends(actor)):
        return ok([p.to_json() for p in platform.list_projects(who)], _rid(request))

    @app.post("/v1/projects")
    async def create_project(request: Request, who: str = Depends(actor)):
        body = await request.json()
        proj = platform.create_project(body["name"], who)
        return ok(proj.to_json(), _rid(request), 201)

    # -- datasets ------------------------------------------------------

    @app.get("/v1/datasets")
    async def list_datasets(request: Request, who: str = Depends(actor),
                            project_id: str | None = None,
                            study_type: str | None = None,
                            bbox: str | None = None):
        region = parse_bbox(bbox) if bbox else None
        items = platform.list_datasets(who, project_id, study_type, region)
        return ok([d.to_json()
                   | {"head_version": platform.store.head(d.dataset_id).version}
                   for d in items], _rid(request))

    @app.post("/v1/datasets")
    async def create_dataset(request: Request, who: str = Depends(actor)):
        body = await request.json()
        desc = DatasetDescriptor(
            name=body["name"],
            study_type=body["study_type"],
            schema=Schema.from_json(body["schema"]),
            project_id=body["project_id"],
            region=GeoRegion.from_json(body["region"]),
        )
        v1 = platform.create_dataset(desc, who)
        return ok({"descriptor": desc.to_json(), "version": v1.to_json()},
                  _rid(request), 201)

    @app.get("/v1/datasets/{dataset_id}/records")
    async def read_records(request: Request, dataset_id: str, who: str = Depends(actor),
                           version: str = "head", filter: str | None = None,
                           cursor: str | None = None, limit: int = 100):
        v = "head" if version == "head" else int(version)
        limit = max(1, min(limit, 1000))
        records = platform.read_records(dataset_id, v, filter, who)
        if cursor:
            records = [r for r in records if r.record_id > cursor]
        page = records[:limit]
        next_cursor = page[-1].record_id if len(records) > limit else None
        return ok({"records": [r.to_json() for r in page],
                   "next_cursor": next_cursor}, _rid(request))

    @app.post("/v1/datasets/{dataset_id}/records")
    async def append_records(request: Request, dataset_id: str, who: str = Depends(actor)):
        body = await request.json()
        schema = platform.store.descriptor(dataset_id).schema
        records = [Record(r["record_id"], coerce_values(schema, r["values"]))
                   for r in body["records"]]
        nv = platform.append_records(dataset_id, int(body["base_version"]), records, who)
        return ok(nv.to_json(), _rid(request), 201)

    @app.get("/v1/datasets/{dataset_id}/export")
    async def export_dataset(request: Request, dataset_id: str, who: str = Depends(actor),
                             format: str = "csv", version: str = "head"):
        v = "head" if version == "head" else int(version)
        data = platform.export_dataset(dataset_id, v, format, who)
        media = "text/csv" if format == "csv" else "application/x-ndjson"
        return Response(content=data, media_type=media)

    # -- sources & ingestion -------------------------------------------

    @app.get("/v1/sources")
    async def list_sources(request: Request, who: str = Depends(actor)):
        return ok([s.to_json() for s in platform.list_sources(who)], _rid(request))

    @app.post("/v1/sources")
    async def register_source(request: Request, who: str = Depends(actor)):
        body = await request.json()
        source = SourceDescriptor(
            uri=body["uri"],
            format=body["format"],
            field_map=tuple(
                FieldMapping(m["source_column"], m["schema_field"],
                             m.get("transform", "identity"),
                             m.get("timestamp_format"))
                for m in body["field_map"]
            ),
            key_fields=tuple(body["key_fields"]),
            target_dataset_id=body["target_dataset_id"],
        )
        sid = platform.register_source(source, who)
        return ok(source.to_json() | {"source_id": sid}, _rid(request), 201)

    @app.get("/v1/sources/{source_id}/plan")
    async def source_plan(request: Request, source_id: str, who: str = Depends(actor)):
        plan = platform.generate_plan(source_id)
        return ok(plan.to_json(), _rid(request))

    @app.post("/v1/sources/{source_id}/import")
    async def run_import(request: Request, source_id: str, who: str = Depends(actor)):
        plan = platform.generate_plan(source_id)
        report = platform.run_import(plan.plan_id, who)
        return ok(report.to_json(), _rid(request))

    # -- working sets --------------------------------------------------

    @app.get("/v1/working-sets")
    async def list_working_sets(request: Request, who: str = Depends(actor)):
        with platform._ws_lock:
            sets = [w for w in platform._working_sets.values()
                    if w.state != "discarded" and w.owner == who]
        return ok([w.to_json() for w in sets], _rid(request))

    @app.post("/v1/working-sets")
    async def create_working_set(request: Request, who: str = Depends(actor)):
        body = await request.json()
        pins = [(p["dataset_id"], int(p["version"])) for p in body["pins"]]
        ws = platform.create_working_set(pins, who)
        return ok(ws.to_json(), _rid(request), 201)

    @app.get("/v1/working-sets/{ws_id}")
    async def get_working_set(request: Request, ws_id: str, who: str = Depends(actor)):
        ws = platform.working_set(ws_id)
        return ok(ws.to_json(), _rid(request))

    @app.get("/v1/working-sets/{ws_id}/records")
    async def ws_records(request: Request, ws_id: str, dataset_id: str,
                         who: str = Depends(actor), filter: str | None = None):
        records = platform.ws_read(ws_id, dataset_id, filter, who)
        return ok({"records": [r.to_json() for r in records]}, _rid(request))

    @app.post("/v1/working-sets/{ws_id}/records")
    async def ws_write(request: Request, ws_id: str, who: str = Depends(actor)):
        body = await request.json()
        dataset_id = body["dataset_id"]
        schema = platform.store.descriptor(dataset_id).schema
        ops = {}
        for op in body["ops"]:
            if op["kind"] == "delete":
                ops[op["record_id"]] = OverlayOp("delete")
            else:
                ops[op["record_id"]] = OverlayOp(
                    "upsert", Record(op["record_id"], coerce_values(schema, op["values"])))
        diff = platform.ws_write(ws_id, dataset_id, ops, who)
        return ok(_diff_json(diff), _rid(request))

    @app.get("/v1/working-sets/{ws_id}/diff")
    async def ws_diff(request: Request, ws_id: str, who: str = Depends(actor)):
        ws = platform.working_set(ws_id)
        platform._ws_authorize(ws, who, "read")
        return ok(_diff_json(platform.diff(ws_id)), _rid(request))

    @app.post("/v1/working-sets/{ws_id}/merge")
    async def ws_merge(request: Request, ws_id: str, who: str = Depends(actor)):
        body = await request.json()
        result = platform.merge(ws_id, body.get("strategy", "abort_on_conflict"), who)
        if not result["merged"]:
            return fail("merge_conflicts", "merge aborted on conflicts",
                        {"conflicts": result["conflicts"]}, _rid(request), 409)
        return ok(result, _rid(request))

    @app.delete("/v1/working-sets/{ws_id}")
    async def ws_discard(request: Request, ws_id: str, who: str = Depends(actor)):
        platform.discard(ws_id, who)
        return ok({"ws_id": ws_id, "state": "discarded"}, _rid(request))

    # -- subscriptions & feed ------------------------------------------

    @app.get("/v1/subscriptions")
    async def list_subscriptions(request: Request, who: str = Depends(actor)):
        return ok([s.to_json() for s in platform.hub.subscriptions(who)], _rid(request))

    @app.post("/v1/subscriptions")
    async def subscribe(request: Request, who: str = Depends(actor)):
        body = await request.json()
        sub = platform.subscribe(who, body["predicate"], body.get("channel", "feed"),
                                 body.get("webhook_url"))
        return ok(sub.to_json(), _rid(request), 201)

    @app.get("/v1/events/feed")
    async def feed(request: Request, who: str = Depends(actor),
                   since: int = 0, limit: int = 100):
        items = platform.feed(who, since, max(1, min(limit, 1000)))
        return ok([d.to_json() for d in items], _rid(request))

    # -- jobs ----------------------------------------------------------

    @app.get("/v1/jobs")
    async def list_jobs(request: Request, who: str = Depends(actor)):
        return ok([j.to_json() for j in platform.scheduler.jobs()], _rid(request))

    @app.post("/v1/jobs")
    async def submit_job(request: Request, who: str = Depends(actor)):
        body = await request.json()
        inputs = []
        for pin in body.get("inputs", []):
            if pin["kind"] == "dataset":
                inputs.append(("dataset", pin["dataset_id"], int(pin["version"])))
            else:
                inputs.append(("working_set", pin["ws_id"]))
        spec = JobSpec(
            algo_id=body["algo_id"],
            inputs=tuple(inputs),
            params=body.get("params", {}),
            submitted_by=who,
            backend_hint=body.get("backend_hint"),
            priority=int(body.get("priority", 0)),
        )
        job = platform.submit_job(spec, who)
        return ok(job.to_json(), _rid(request), 201)

    @app.get("/v1/jobs/{job_id}")
    async def job_status(request: Request, job_id: str, who: str = Depends(actor)):
        return ok(platform.job_status(job_id).to_json(), _rid(request))

    @app.post("/v1/jobs/{job_id}/cancel")
    async def cancel_job(request: Request, job_id: str, who: str = Depends(actor)):
        return ok(platform.cancel_job(job_id, who).to_json(), _rid(request))

    # -- provenance ----------------------------------------------------

    @app.get("/v1/provenance/lineage")
    async def lineage(request: Request, who: str = Depends(actor),
                      kind: str = "dataset_version", id: str = "",
                      version: int | None = None, direction: str = "upstream",
                      max_depth: int | None = None, format: str = "json"):
        ref = EntityRef(kind, id, version)
        if format == "dot":
            return Response(content=platform.lineage_dot(ref, direction),
                            media_type="text/vnd.graphviz")
        return ok(platform.lineage(ref, direction, max_depth), _rid(request))

    @app.get("/v1/provenance/cumulative")
    async def cumulative(request: Request, who: str = Depends(actor),
                         bbox: str = "", algo: str | None = None):
        window = None
        frm = request.query_params.get("from")
        to = request.query_params.get("to")
        if frm or to:
            window = (parse_iso(frm) if frm else None, parse_iso(to) if to else None)
        results = platform.cumulative_results(parse_bbox(bbox), algo, window)
        return ok([
            {"activity": a.to_json(), "output": e.to_json()} for a, e in results
        ], _rid(request))

    # -- algorithms & models -------------------------------------------

    @app.get("/v1/algorithms")
    async def list_algorithms(request: Request, who: str = Depends(actor),
                              kind: str | None = None):
        return ok([e.to_json() for e in platform.store.list_algorithms(kind)],
                  _rid(request))

    @app.post("/v1/models/watershed/simulate")
    async def simulate(request: Request, who: str = Depends(actor)):
        body = await request.json()
        catchment = watershed.Catchment.from_json(body["catchment"])
        weather = [
            watershed.DailyWeather(parse_iso(w["date"]), float(w["precip_mm"]),
                                   float(w["pet_mm"]))
            for w in body["weather"]
        ]
        baseline = watershed.simulate(catchment, weather)
        data = {"baseline": [s.to_json() for s in baseline]}
        if body.get("scenario") is not None:
            scenario = watershed.BmpScenario.from_json(body["scenario"])
            scen_states = watershed.simulate(catchment, weather, scenario)
            data["scenario"] = [s.to_json() for s in scen_states]
            data["report"] = watershed.compare(baseline, scen_states).to_json()
        return ok(data, _rid(request))

    @app.post("/v1/models/watershed/compare")
    async def model_compare(request: Request, who: str = Depends(actor)):
        body = await request.json()
        report = watershed.compare(_states_from_json(body["baseline"]),
                                   _states_from_json(body["scenario"]))
        return ok(report.to_json(), _rid(request))

    # -- dashboard & admin ---------------------------------------------

    @app.get("/v1/dashboard/{project_id}")
    async def dashboard(request: Request, project_id: str, who: str = Depends(actor)):
        return ok(platform.dashboard_summary(project_id, who), _rid(request))

    @app.post("/v1/admin/policies")
    async def add_policy(request: Request, who: str = Depends(actor)):
        body = await request.json()
        policy = Policy(
            principal_id=body["principal_id"],
            role=body["role"],
            resource=(body["resource"]["kind"], body["resource"].get("id", "*")),
            effect=body.get("effect", "allow"),
        )
        pid = platform.grant(policy, who)
        return ok({"policy_id": pid}, _rid(request), 201)

    @app.post("/v1/admin/backends")
    async def add_backend(request: Request, who: str = Depends(actor)):
        body = await request.json()
        backend = Backend(body["name"], int(body["capacity"]), body.get("kind", "local"))
        platform.register_backend(backend, who)
        return ok({"name": backend.name, "capacity": backend.capacity,
                   "kind": backend.kind}, _rid(request), 201)

    @app.post("/v1/admin/principals")
    async def add_principal(request: Request, who: str = Depends(actor)):
        body = await request.json()
        p = platform.add_principal(body["name"], who, body.get("kind", "user"),
                                   body.get("secret"), tuple(body.get("member_of", ())))
        return ok(p.to_json(), _rid(request), 201)

    @app.post("/v1/admin/algorithms")
    async def register_algorithm(request: Request, who: str = Depends(actor)):
        body = await request.json()
        if body.get("builtin") == "water-balance":
            algo_id = platform.install_water_balance(who)
            return ok({"algo_id": algo_id}, _rid(request), 201)
        entry = AlgorithmEntry(
            name=body["name"], version=body["version"], kind=body["kind"],
            param_schema=Schema.from_json(body["param_schema"]),
        )
        algo_id = platform.register_algorithm(entry, who)
        return ok({"algo_id": algo_id}, _rid(request), 201)

    return app


def _diff_json(diff: dict) -> dict:
    from .workingset import changeset_json

    return changeset_json(diff)


def _states_from_json(items):
    out = []
    for s in items:
        loads = s.get("loads_kg")
        if loads is None:
            loads = {k[:-3]: float(v) for k, v in s.items()
                     if k.endswith("_kg") and isinstance(v, (int, float))}
        out.append(watershed.DailyState(
            parse_iso(s["date"]), float(s["runoff_mm"]), float(s["et_mm"]),
            float(s["percolation_mm"]), float(s["soil_storage_mm"]),
            {k: float(v) for k, v in loads.items()},
        ))
    return out
