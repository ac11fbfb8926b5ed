"""Administration and automation CLI.

Every network command talks only to the HTTP API; ``serve`` hosts it.
Exit codes: 0 success, 1 domain error reported by the server, 2 usage
error.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import httpx

DEFAULT_SERVER = "http://127.0.0.1:8700"
TOKEN_PATH = Path.home() / ".waterdesk" / "token"


class Client:
    def __init__(self, server: str, output: str, token_path: Path = TOKEN_PATH):
        self.server = server.rstrip("/")
        self.output = output
        self.token_path = token_path

    def token(self) -> str | None:
        try:
            return self.token_path.read_text().strip()
        except OSError:
            return None

    def save_token(self, token: str):
        self.token_path.parent.mkdir(parents=True, exist_ok=True)
        self.token_path.touch(exist_ok=True)
        self.token_path.chmod(0o600)
        self.token_path.write_text(token)

    def request(self, method: str, path: str, json_body=None, params=None,
                raw: bool = False):
        headers = {}
        tok = self.token()
        if tok:
            headers["Authorization"] = f"Bearer {tok}"
        try:
            resp = httpx.request(method, self.server + path, json=json_body,
                                 params=params, headers=headers, timeout=60.0)
        except httpx.HTTPError as exc:
            click.echo(f"error: cannot reach server: {exc}", err=True)
            sys.exit(1)
        if raw:
            if resp.status_code >= 400:
                click.echo(f"error: {resp.status_code}: {resp.text}", err=True)
                sys.exit(1)
            return resp.content
        envelope = resp.json()
        if not envelope.get("ok"):
            err = envelope.get("error", {})
            click.echo(f"error: {err.get('code')}: {err.get('message')}", err=True)
            sys.exit(1)
        return envelope["data"]

    def emit(self, data):
        """json mode prints line-delimited JSON; table mode aligns columns."""
        if self.output == "json":
            items = data if isinstance(data, list) else [data]
            for item in items:
                click.echo(json.dumps(item, sort_keys=True))
            return
        items = data if isinstance(data, list) else [data]
        if not items:
            click.echo("(empty)")
            return
        if all(isinstance(i, dict) for i in items):
            keys = list(items[0].keys())
            widths = [max(len(str(k)), max(len(_cell(i.get(k))) for i in items))
                      for k in keys]
            click.echo("  ".join(k.ljust(w) for k, w in zip(keys, widths)))
            for i in items:
                click.echo("  ".join(_cell(i.get(k)).ljust(w) for k, w in zip(keys, widths)))
        else:
            for i in items:
                click.echo(str(i))


def _cell(v) -> str:
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True)
    return str(v)


@click.group()
@click.option("--server", default=None, help="API base url (env IENV_SERVER)")
@click.option("--output", type=click.Choice(["table", "json"]), default="table")
@click.pass_context
def main(ctx, server, output):
    """Surface-water data platform tooling."""
    url = server or os.environ.get("IENV_SERVER") or DEFAULT_SERVER
    ctx.obj = Client(url, output)


# -- serve --------------------------------------------------------------

@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8700, type=int)
def serve(config_path, host, port):
    """Run the API server (in-memory storage; seeded from config)."""
    import uvicorn
    import yaml

    from .api import create_app
    from .platform import Platform, PlatformConfig

    raw = {}
    if config_path:
        raw = yaml.safe_load(Path(config_path).read_text()) or {}
    platform = Platform(PlatformConfig.from_dict(raw))
    seed = raw.get("seed", {})
    admin = seed.get("admin")
    if admin:
        p = platform.bootstrap_admin(admin["name"], admin["secret"])
        if seed.get("water_balance", True):
            platform.install_water_balance(p.principal_id)
    host = raw.get("host", host)
    port = int(raw.get("port", port))
    uvicorn.run(create_app(platform), host=host, port=port, log_level="warning")


# -- login --------------------------------------------------------------

@main.command()
@click.option("--name", required=True)
@click.option("--secret", prompt=True, hide_input=True)
@click.pass_obj
def login(client: Client, name, secret):
    data = client.request("POST", "/v1/sessions", {"name": name, "secret": secret})
    client.save_token(data["token"])
    client.emit({"principal_id": data["principal_id"], "expires_at": data["expires_at"]})


# -- datasets -----------------------------------------------------------

@main.group()
def ds():
    """Dataset operations."""


@ds.command("list")
@click.option("--project", "project_id", default=None)
@click.option("--study-type", default=None)
@click.option("--bbox", default=None, help="min_lon,min_lat,max_lon,max_lat")
@click.pass_obj
def ds_list(client: Client, project_id, study_type, bbox):
    params = {k: v for k, v in
              [("project_id", project_id), ("study_type", study_type), ("bbox", bbox)]
              if v is not None}
    client.emit(client.request("GET", "/v1/datasets", params=params))


@ds.command("create")
@click.option("--name", required=True)
@click.option("--project", "project_id", required=True)
@click.option("--study-type", required=True)
@click.option("--schema-json", required=True, help='[{"name":..,"kind":..,"required":..}]')
@click.option("--bbox", required=True, help="min_lon,min_lat,max_lon,max_lat")
@click.pass_obj
def ds_create(client: Client, name, project_id, study_type, schema_json, bbox):
    lo, la, ho, ha = (float(x) for x in bbox.split(","))
    body = {
        "name": name,
        "project_id": project_id,
        "study_type": study_type,
        "schema": json.loads(schema_json),
        "region": {"min_lon": lo, "min_lat": la, "max_lon": ho, "max_lat": ha},
    }
    client.emit(client.request("POST", "/v1/datasets", body))


@ds.command("export")
@click.argument("dataset_id")
@click.option("--version", default="head")
@click.option("--format", "fmt", type=click.Choice(["csv", "json-lines"]), default="csv")
@click.option("--out", type=click.Path(), default=None)
@click.pass_obj
def ds_export(client: Client, dataset_id, version, fmt, out):
    data = client.request("GET", f"/v1/datasets/{dataset_id}/export",
                          params={"version": version, "format": fmt}, raw=True)
    if out:
        Path(out).write_bytes(data)
        click.echo(out)
    else:
        sys.stdout.buffer.write(data)


# -- ingestion ----------------------------------------------------------

@main.group()
def ingest():
    """Source registration and imports."""


@ingest.command("register")
@click.option("--spec-json", required=True,
              help='{"uri":..,"format":..,"field_map":[..],"key_fields":[..],"target_dataset_id":..}')
@click.pass_obj
def ingest_register(client: Client, spec_json):
    client.emit(client.request("POST", "/v1/sources", json.loads(spec_json)))


@ingest.command("plan")
@click.argument("source_id")
@click.pass_obj
def ingest_plan(client: Client, source_id):
    client.emit(client.request("GET", f"/v1/sources/{source_id}/plan"))


@ingest.command("run")
@click.argument("source_id")
@click.pass_obj
def ingest_run(client: Client, source_id):
    client.emit(client.request("POST", f"/v1/sources/{source_id}/import"))


# -- working sets -------------------------------------------------------

@main.group()
def ws():
    """What-if working sets."""


@ws.command("create")
@click.option("--pin", "pins", multiple=True, required=True,
              help="dataset_id:version, repeatable")
@click.pass_obj
def ws_create(client: Client, pins):
    body = {"pins": [{"dataset_id": p.rsplit(":", 1)[0],
                      "version": int(p.rsplit(":", 1)[1])} for p in pins]}
    client.emit(client.request("POST", "/v1/working-sets", body))


@ws.command("write")
@click.argument("ws_id")
@click.argument("dataset_id")
@click.option("--ops-json", required=True,
              help='[{"record_id":..,"kind":"upsert|delete","values":{..}}]')
@click.pass_obj
def ws_write(client: Client, ws_id, dataset_id, ops_json):
    body = {"dataset_id": dataset_id, "ops": json.loads(ops_json)}
    client.emit(client.request("POST", f"/v1/working-sets/{ws_id}/records", body))


@ws.command("diff")
@click.argument("ws_id")
@click.pass_obj
def ws_diff(client: Client, ws_id):
    client.emit(client.request("GET", f"/v1/working-sets/{ws_id}/diff"))


@ws.command("merge")
@click.argument("ws_id")
@click.option("--strategy", type=click.Choice(["abort_on_conflict", "ours", "theirs"]),
              default="abort_on_conflict")
@click.pass_obj
def ws_merge(client: Client, ws_id, strategy):
    client.emit(client.request("POST", f"/v1/working-sets/{ws_id}/merge",
                               {"strategy": strategy}))


@ws.command("discard")
@click.argument("ws_id")
@click.pass_obj
def ws_discard(client: Client, ws_id):
    client.emit(client.request("DELETE", f"/v1/working-sets/{ws_id}"))


# -- jobs ---------------------------------------------------------------

@main.group()
def job():
    """Job submission and tracking."""


@job.command("submit")
@click.option("--algo-id", required=True)
@click.option("--pin", "pins", multiple=True,
              help="dataset:ID:VERSION or ws:WS_ID, repeatable")
@click.option("--params-json", default="{}")
@click.option("--backend", default=None)
@click.option("--priority", default=0, type=int)
@click.option("--wait/--no-wait", default=False)
@click.pass_obj
def job_submit(client: Client, algo_id, pins, params_json, backend, priority, wait):
    inputs = []
    for p in pins:
        parts = p.split(":")
        if parts[0] == "dataset":
            inputs.append({"kind": "dataset", "dataset_id": parts[1],
                           "version": int(parts[2])})
        elif parts[0] == "ws":
            inputs.append({"kind": "working_set", "ws_id": parts[1]})
        else:
            raise click.UsageError(f"bad pin {p!r}")
    body = {"algo_id": algo_id, "inputs": inputs, "params": json.loads(params_json),
            "backend_hint": backend, "priority": priority}
    data = client.request("POST", "/v1/jobs", body)
    if wait:
        import time

        while data["state"] in ("queued", "running"):
            time.sleep(0.2)
            data = client.request("GET", f"/v1/jobs/{data['job_id']}")
    client.emit(data)


@job.command("status")
@click.argument("job_id")
@click.pass_obj
def job_status(client: Client, job_id):
    client.emit(client.request("GET", f"/v1/jobs/{job_id}"))


@job.command("cancel")
@click.argument("job_id")
@click.pass_obj
def job_cancel(client: Client, job_id):
    client.emit(client.request("POST", f"/v1/jobs/{job_id}/cancel"))


# -- subscriptions ------------------------------------------------------

@main.group()
def sub():
    """Notification subscriptions."""


@sub.command("add")
@click.option("--predicate", required=True)
@click.option("--channel", type=click.Choice(["feed", "webhook"]), default="feed")
@click.option("--webhook-url", default=None)
@click.pass_obj
def sub_add(client: Client, predicate, channel, webhook_url):
    body = {"predicate": predicate, "channel": channel, "webhook_url": webhook_url}
    client.emit(client.request("POST", "/v1/subscriptions", body))


@sub.command("list")
@click.pass_obj
def sub_list(client: Client):
    client.emit(client.request("GET", "/v1/subscriptions"))


@sub.command("feed")
@click.option("--since", default=0, type=int)
@click.option("--limit", default=100, type=int)
@click.pass_obj
def sub_feed(client: Client, since, limit):
    client.emit(client.request("GET", "/v1/events/feed",
                               params={"since": since, "limit": limit}))


# -- provenance ---------------------------------------------------------

@main.group()
def prov():
    """Lineage and cumulative-results queries."""


@prov.command("lineage")
@click.option("--kind", default="dataset_version")
@click.option("--id", "entity_id", required=True)
@click.option("--version", default=None, type=int)
@click.option("--direction", type=click.Choice(["upstream", "downstream"]),
              default="upstream")
@click.option("--dot/--no-dot", default=False)
@click.pass_obj
def prov_lineage(client: Client, kind, entity_id, version, direction, dot):
    params = {"kind": kind, "id": entity_id, "direction": direction}
    if version is not None:
        params["version"] = version
    if dot:
        params["format"] = "dot"
        sys.stdout.buffer.write(
            client.request("GET", "/v1/provenance/lineage", params=params, raw=True))
    else:
        client.emit(client.request("GET", "/v1/provenance/lineage", params=params))


@prov.command("cumulative")
@click.option("--bbox", required=True)
@click.option("--algo", default=None)
@click.option("--from", "frm", default=None)
@click.option("--to", default=None)
@click.pass_obj
def prov_cumulative(client: Client, bbox, algo, frm, to):
    params = {"bbox": bbox}
    for k, v in (("algo", algo), ("from", frm), ("to", to)):
        if v is not None:
            params[k] = v
    client.emit(client.request("GET", "/v1/provenance/cumulative", params=params))


# -- admin --------------------------------------------------------------

@main.group()
def admin():
    """User, policy and backend administration."""


@admin.command("user")
@click.option("--name", required=True)
@click.option("--secret", default=None)
@click.option("--kind", type=click.Choice(["user", "team", "service"]), default="user")
@click.option("--member-of", "member_of", multiple=True)
@click.pass_obj
def admin_user(client: Client, name, secret, kind, member_of):
    body = {"name": name, "secret": secret, "kind": kind, "member_of": list(member_of)}
    client.emit(client.request("POST", "/v1/admin/principals", body))


@admin.command("grant")
@click.option("--principal", "principal_id", required=True)
@click.option("--role", type=click.Choice(["reader", "writer", "admin", "executor"]),
              required=True)
@click.option("--resource", required=True, help="kind:id (id may be *)")
@click.option("--effect", type=click.Choice(["allow", "deny"]), default="allow")
@click.pass_obj
def admin_grant(client: Client, principal_id, role, resource, effect):
    kind, _, rid = resource.partition(":")
    body = {"principal_id": principal_id, "role": role,
            "resource": {"kind": kind, "id": rid or "*"}, "effect": effect}
    client.emit(client.request("POST", "/v1/admin/policies", body))


@admin.command("backend")
@click.option("--name", required=True)
@click.option("--capacity", required=True, type=int)
@click.option("--kind", type=click.Choice(["local", "external-stub"]), default="local")
@click.pass_obj
def admin_backend(client: Client, name, capacity, kind):
    client.emit(client.request("POST", "/v1/admin/backends",
                               {"name": name, "capacity": capacity, "kind": kind}))


@admin.command("install-water-balance")
@click.pass_obj
def admin_install_wb(client: Client):
    client.emit(client.request("POST", "/v1/admin/algorithms",
                               {"builtin": "water-balance"}))


# -- model --------------------------------------------------------------

@main.group()
def model():
    """Watershed model convenience commands."""


@model.command("simulate")
@click.option("--catchment", "catchment_path", type=click.Path(exists=True), required=True)
@click.option("--weather", "weather_path", type=click.Path(exists=True), required=True)
@click.option("--scenario", "scenario_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="write CSVs and figures here")
@click.pass_obj
def model_simulate(client: Client, catchment_path, weather_path, scenario_path, out_dir):
    body = {
        "catchment": json.loads(Path(catchment_path).read_text()),
        "weather": json.loads(Path(weather_path).read_text()),
    }
    if scenario_path:
        body["scenario"] = json.loads(Path(scenario_path).read_text())
    data = client.request("POST", "/v1/models/watershed/simulate", body)
    if out_dir and "scenario" in data:
        from .api import _states_from_json
        from .reporting import write_comparison_bundle

        paths = write_comparison_bundle(
            _states_from_json(data["baseline"]), _states_from_json(data["scenario"]),
            out_dir)
        client.emit({"written": [str(p) for p in paths],
                     "report": data.get("report")})
    else:
        client.emit(data)


@model.command("report")
@click.option("--baseline", "baseline_path", type=click.Path(exists=True), required=True)
@click.option("--scenario", "scenario_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_obj
def model_report(client: Client, baseline_path, scenario_path, out_dir):
    """Render report card CSV and figures from two saved state series."""
    from .api import _states_from_json
    from .reporting import write_comparison_bundle

    baseline = _states_from_json(json.loads(Path(baseline_path).read_text()))
    scenario = _states_from_json(json.loads(Path(scenario_path).read_text()))
    paths = write_comparison_bundle(baseline, scenario, out_dir)
    client.emit({"written": [str(p) for p in paths]})


if __name__ == "__main__":
    main()
