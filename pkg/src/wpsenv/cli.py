"""Operator command line.

Every subcommand except `serve` talks to a running gateway over its public
REST surface; nothing here reaches into module internals. Connection
settings come from WPSENV_URL and WPSENV_TOKEN (or --url/--token).

Exit codes: 0 success, 1 validation, 2 network or protocol trouble,
3 remote fault.
"""

from __future__ import annotations

import json
import sys
import time

import click
import requests

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NETWORK = 2
EXIT_REMOTE = 3


class Client:
    def __init__(self, url: str, token: str):
        self.url = url.rstrip("/")
        self.session = requests.Session()
        if token:
            self.session.headers["Authorization"] = f"Bearer {token}"

    def call(self, method: str, path: str, **kwargs):
        try:
            resp = self.session.request(method, self.url + path, timeout=60, **kwargs)
        except requests.RequestException as exc:
            click.echo(f"error: cannot reach {self.url}: {exc}", err=True)
            sys.exit(EXIT_NETWORK)
        if resp.status_code >= 400:
            try:
                body = resp.json()
                reason = body.get("reason", resp.text)
                code = body.get("error", "")
            except ValueError:
                reason, code = resp.text.strip(), ""
            click.echo(f"error: {reason}", err=True)
            if code in ("remote_fault",):
                sys.exit(EXIT_REMOTE)
            if resp.status_code in (502,):
                sys.exit(EXIT_REMOTE)
            sys.exit(EXIT_VALIDATION)
        return resp


def _client(ctx: click.Context) -> Client:
    return Client(ctx.obj["url"], ctx.obj["token"])


@click.group()
@click.option("--url", envvar="WPSENV_URL", default="http://127.0.0.1:8080", show_default=True)
@click.option("--token", envvar="WPSENV_TOKEN", default="")
@click.pass_context
def main(ctx, url, token):
    """Service orchestration environment client."""
    ctx.ensure_object(dict)
    ctx.obj["url"] = url
    ctx.obj["token"] = token


@main.command()
def serve():
    """Run the gateway in the foreground using WPSENV_* configuration."""
    from .config import ApiConfig
    from .env import Environment
    from .gateway import GatewayServer

    config = ApiConfig.from_env()
    server = GatewayServer(Environment(config))
    click.echo(f"serving on {server.base_url} (data dir {config.data_dir})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()


@main.group()
def svc():
    """Service catalog operations."""


@svc.command("list")
@click.option("--query", default="")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def svc_list(ctx, query, as_json):
    services = _client(ctx).call("GET", "/api/services", params={"query": query}).json()
    if as_json:
        click.echo(json.dumps(services, indent=2))
        return
    for s in services:
        ins = ", ".join(p["identifier"] for p in s["inputs"])
        click.echo(f"{s['local_id']:24} {s['wrapper_name']:20} [{ins}]")


@svc.command("register")
@click.option("--endpoint", required=True)
@click.option("--identifier", required=True)
@click.option("--name", required=True)
@click.option("--description", default="")
@click.option("--widgets", "widgets_path", type=click.Path(exists=True), required=True,
              help="JSON file: {param_id: {widget, human_name, human_description}}")
@click.option("--wrapper", required=True)
@click.pass_context
def svc_register(ctx, endpoint, identifier, name, description, widgets_path, wrapper):
    client = _client(ctx)
    with open(widgets_path, encoding="utf-8") as fh:
        widget_spec = json.load(fh)
    draft = client.call("POST", "/api/services", json={
        "step": "begin", "display_name": name,
        "description": description, "endpoint": endpoint,
    }).json()
    draft_id = draft["draft_id"]
    client.call("POST", "/api/services", json={"step": "list", "draft_id": draft_id})
    selected = client.call("POST", "/api/services", json={
        "step": "select", "draft_id": draft_id, "identifier": identifier,
    }).json()
    bindings = []
    for p in selected["inputs"] + selected["outputs"]:
        spec = widget_spec.get(p["identifier"], {})
        bindings.append({
            "param_id": p["identifier"],
            "widget": spec.get("widget", {"kind": "edit"}),
            "human_name": spec.get("human_name", p.get("title", "")),
            "human_description": spec.get("human_description", ""),
        })
    result = client.call("POST", "/api/services", json={
        "step": "finalize", "draft_id": draft_id,
        "bindings": bindings, "wrapper_name": wrapper,
    }).json()
    click.echo(result["local_id"])


def _parse_kv(pairs) -> dict:
    values = {}
    for pair in pairs:
        if "=" not in pair:
            click.echo(f"error: bad --in {pair!r}, expected k=v", err=True)
            sys.exit(EXIT_VALIDATION)
        k, v = pair.split("=", 1)
        values[k] = v
    return values


def _finish(client: Client, instance: dict, as_json: bool) -> None:
    status = instance["status"]["state"]
    if as_json:
        click.echo(json.dumps(instance, indent=2))
    else:
        click.echo(f"{instance['id']} {status}")
        if status == "failed":
            click.echo(instance["status"].get("message", ""), err=True)
    if status == "failed":
        message = instance["status"].get("message", "")
        sys.exit(EXIT_REMOTE if "remote" in message.lower() else EXIT_VALIDATION)


def _run_service(ctx, service, pairs, is_async, as_json):
    client = _client(ctx)
    values = _parse_kv(pairs)
    mode = "async" if is_async else "sync"
    instance = client.call("POST", "/api/executions", json={
        "service_id": service, "values": values, "mode": mode,
    }).json()
    if is_async:
        click.echo(instance["id"] if not as_json else json.dumps(instance, indent=2))
        return
    # sync mode: the POST already ran to completion; print log then outcome
    log = client.call("GET", f"/api/executions/{instance['id']}/log").json()
    for entry in log["log"]:
        click.echo(f"[{entry['level']}] {entry['text']}", err=True)
    _finish(client, instance, as_json)


@main.command()
@click.option("--service", required=True)
@click.option("--in", "pairs", multiple=True, metavar="K=V")
@click.option("--async", "is_async", is_flag=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def run(ctx, service, pairs, is_async, as_json):
    """Execute a registered service."""
    _run_service(ctx, service, pairs, is_async, as_json)


@main.group()
def scenario():
    """Scenario publication and execution."""


@scenario.command("publish")
@click.argument("package", type=click.Path(exists=True))
@click.pass_context
def scenario_publish(ctx, package):
    with open(package, encoding="utf-8") as fh:
        body = json.load(fh)
    result = _client(ctx).call("POST", "/api/scenarios", json=body).json()
    click.echo(result["local_id"])


@scenario.command("run")
@click.argument("service_id")
@click.option("--in", "pairs", multiple=True, metavar="K=V")
@click.option("--async", "is_async", is_flag=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def scenario_run(ctx, service_id, pairs, is_async, as_json):
    _run_service(ctx, service_id, pairs, is_async, as_json)


@main.command()
@click.argument("instance_id")
@click.option("--follow", is_flag=True)
@click.pass_context
def logs(ctx, instance_id, follow):
    """Print an execution instance's log."""
    client = _client(ctx)
    seen = 0
    while True:
        doc = client.call("GET", f"/api/executions/{instance_id}/log").json()
        for entry in doc["log"][seen:]:
            click.echo(f"[{entry['level']}] {entry['text']}")
        seen = len(doc["log"])
        if not follow:
            return
        inst = client.call("GET", f"/api/executions/{instance_id}").json()
        if inst["status"]["state"] in ("succeeded", "failed"):
            click.echo(f"-- {inst['status']['state']} --")
            return
        time.sleep(1)


if __name__ == "__main__":
    main()
