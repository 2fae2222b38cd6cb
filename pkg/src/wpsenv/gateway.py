"""HTTP front door: WPS endpoints, the REST API, and one-time file links.

The WPS surface (GetCapabilities / DescribeProcess / Execute / status
polling) covers every locally served process: builtins and published
scenarios. The REST API drives registration, execution, files and
scenario publication for the UI and CLI; it authenticates with static
bearer tokens from `<data_dir>/users.json`. WPS and /files are
unauthenticated by design; private files are protected by one-time links.
"""

from __future__ import annotations

import json
import threading
import uuid
from typing import Optional
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, unquote, urlparse

from . import catalog as cat
from .chaining import chainable_pairs
from .env import Environment, WPS_SCRATCH_USER
from .errors import (
    GoneError,
    NotFoundError,
    ProtocolError,
    RemoteFault,
    ScriptError,
    ValidationError,
    WpsEnvError,
)
from .scenario import publish_scenario
from .wps_protocol import (
    BBoxVal,
    CapabilitiesDoc,
    ComplexInline,
    ComplexRef,
    ExecuteResponse,
    LiteralVal,
    ProcessBrief,
    Succeeded,
    encode_capabilities,
    encode_exception_report,
    encode_execute_response,
    encode_process_description,
    decode_execute,
)


class Gateway:
    """Request-handling logic, independent of the HTTP plumbing."""

    def __init__(self, env: Environment):
        self.env = env
        self._drafts: dict[str, cat.RegistrationDraft] = {}
        self._result_links: dict[tuple[str, str], str] = {}
        self._lock = threading.Lock()

    # ------------------------------------------------------------ WPS

    def local_descriptors(self) -> list[cat.ProcessDescriptor]:
        return [d for d in self.env.catalog.all() if d.endpoint == cat.LOCAL]

    def wps_capabilities(self) -> bytes:
        briefs = tuple(
            ProcessBrief(
                identifier=d.remote_identifier,
                title=d.display_name,
                abstract=d.description or None,
            )
            for d in self.local_descriptors()
        )
        return encode_capabilities(
            CapabilitiesDoc(service_title="WPS environment", process_briefs=briefs)
        )

    def _find_local(self, identifier: str) -> cat.ProcessDescriptor:
        for d in self.local_descriptors():
            if d.remote_identifier == identifier:
                return d
        raise NotFoundError(f"no process {identifier!r}")

    def wps_describe(self, identifier: str) -> bytes:
        return encode_process_description(cat.description_of(self._find_local(identifier)))

    def wps_execute(self, body: bytes) -> bytes:
        req = decode_execute(body)
        try:
            descriptor = self._find_local(req.process_id)
        except NotFoundError:
            return encode_exception_report(
                "InvalidParameterValue", f"unknown process {req.process_id!r}"
            )
        scratch = uuid.uuid4().hex[:8]
        store = self.env.store.store_for(WPS_SCRATCH_USER)
        raw: dict[str, str] = {}
        by_id = {b.decl.identifier: b for b in descriptor.inputs}
        for pid, value in req.inputs:
            bound = by_id.get(pid)
            if bound is None:
                return encode_exception_report(
                    "InvalidParameterValue", f"unknown input {pid!r}"
                )
            if isinstance(value, LiteralVal):
                raw[pid] = value.text
            elif isinstance(value, ComplexRef):
                data = self.env.executor._resolve_ref(value.href)
                path = f"wps_in/{scratch}/{pid}"
                store.put_file(path, data)
                raw[pid] = path
            elif isinstance(value, ComplexInline):
                path = f"wps_in/{scratch}/{pid}"
                store.put_file(path, value.body.encode("utf-8"))
                raw[pid] = path
            elif isinstance(value, BBoxVal):
                raw[pid] = f"{value.minx},{value.miny},{value.maxx},{value.maxy}"
        values = self.env.executor.validate_values(descriptor, raw, WPS_SCRATCH_USER)

        form = req.response_form
        wants_async = form.store_results and form.status
        mode = "async" if wants_async else "sync"
        instance_id = self.env.executor.execute(descriptor, values, WPS_SCRATCH_USER, mode=mode)
        return encode_execute_response(self._wps_response(instance_id, descriptor, wants_async))

    def wps_status(self, instance_id: str) -> bytes:
        inst = self.env.registry.get(instance_id)
        descriptor = self.env.catalog.get(inst.target)
        return encode_execute_response(
            self._wps_response(instance_id, descriptor, with_location=True)
        )

    def _wps_response(
        self, instance_id: str, descriptor: cat.ProcessDescriptor, with_location: bool
    ) -> ExecuteResponse:
        inst = self.env.registry.get(instance_id)
        outputs = []
        if isinstance(inst.status, Succeeded):
            for record in inst.results:
                if record.kind == "literal":
                    outputs.append((record.param_id, LiteralVal(text=record.value)))
                else:
                    href = self._result_href(inst.id, record.param_id, inst.user, record.value)
                    mime = "application/octet-stream"
                    bound = next(
                        (b for b in descriptor.outputs if b.decl.identifier == record.param_id),
                        None,
                    )
                    if bound is not None and hasattr(bound.decl.dtype, "mime"):
                        mime = bound.decl.dtype.mime
                    outputs.append((record.param_id, ComplexRef(href=href, mime=mime)))
        location = None
        if with_location:
            location = f"{self.env.config.public_base_url}/wps/status/{instance_id}"
        return ExecuteResponse(
            process_id=descriptor.remote_identifier,
            status=inst.status,
            status_location=location,
            outputs=tuple(outputs),
        )

    def _result_href(self, instance_id: str, param_id: str, user: str, path: str) -> str:
        # result links are deliberately unbound from the (already terminal)
        # instance; they stay count- and time-limited
        with self._lock:
            token = self._result_links.get((instance_id, param_id))
            if token is None or self.env.links.get(token) is None:
                link = self.env.links.mint(user, path)
                token = link.token
                self._result_links[(instance_id, param_id)] = token
        return f"{self.env.config.public_base_url}/files/{token}"

    # ------------------------------------------------------------ REST

    def services_search(self, query: str) -> list[dict]:
        return [cat.descriptor_to_json(d) for d in self.env.catalog.search(query)]

    def service_get(self, local_id: str) -> dict:
        return cat.descriptor_to_json(self.env.catalog.get(local_id))

    def registration_step(self, body: dict) -> dict:
        step = body.get("step")
        if step == "begin":
            draft = cat.begin_registration(
                body.get("display_name", ""),
                body.get("description", ""),
                body.get("endpoint", ""),
            )
            draft_id = uuid.uuid4().hex[:12]
            with self._lock:
                self._drafts[draft_id] = draft
            return {"draft_id": draft_id}
        draft_id = body.get("draft_id", "")
        with self._lock:
            draft = self._drafts.get(draft_id)
        if draft is None:
            raise NotFoundError(f"no registration draft {draft_id!r}")
        if step == "list":
            briefs = cat.list_remote_processes(draft)
            return {
                "draft_id": draft_id,
                "processes": [{"identifier": i, "title": t} for i, t in briefs],
            }
        if step == "select":
            cat.select_remote_process(draft, body.get("identifier", ""))
            desc = draft.remote_description
            return {
                "draft_id": draft_id,
                "identifier": desc.identifier,
                "inputs": [
                    {"identifier": p.identifier, "title": p.title, "dtype": cat.dtype_to_json(p.dtype)}
                    for p in desc.inputs
                ],
                "outputs": [
                    {"identifier": p.identifier, "title": p.title, "dtype": cat.dtype_to_json(p.dtype)}
                    for p in desc.outputs
                ],
            }
        if step == "finalize":
            bindings = []
            for b in body.get("bindings", []):
                w = b.get("widget", {})
                bindings.append(
                    (
                        b["param_id"],
                        cat.WidgetDescriptor(
                            kind=w["kind"],
                            min=w.get("min"),
                            max=w.get("max"),
                            default=w.get("default"),
                        ),
                        b.get("human_name", ""),
                        b.get("human_description", ""),
                    )
                )
            descriptor = self.env.catalog.finalize_registration(
                draft, bindings, body.get("wrapper_name", "")
            )
            with self._lock:
                self._drafts.pop(draft_id, None)
            return cat.descriptor_to_json(descriptor)
        raise ValidationError(f"unknown registration step {step!r}")

    def execution_start(self, user: str, body: dict) -> dict:
        descriptor = self.env.catalog.get(body.get("service_id", ""))
        raw = body.get("values", {})
        if not isinstance(raw, dict):
            raise ValidationError("values must be an object of raw strings")
        mode = body.get("mode", "async")
        if mode not in ("sync", "async"):
            raise ValidationError(f"unknown mode {mode!r}")
        values = self.env.executor.validate_values(descriptor, raw, user)
        instance_id = self.env.executor.execute(descriptor, values, user, mode=mode)
        return self.env.registry.snapshot(instance_id)

    def execution_get(self, instance_id: str) -> dict:
        return self.env.registry.snapshot(instance_id)

    def executions_list(self, user: str, parent_id: Optional[str] = None) -> list[dict]:
        snaps = [
            self.env.registry.snapshot(inst.id)
            for inst in self.env.registry.all()
            if inst.user == user
        ]
        if parent_id is not None:
            snaps = [s for s in snaps if s["parent_id"] == parent_id]
        snaps.sort(key=lambda s: s["submitted_at"])
        return snaps

    def execution_log(self, instance_id: str) -> dict:
        inst = self.env.registry.get(instance_id)
        return {
            "id": instance_id,
            "log": [
                {"timestamp": e.timestamp, "level": e.level, "text": e.text}
                for e in inst.log
            ],
        }

    def execution_cancel(self, instance_id: str) -> dict:
        self.env.registry.get(instance_id)  # 404 before touching anything
        cancelled = self.env.executor.cancel(instance_id)
        return {"id": instance_id, "cancelled": cancelled}

    def scenario_publish(self, body: dict) -> dict:
        def params(key):
            return [cat.bound_param_from_json(p) for p in body.get(key, [])]

        descriptor = publish_scenario(
            self.env.catalog,
            source=body.get("source", ""),
            name=body.get("name", ""),
            description=body.get("description", ""),
            declared_inputs=params("inputs"),
            declared_outputs=params("outputs"),
            wrapper_name=body.get("wrapper_name", ""),
            entry_function=body.get("entry_function"),
        )
        return cat.descriptor_to_json(descriptor)

    def chains(self) -> list[dict]:
        pairs = chainable_pairs(self.env.catalog.all())
        return [
            {
                "producer": {"process": p.owner_process, "param": p.param_id},
                "consumer": {"process": c.owner_process, "param": c.param_id},
            }
            for p, c in pairs
        ]

    def validate_one(self, body: dict) -> dict:
        """Shared widget validation used by UI contract tests."""
        w = body.get("widget", {})
        widget = cat.WidgetDescriptor(
            kind=w.get("kind", ""), min=w.get("min"), max=w.get("max"), default=w.get("default")
        )
        user = body.get("user", WPS_SCRATCH_USER)
        store = self.env.store.store_for(user)
        try:
            cat.validate_input(widget, body.get("raw", ""), file_exists=store.exists)
            return {"accept": True}
        except ValidationError as exc:
            return {"accept": False, "reason": exc.message}


# ---------------------------------------------------------------- HTTP layer


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "wpsenv"

    # set by the server factory
    gateway: Gateway = None

    def log_message(self, fmt, *args):  # quiet; instance logs carry the story
        pass

    # -- plumbing

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _send(self, status: int, payload: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(payload)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header(
            "Access-Control-Allow-Headers", "Authorization, Content-Type"
        )
        self.send_header(
            "Access-Control-Allow-Methods", "GET, POST, PUT, DELETE, OPTIONS"
        )
        self.end_headers()
        self.wfile.write(payload)

    def _json(self, payload, status: int = 200) -> None:
        self._send(status, json.dumps(payload).encode("utf-8"), "application/json")

    def _error(self, status: int, code: str, reason: str, widget=None) -> None:
        body = {"error": code, "reason": reason}
        if widget:
            body["widget"] = widget
        self._json(body, status)

    def _authed_user(self):
        auth = self.headers.get("Authorization", "")
        if auth.startswith("Bearer "):
            return self.gateway.env.user_for_token(auth[len("Bearer "):].strip())
        return None

    # -- dispatch

    def do_OPTIONS(self):
        self._send(204, b"", "text/plain")

    def do_GET(self):
        self._route("GET")

    def do_POST(self):
        self._route("POST")

    def do_PUT(self):
        self._route("PUT")

    def do_DELETE(self):
        self._route("DELETE")

    def _route(self, method: str) -> None:
        url = urlparse(self.path)
        path = unquote(url.path)
        query = {k: v[0] for k, v in parse_qs(url.query).items()}
        try:
            if path == "/wps" or path.startswith("/wps/"):
                self._route_wps(method, path, query)
            elif path.startswith("/files/"):
                self._route_files(method, path)
            elif path == "/api/validate" and method == "POST":
                # unauthenticated on purpose: pure validation, no side effects
                self._json(self.gateway.validate_one(json.loads(self._body() or b"{}")))
            elif path.startswith("/api/"):
                self._route_api(method, path, query)
            else:
                self._error(404, "not_found", f"no route {path!r}")
        except BrokenPipeError:
            pass
        except NotFoundError as exc:
            self._error(404, exc.code, exc.message)
        except GoneError as exc:
            self._error(410, exc.code, exc.message)
        except ScriptError as exc:
            self._json(
                {"error": exc.code, "reason": exc.reason, "line": exc.line, "col": exc.col},
                400,
            )
        except ValidationError as exc:
            self._error(400, exc.code, exc.message, widget=exc.widget)
        except (ProtocolError, RemoteFault) as exc:
            self._error(502, exc.code, exc.message)
        except WpsEnvError as exc:
            self._error(500, exc.code, exc.message)
        except json.JSONDecodeError as exc:
            self._error(400, "validation", f"bad JSON body: {exc}")
        except Exception as exc:  # no stack traces on the wire
            self._error(500, "internal", f"internal error: {type(exc).__name__}")

    # -- WPS + files

    def _route_wps(self, method: str, path: str, query: dict) -> None:
        gw = self.gateway
        if path == "/wps" and method == "GET":
            params = {k.lower(): v for k, v in query.items()}
            request = params.get("request", "")
            version = params.get("version", "1.0.0")
            if version != "1.0.0":
                self._send(
                    400,
                    encode_exception_report("VersionNegotiationFailed", version),
                    "text/xml",
                )
                return
            if request.lower() == "getcapabilities":
                self._send(200, gw.wps_capabilities(), "text/xml")
            elif request.lower() == "describeprocess":
                identifier = params.get("identifier", "")
                try:
                    self._send(200, gw.wps_describe(identifier), "text/xml")
                except NotFoundError:
                    self._send(
                        400,
                        encode_exception_report("InvalidParameterValue", identifier),
                        "text/xml",
                    )
            else:
                self._send(
                    400,
                    encode_exception_report("InvalidParameterValue", request or "request"),
                    "text/xml",
                )
        elif path == "/wps" and method == "POST":
            try:
                self._send(200, gw.wps_execute(self._body()), "text/xml")
            except (ProtocolError, ValidationError) as exc:
                self._send(
                    400,
                    encode_exception_report("InvalidParameterValue", exc.message),
                    "text/xml",
                )
            except WpsEnvError as exc:
                self._send(
                    500, encode_exception_report("NoApplicableCode", exc.message), "text/xml"
                )
        elif path.startswith("/wps/status/") and method == "GET":
            instance_id = path[len("/wps/status/"):]
            try:
                self._send(200, gw.wps_status(instance_id), "text/xml")
            except NotFoundError as exc:
                self._send(
                    404,
                    encode_exception_report("InvalidParameterValue", exc.message),
                    "text/xml",
                )
        else:
            self._send(
                405, encode_exception_report("NoApplicableCode", "bad method"), "text/xml"
            )

    def _route_files(self, method: str, path: str) -> None:
        if method != "GET":
            self._error(405, "method", "only GET is supported on /files")
            return
        token = path[len("/files/"):]
        data = self.gateway.env.links.serve(token)
        self._send(200, data, "application/octet-stream")

    # -- REST

    def _route_api(self, method: str, path: str, query: dict) -> None:
        gw = self.gateway
        user = self._authed_user()
        if user is None:
            self._error(401, "unauthorized", "missing or unknown bearer token")
            return

        if path == "/api/services" and method == "GET":
            self._json(gw.services_search(query.get("query", "")))
        elif path == "/api/services" and method == "POST":
            try:
                self._json(gw.registration_step(json.loads(self._body() or b"{}")))
            except ValidationError as exc:
                status = 409 if "already taken" in exc.message else 400
                self._error(status, exc.code, exc.message, widget=exc.widget)
        elif path.startswith("/api/services/") and method == "GET":
            self._json(gw.service_get(path[len("/api/services/"):]))
        elif path == "/api/executions" and method == "POST":
            self._json(gw.execution_start(user, json.loads(self._body() or b"{}")))
        elif path == "/api/executions" and method == "GET":
            self._json(gw.executions_list(user, query.get("parent")))
        elif path.startswith("/api/executions/") and path.endswith("/log") and method == "GET":
            self._json(gw.execution_log(path[len("/api/executions/"):-len("/log")]))
        elif path.startswith("/api/executions/") and path.endswith("/cancel") and method == "POST":
            self._json(gw.execution_cancel(path[len("/api/executions/"):-len("/cancel")]))
        elif path.startswith("/api/executions/") and method == "GET":
            self._json(gw.execution_get(path[len("/api/executions/"):]))
        elif path == "/api/files" and method == "GET":
            store = gw.env.store.store_for(user)
            stats = store.list_files(query.get("dir", ""))
            self._json({"files": [{"path": s.path, "size": s.size} for s in stats]})
        elif path.startswith("/api/files/"):
            rel = path[len("/api/files/"):]
            store = gw.env.store.store_for(user)
            if method == "GET":
                self._send(200, store.get_file(rel), "application/octet-stream")
            elif method == "PUT":
                stat = store.put_file(rel, self._body())
                self._json({"path": stat.path, "size": stat.size})
            elif method == "DELETE":
                store.delete_file(rel)
                self._json({"deleted": rel})
            else:
                self._error(405, "method", f"bad method {method}")
        elif path == "/api/scenarios" and method == "POST":
            try:
                self._json(gw.scenario_publish(json.loads(self._body() or b"{}")))
            except ValidationError as exc:
                status = 409 if "already taken" in exc.message else 400
                self._error(status, exc.code, exc.message, widget=exc.widget)
        elif path == "/api/chains" and method == "GET":
            self._json(gw.chains())
        else:
            self._error(404, "not_found", f"no route {method} {path!r}")


class GatewayServer:
    """Threaded HTTP server hosting a Gateway; usable as a context manager."""

    def __init__(self, env: Environment):
        self.env = env
        self.gateway = Gateway(env)
        handler = type("BoundHandler", (_Handler,), {"gateway": self.gateway})
        self._httpd = ThreadingHTTPServer((env.config.host, env.config.port), handler)
        self._httpd.daemon_threads = True
        actual_port = self._httpd.server_address[1]
        if env.config.port != actual_port:  # port 0 -> kernel-assigned
            default_base = env.config.public_base_url == f"http://{env.config.bind_addr}"
            env.config.bind_addr = f"{env.config.host}:{actual_port}"
            if default_base:
                env.config.public_base_url = f"http://{env.config.bind_addr}"
        self._thread = None

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "GatewayServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def __enter__(self) -> "GatewayServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
