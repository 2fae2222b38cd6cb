"""Execution subsystem: marshaling, instance registry, launch and polling.

Each run is one ExecutionInstance with a strict status machine
(Accepted -> Started* -> Succeeded|Failed, never out of a terminal
state). Remote services are driven over WPS; local builtins and
published scenarios run in-process. Input files are exposed to remotes
through one-time links that die with the instance.
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Optional

import requests

from .catalog import Catalog, Extent, ProcessDescriptor, ProcessKind, validate_input
from .config import ApiConfig
from .datastore import DataStore, LinkTable
from .errors import (
    IllegalStateError,
    NetworkError,
    NotFoundError,
    JobTimeoutError,
    RemoteFault,
    ValidationError,
    WpsEnvError,
)
from .wps_protocol import (
    Accepted,
    BBoxVal,
    ComplexInline,
    ComplexRef,
    ExecuteRequest,
    ExecuteResponse,
    ExecuteStatus,
    Failed,
    InputValue,
    LiteralVal,
    ResponseForm,
    Started,
    Succeeded,
    encode_execute,
    is_terminal,
    parse_execute_response,
    utcnow,
)


def canonical_literal(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if value == int(value) and abs(value) < 1e16:
            return str(int(value))
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class LogEntry:
    timestamp: str
    level: str
    text: str


@dataclass(frozen=True)
class ResultRecord:
    param_id: str
    kind: str  # "literal" | "file"
    value: str  # literal text, or user-relative path


@dataclass
class ExecutionInstance:
    id: str
    user: str
    target: str  # descriptor local_id
    status: ExecuteStatus
    submitted_at: str
    finished_at: Optional[str] = None
    parent_id: Optional[str] = None
    status_location: Optional[str] = None
    marshaled_inputs: list[tuple[str, InputValue]] = field(default_factory=list)
    results: list[ResultRecord] = field(default_factory=list)
    log: list[LogEntry] = field(default_factory=list)


def _status_to_json(status: ExecuteStatus) -> dict:
    doc = {"timestamp": status.timestamp.isoformat()}
    if isinstance(status, Accepted):
        doc["state"] = "accepted"
    elif isinstance(status, Started):
        doc.update(state="started", percent=status.percent)
    elif isinstance(status, Succeeded):
        doc["state"] = "succeeded"
    elif isinstance(status, Failed):
        doc.update(state="failed", message=status.message)
    return doc


def _status_from_json(doc: dict) -> ExecuteStatus:
    from datetime import datetime

    ts = datetime.fromisoformat(doc["timestamp"])
    state = doc["state"]
    if state == "accepted":
        return Accepted(timestamp=ts)
    if state == "started":
        return Started(percent=doc.get("percent", 0), timestamp=ts)
    if state == "succeeded":
        return Succeeded(timestamp=ts)
    return Failed(message=doc.get("message", ""), timestamp=ts)


class InstanceRegistry:
    """In-memory instance index with an append-only JSON-lines journal."""

    def __init__(self, journal_path: Optional[str] = None):
        self.journal_path = journal_path
        self._lock = threading.RLock()
        self._instances: dict[str, ExecutionInstance] = {}
        self._done: dict[str, threading.Event] = {}
        self._cancelled: dict[str, threading.Event] = {}
        if journal_path and os.path.exists(journal_path):
            self._replay()

    def _replay(self) -> None:
        with open(self.journal_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    doc = json.loads(line)
                except json.JSONDecodeError:
                    continue  # torn tail write after a crash
                inst = ExecutionInstance(
                    id=doc["id"],
                    user=doc["user"],
                    target=doc["target"],
                    status=_status_from_json(doc["status"]),
                    submitted_at=doc["submitted_at"],
                    finished_at=doc.get("finished_at"),
                    parent_id=doc.get("parent_id"),
                )
                self._instances[inst.id] = inst
        for inst in self._instances.values():
            if not is_terminal(inst.status):
                inst.status = Failed(message="orphaned")
                inst.finished_at = utcnow().isoformat()
                self._journal(inst)
            self._done[inst.id] = threading.Event()
            self._done[inst.id].set()
            self._cancelled[inst.id] = threading.Event()

    def _journal(self, inst: ExecutionInstance) -> None:
        if not self.journal_path:
            return
        doc = {
            "id": inst.id,
            "user": inst.user,
            "target": inst.target,
            "parent_id": inst.parent_id,
            "status": _status_to_json(inst.status),
            "submitted_at": inst.submitted_at,
            "finished_at": inst.finished_at,
        }
        os.makedirs(os.path.dirname(self.journal_path) or ".", exist_ok=True)
        with open(self.journal_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(doc) + "\n")

    def create(self, user: str, target: str, parent_id: Optional[str] = None) -> ExecutionInstance:
        inst = ExecutionInstance(
            id=uuid.uuid4().hex[:12],
            user=user,
            target=target,
            status=Accepted(),
            submitted_at=utcnow().isoformat(),
            parent_id=parent_id,
        )
        with self._lock:
            self._instances[inst.id] = inst
            self._done[inst.id] = threading.Event()
            self._cancelled[inst.id] = threading.Event()
            self._journal(inst)
        return inst

    def get(self, instance_id: str) -> ExecutionInstance:
        with self._lock:
            inst = self._instances.get(instance_id)
        if inst is None:
            raise NotFoundError(f"no execution instance {instance_id!r}")
        return inst

    def all(self) -> list[ExecutionInstance]:
        with self._lock:
            return list(self._instances.values())

    def is_terminal(self, instance_id: str) -> bool:
        try:
            return is_terminal(self.get(instance_id).status)
        except NotFoundError:
            return True

    def set_status(self, instance_id: str, status: ExecuteStatus) -> bool:
        """Record a transition. Returns False (and changes nothing) if the
        instance is already terminal. Started percents are kept monotone."""
        with self._lock:
            inst = self.get(instance_id)
            if is_terminal(inst.status):
                return False
            if isinstance(status, Started) and isinstance(inst.status, Started):
                if status.percent < inst.status.percent:
                    status = Started(percent=inst.status.percent, timestamp=status.timestamp)
            inst.status = status
            if is_terminal(status):
                inst.finished_at = utcnow().isoformat()
            self._journal(inst)
            if is_terminal(status):
                self._done[instance_id].set()
            return True

    def append_log(self, instance_id: str, level: str, text: str) -> None:
        with self._lock:
            self.get(instance_id).log.append(
                LogEntry(timestamp=utcnow().isoformat(), level=level, text=text)
            )

    def set_marshaled(self, instance_id: str, marshaled: list[tuple[str, InputValue]]) -> None:
        with self._lock:
            self.get(instance_id).marshaled_inputs = list(marshaled)

    def set_status_location(self, instance_id: str, url: str) -> None:
        with self._lock:
            self.get(instance_id).status_location = url

    def add_results(self, instance_id: str, results: list[ResultRecord]) -> None:
        with self._lock:
            self.get(instance_id).results.extend(results)

    def wait(self, instance_id: str, timeout: Optional[float] = None) -> bool:
        with self._lock:
            event = self._done[instance_id]
        return event.wait(timeout)

    def cancel_event(self, instance_id: str) -> threading.Event:
        with self._lock:
            return self._cancelled[instance_id]

    def snapshot(self, instance_id: str) -> dict:
        with self._lock:
            inst = self.get(instance_id)
            return {
                "id": inst.id,
                "user": inst.user,
                "service_id": inst.target,
                "parent_id": inst.parent_id,
                "status": _status_to_json(inst.status),
                "submitted_at": inst.submitted_at,
                "finished_at": inst.finished_at,
                "results": [
                    {"param_id": r.param_id, "kind": r.kind, "value": r.value}
                    for r in inst.results
                ],
            }


class _Cancelled(Exception):
    pass


class Executor:
    def __init__(
        self,
        catalog: Catalog,
        store: DataStore,
        links: LinkTable,
        registry: InstanceRegistry,
        config: ApiConfig,
        builtins: Optional[dict] = None,
    ):
        self.catalog = catalog
        self.store = store
        self.links = links
        self.registry = registry
        self.config = config
        self.builtins = builtins or {}

    # ------------------------------------------------------------ validation

    def validate_values(
        self, descriptor: ProcessDescriptor, raw: dict[str, str], user: str
    ) -> dict:
        """Run every raw form value through its widget's validation."""
        store = self.store.store_for(user)
        values: dict = {}
        for bound in list(descriptor.inputs) + list(descriptor.outputs):
            pid = bound.decl.identifier
            text = raw.get(pid)
            if text is None and bound.widget.default is not None:
                text = bound.widget.default
            if text is None:
                if bound in descriptor.inputs and bound.decl.min_occurs > 0:
                    raise ValidationError(f"missing value for {pid!r}", widget=bound.widget.kind)
                if bound.widget.kind == "file_save":
                    continue  # destination defaults to results/<instance>/<param>
                continue
            values[pid] = validate_input(bound.widget, text, file_exists=store.exists)
        unknown = set(raw) - {
            b.decl.identifier for b in list(descriptor.inputs) + list(descriptor.outputs)
        }
        if unknown:
            raise ValidationError(f"unknown parameters: {sorted(unknown)}")
        return values

    # ------------------------------------------------------------ marshaling

    def marshal_inputs(
        self,
        descriptor: ProcessDescriptor,
        values: dict,
        instance_id: str,
        user: str,
    ) -> list[tuple[str, InputValue]]:
        marshaled: list[tuple[str, InputValue]] = []
        for bound in descriptor.inputs:
            pid = bound.decl.identifier
            if pid not in values:
                continue
            value = values[pid]
            kind = bound.widget.kind
            if kind == "file":
                link = self.links.mint(user, value, instance_id=instance_id)
                href = f"{self.config.public_base_url}{link.url_path}"
                mime = bound.decl.dtype.mime if hasattr(bound.decl.dtype, "mime") else "application/octet-stream"
                marshaled.append((pid, ComplexRef(href=href, mime=mime)))
            elif kind == "rectangle":
                ext: Extent = value
                marshaled.append(
                    (pid, BBoxVal(ext.minx, ext.miny, ext.maxx, ext.maxy, crs="EPSG:4326"))
                )
            elif kind in ("select_table", "select_table_attr"):
                if descriptor.kind is not ProcessKind.LOCAL_BUILTIN:
                    raise ValidationError(
                        f"table parameter {pid!r} is allowed for local services only",
                        widget=kind,
                    )
                marshaled.append((pid, LiteralVal(text=f"dsn://{user}/{value}")))
            else:
                marshaled.append((pid, LiteralVal(text=canonical_literal(value))))
        return marshaled

    # ------------------------------------------------------------ execution

    def execute(
        self,
        descriptor: ProcessDescriptor,
        values: dict,
        user: str,
        mode: str = "sync",
        parent_id: Optional[str] = None,
    ) -> str:
        inst = self.registry.create(user, descriptor.local_id, parent_id=parent_id)
        if mode == "sync":
            self._run(inst.id, descriptor, values, user)
        else:
            threading.Thread(
                target=self._run, args=(inst.id, descriptor, values, user), daemon=True
            ).start()
        return inst.id

    def cancel(self, instance_id: str) -> bool:
        cancelled = self.registry.set_status(instance_id, Failed(message="cancelled"))
        self.registry.cancel_event(instance_id).set()
        self.links.terminate_instance(instance_id)
        if cancelled:
            self.registry.append_log(instance_id, "warn", "execution cancelled")
        return cancelled

    def _run(self, instance_id: str, descriptor: ProcessDescriptor, values: dict, user: str) -> None:
        log = lambda level, text: self.registry.append_log(instance_id, level, text)
        try:
            marshaled = self.marshal_inputs(descriptor, values, instance_id, user)
            self.registry.set_marshaled(instance_id, marshaled)
            output_dests = {
                b.decl.identifier: values[b.decl.identifier]
                for b in descriptor.outputs
                if b.widget.kind == "file_save" and b.decl.identifier in values
            }
            if descriptor.kind is ProcessKind.LOCAL_BUILTIN:
                self._run_builtin(instance_id, descriptor, marshaled, output_dests, user)
            elif descriptor.kind is ProcessKind.SCENARIO:
                self._run_scenario(instance_id, descriptor, values, output_dests, user)
            else:
                self._run_remote(instance_id, descriptor, marshaled, output_dests, user)
        except _Cancelled:
            pass
        except WpsEnvError as exc:
            log("error", exc.message)
            self.registry.set_status(instance_id, Failed(message=exc.message))
        except Exception as exc:  # never leak through to background callers
            log("error", f"internal error: {exc}")
            self.registry.set_status(instance_id, Failed(message=f"internal error: {exc}"))
        finally:
            self.links.terminate_instance(instance_id)

    def _check_cancel(self, instance_id: str) -> None:
        if self.registry.cancel_event(instance_id).is_set():
            raise _Cancelled()

    def _resolve_ref(self, href: str) -> bytes:
        prefix = f"{self.config.public_base_url}/files/"
        if href.startswith(prefix):
            token = href[len(prefix):]
            return self.links.serve(token)
        try:
            resp = requests.get(href, timeout=60)
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise NetworkError(f"GET {href}: {exc}") from exc
        return resp.content

    def _resolve_for_builtin(self, marshaled: list[tuple[str, InputValue]]) -> dict:
        resolved: dict = {}
        for pid, value in marshaled:
            if isinstance(value, LiteralVal):
                resolved[pid] = value.text
            elif isinstance(value, ComplexRef):
                resolved[pid] = self._resolve_ref(value.href)
            elif isinstance(value, ComplexInline):
                resolved[pid] = value.body.encode("utf-8")
            elif isinstance(value, BBoxVal):
                resolved[pid] = Extent(value.minx, value.miny, value.maxx, value.maxy)
        return resolved

    def _place_outputs(
        self,
        instance_id: str,
        descriptor: ProcessDescriptor,
        outputs: dict,
        output_dests: dict,
        user: str,
    ) -> list[ResultRecord]:
        store = self.store.store_for(user)
        records = []
        for bound in descriptor.outputs:
            pid = bound.decl.identifier
            if pid not in outputs:
                continue
            value = outputs[pid]
            if isinstance(value, bytes):
                dest = output_dests.get(pid, f"results/{instance_id}/{pid}")
                store.put_file(dest, value)
                records.append(ResultRecord(param_id=pid, kind="file", value=dest))
            else:
                records.append(ResultRecord(param_id=pid, kind="literal", value=str(value)))
        return records

    def _run_builtin(self, instance_id, descriptor, marshaled, output_dests, user) -> None:
        builtin = self.builtins.get(descriptor.local_id)
        if builtin is None:
            raise NotFoundError(f"no builtin backing {descriptor.local_id!r}")
        resolved = self._resolve_for_builtin(marshaled)

        def progress(percent: int) -> None:
            self._check_cancel(instance_id)
            percent = min(99, max(0, percent))
            self.registry.set_status(instance_id, Started(percent=percent))

        def log(msg: str) -> None:
            self.registry.append_log(instance_id, "info", msg)

        self.registry.set_status(instance_id, Started(percent=0))
        outputs = builtin.run(resolved, progress, log)
        self._check_cancel(instance_id)
        records = self._place_outputs(instance_id, descriptor, outputs, output_dests, user)
        self.registry.add_results(instance_id, records)
        self.registry.set_status(instance_id, Succeeded())

    def _run_scenario(self, instance_id, descriptor, values, output_dests, user) -> None:
        from .scenario import run_scenario_instance  # deferred: mutual dependency

        run_scenario_instance(self, instance_id, descriptor, values, output_dests, user)

    def _run_remote(self, instance_id, descriptor, marshaled, output_dests, user) -> None:
        use_async = descriptor.store_supported and descriptor.status_supported
        req = ExecuteRequest(
            process_id=descriptor.remote_identifier,
            inputs=tuple(marshaled),
            response_form=ResponseForm(
                store_results=use_async,
                status=use_async,
                requested_outputs=tuple(b.decl.identifier for b in descriptor.outputs),
            ),
        )
        try:
            http = requests.post(
                descriptor.endpoint,
                data=encode_execute(req),
                headers={"Content-Type": "text/xml"},
                timeout=60,
            )
            http.raise_for_status()
        except requests.RequestException as exc:
            raise NetworkError(f"POST {descriptor.endpoint}: {exc}") from exc
        resp = parse_execute_response(http.content)
        self._record_remote_status(instance_id, resp.status)
        if not is_terminal(resp.status):
            if not resp.status_location:
                raise NetworkError("asynchronous response without statusLocation")
            self.registry.set_status_location(instance_id, resp.status_location)
            resp = self.poll_until_terminal(instance_id)
        if isinstance(resp.status, Failed):
            raise RemoteFault(resp.status.message)
        records = self.collect_results(instance_id, descriptor, resp.outputs, output_dests, user)
        self.registry.add_results(instance_id, records)
        self.registry.set_status(instance_id, Succeeded())

    def _record_remote_status(self, instance_id: str, status: ExecuteStatus) -> None:
        self._check_cancel(instance_id)
        if isinstance(status, Started):
            self.registry.set_status(instance_id, Started(percent=status.percent))
            self.registry.append_log(instance_id, "info", f"remote progress {status.percent}%")
        elif isinstance(status, Accepted):
            self.registry.append_log(instance_id, "info", "remote accepted")

    def poll_until_terminal(self, instance_id: str) -> ExecuteResponse:
        inst = self.registry.get(instance_id)
        if not inst.status_location:
            raise IllegalStateError("instance has no statusLocation to poll")
        interval = self.config.poll_interval_ms / 1000.0
        deadline = time.monotonic() + self.config.job_timeout_s
        last: Optional[ExecuteStatus] = None
        while True:
            self._check_cancel(instance_id)
            if time.monotonic() > deadline:
                self.registry.set_status(instance_id, Failed(message="timeout"))
                raise JobTimeoutError(f"instance {instance_id} timed out")
            time.sleep(interval)
            interval = min(interval * 1.5, 30.0)
            try:
                http = requests.get(inst.status_location, timeout=60)
                http.raise_for_status()
            except requests.RequestException as exc:
                raise NetworkError(f"GET {inst.status_location}: {exc}") from exc
            resp = parse_execute_response(http.content)
            if type(resp.status) is not type(last) or resp.status != last:
                self._record_remote_status(instance_id, resp.status)
                last = resp.status
            if is_terminal(resp.status):
                return resp

    def collect_results(
        self,
        instance_id: str,
        descriptor: ProcessDescriptor,
        outputs: tuple[tuple[str, InputValue], ...],
        output_dests: dict,
        user: str,
    ) -> list[ResultRecord]:
        records = []
        for pid, value in outputs:
            if isinstance(value, LiteralVal):
                records.append(ResultRecord(param_id=pid, kind="literal", value=value.text))
            elif isinstance(value, (ComplexRef, ComplexInline)):
                dest = output_dests.get(pid, f"results/{instance_id}/{pid}")
                try:
                    if isinstance(value, ComplexRef):
                        self.store.fetch_remote_result(value.href, user, dest)
                    else:
                        self.store.store_for(user).put_file(dest, value.body.encode("utf-8"))
                except WpsEnvError as exc:
                    raise RemoteFault(f"result fetch: {exc.message}") from exc
                records.append(ResultRecord(param_id=pid, kind="file", value=dest))
            elif isinstance(value, BBoxVal):
                records.append(
                    ResultRecord(
                        param_id=pid,
                        kind="literal",
                        value=f"{value.minx},{value.miny},{value.maxx},{value.maxy}",
                    )
                )
        return records
