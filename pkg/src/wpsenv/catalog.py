"""Service registry: registration, widget validation, search, persistence.

Registration is the four-step flow: enter name/endpoint, list the remote
processes, pick one (DescribeProcess fetch), then bind a widget to every
input parameter and choose a wrapper name. The catalog persists as one
JSON document written atomically.
"""

from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional
from urllib.parse import urlparse

import requests

from .errors import NetworkError, NotFoundError, ValidationError
from .wps_protocol import (
    BBoxType,
    ComplexType,
    DataTypeSpec,
    LiteralType,
    ParamDecl,
    ProcessDescription,
    parse_capabilities,
    parse_process_description,
)

LOCAL = "LOCAL"

WIDGET_KINDS = (
    "edit",
    "number",
    "checkbox",
    "rectangle",
    "file",
    "file_save",
    "select_table",
    "select_table_attr",
)

_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_TABLE_ATTR_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*\.[A-Za-z_][A-Za-z0-9_]*$")
_POLYGON_RE = re.compile(r"^\s*POLYGON\s*\(\(\s*(.+?)\s*\)\)\s*$", re.IGNORECASE)


class ProcessKind(Enum):
    REMOTE = "remote"
    LOCAL_BUILTIN = "local_builtin"
    SCENARIO = "scenario"


@dataclass(frozen=True)
class WidgetDescriptor:
    kind: str
    min: Optional[float] = None
    max: Optional[float] = None
    default: Optional[str] = None

    def __post_init__(self):
        if self.kind not in WIDGET_KINDS:
            raise ValidationError(f"unknown widget kind {self.kind!r}")
        if self.kind != "number" and (self.min is not None or self.max is not None):
            raise ValidationError("min/max constraints apply to number widgets only")
        if self.min is not None and self.max is not None and self.min > self.max:
            raise ValidationError("widget min exceeds max")


@dataclass(frozen=True)
class BoundParam:
    decl: ParamDecl
    widget: WidgetDescriptor
    human_name: str = ""
    human_description: str = ""

    def __post_init__(self):
        if not widget_compatible(self.widget.kind, self.decl.dtype):
            raise ValidationError(
                f"widget {self.widget.kind!r} incompatible with parameter "
                f"{self.decl.identifier!r}",
                widget=self.widget.kind,
            )


@dataclass(frozen=True)
class ProcessDescriptor:
    local_id: str
    display_name: str
    description: str
    endpoint: str  # absolute URL or the LOCAL sentinel
    remote_identifier: str
    inputs: tuple[BoundParam, ...]
    outputs: tuple[BoundParam, ...]
    wrapper_name: str
    kind: ProcessKind
    store_supported: bool = True
    status_supported: bool = True
    scenario_source: Optional[str] = None
    entry_function: Optional[str] = None


def widget_compatible(kind: str, dtype: DataTypeSpec) -> bool:
    if kind == "edit":
        return isinstance(dtype, LiteralType) and dtype.base.lower() == "string"
    if kind == "number":
        return isinstance(dtype, LiteralType) and dtype.base.lower() in (
            "double",
            "float",
            "integer",
            "int",
        )
    if kind == "checkbox":
        return isinstance(dtype, LiteralType) and dtype.base.lower() == "boolean"
    if kind == "rectangle":
        return isinstance(dtype, BBoxType)
    if kind in ("file", "file_save"):
        return isinstance(dtype, ComplexType)
    if kind in ("select_table", "select_table_attr"):
        return isinstance(dtype, LiteralType) and dtype.base.lower() == "string"
    return False


# ---------------------------------------------------------------- validation


@dataclass(frozen=True)
class Extent:
    minx: float
    miny: float
    maxx: float
    maxy: float


def _parse_extent_csv(raw: str) -> Extent:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 4:
        raise ValidationError("rectangle needs minx,miny,maxx,maxy", widget="rectangle")
    try:
        minx, miny, maxx, maxy = (float(p) for p in parts)
    except ValueError as exc:
        raise ValidationError(f"rectangle: {exc}", widget="rectangle") from exc
    if minx > maxx or miny > maxy:
        raise ValidationError("rectangle min corner exceeds max corner", widget="rectangle")
    return Extent(minx, miny, maxx, maxy)


def _parse_extent_wkt(raw: str) -> Extent:
    m = _POLYGON_RE.match(raw)
    if not m:
        raise ValidationError("rectangle: bad WKT POLYGON", widget="rectangle")
    xs, ys = [], []
    for pair in m.group(1).split(","):
        coords = pair.split()
        if len(coords) != 2:
            raise ValidationError("rectangle: bad WKT vertex", widget="rectangle")
        try:
            xs.append(float(coords[0]))
            ys.append(float(coords[1]))
        except ValueError as exc:
            raise ValidationError(f"rectangle: {exc}", widget="rectangle") from exc
    if not xs:
        raise ValidationError("rectangle: empty polygon", widget="rectangle")
    return Extent(min(xs), min(ys), max(xs), max(ys))


def parse_extent(raw: str) -> Extent:
    if raw.strip().upper().startswith("POLYGON"):
        return _parse_extent_wkt(raw)
    return _parse_extent_csv(raw)


def validate_input(widget: WidgetDescriptor, raw: str, file_exists: Callable[[str], bool] | None = None):
    """Validate one raw form value against its widget; returns the parsed value.

    `file_exists` checks a user-relative path in the caller's store; it is
    required for the "file" widget only.
    """
    kind = widget.kind
    # form values arrive from JSON; anything but text is a type error
    if not isinstance(raw, str):
        raise ValidationError(f"{kind}: expected text, got {type(raw).__name__}", widget=kind)
    if kind == "edit":
        return raw
    if kind == "number":
        try:
            value = float(raw)
        except ValueError as exc:
            raise ValidationError(f"number: {raw!r} is not numeric", widget=kind) from exc
        if widget.min is not None and value < widget.min:
            raise ValidationError(f"number: {value} below minimum {widget.min}", widget=kind)
        if widget.max is not None and value > widget.max:
            raise ValidationError(f"number: {value} above maximum {widget.max}", widget=kind)
        return value
    if kind == "checkbox":
        if raw == "true":
            return True
        if raw == "false":
            return False
        raise ValidationError('checkbox: expected "true" or "false"', widget=kind)
    if kind == "rectangle":
        return parse_extent(raw)
    if kind == "file":
        path = normalize_user_path(raw)
        if file_exists is None or not file_exists(path):
            raise ValidationError(f"file: {raw!r} not found in store", widget=kind)
        return path
    if kind == "file_save":
        return normalize_user_path(raw)
    if kind == "select_table":
        if not _IDENT_RE.match(raw):
            raise ValidationError(f"select_table: bad table name {raw!r}", widget=kind)
        return raw
    if kind == "select_table_attr":
        if not _TABLE_ATTR_RE.match(raw):
            raise ValidationError(
                f"select_table_attr: expected table.attr, got {raw!r}", widget=kind
            )
        return raw
    raise ValidationError(f"unknown widget kind {kind!r}")


def normalize_user_path(raw: str) -> str:
    """Normalize a user-relative path, rejecting escapes from the store root."""
    if not raw or raw.startswith(("/", "\\")) or ":" in raw.split("/")[0]:
        raise ValidationError(f"path {raw!r} must be relative")
    parts = []
    for part in raw.replace("\\", "/").split("/"):
        if part in ("", "."):
            continue
        if part == "..":
            raise ValidationError(f"path {raw!r} escapes the store root")
        parts.append(part)
    if not parts:
        raise ValidationError("empty path")
    return "/".join(parts)


# ---------------------------------------------------------------- registration


@dataclass
class RegistrationDraft:
    display_name: str
    description: str
    endpoint: str
    briefs: Optional[list[tuple[str, str]]] = None
    remote_description: Optional[ProcessDescription] = None


def begin_registration(display_name: str, description: str, endpoint: str) -> RegistrationDraft:
    parsed = urlparse(endpoint)
    if parsed.scheme not in ("http", "https") or not parsed.netloc:
        raise ValidationError(f"endpoint {endpoint!r} is not an absolute HTTP URL")
    return RegistrationDraft(display_name=display_name, description=description, endpoint=endpoint)


def _kvp_get(endpoint: str, params: dict) -> bytes:
    try:
        resp = requests.get(endpoint, params=params, timeout=30)
        resp.raise_for_status()
    except requests.RequestException as exc:
        raise NetworkError(f"GET {endpoint}: {exc}") from exc
    return resp.content


def list_remote_processes(draft: RegistrationDraft) -> list[tuple[str, str]]:
    body = _kvp_get(
        draft.endpoint,
        {"service": "WPS", "version": "1.0.0", "request": "GetCapabilities"},
    )
    caps = parse_capabilities(body)
    draft.briefs = [(b.identifier, b.title) for b in caps.process_briefs]
    return draft.briefs


def select_remote_process(draft: RegistrationDraft, identifier: str) -> RegistrationDraft:
    if draft.briefs is None:
        list_remote_processes(draft)
    assert draft.briefs is not None
    if identifier not in [b[0] for b in draft.briefs]:
        raise ValidationError(f"unknown process identifier {identifier!r}")
    body = _kvp_get(
        draft.endpoint,
        {
            "service": "WPS",
            "version": "1.0.0",
            "request": "DescribeProcess",
            "identifier": identifier,
        },
    )
    draft.remote_description = parse_process_description(body)
    return draft


def default_wrapper_name(remote_identifier: str, taken: set[str]) -> str:
    base = re.sub(r"[^A-Za-z0-9_]", "_", remote_identifier.lower())
    if not base or not _IDENT_RE.match(base):
        base = f"p_{base}" if base else "process"
    name, n = base, 2
    while name in taken:
        name = f"{base}_{n}"
        n += 1
    return name


# ---------------------------------------------------------------- the catalog


class Catalog:
    """Single-writer registry persisted at `<data_dir>/catalog.json`."""

    def __init__(self, path: str):
        self.path = path
        self._lock = threading.RLock()
        self._by_id: dict[str, ProcessDescriptor] = {}
        if os.path.exists(path):
            self._load()

    # -- persistence

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("version") != 1:
            raise ValidationError(f"unsupported catalog version {doc.get('version')!r}")
        self._by_id = {
            d["local_id"]: descriptor_from_json(d) for d in doc.get("processes", [])
        }

    def _save(self) -> None:
        doc = {
            "version": 1,
            "processes": [descriptor_to_json(d) for d in self._by_id.values()],
        }
        tmp = f"{self.path}.tmp.{os.getpid()}"
        os.makedirs(os.path.dirname(self.path) or ".", exist_ok=True)
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
        os.replace(tmp, self.path)

    # -- queries

    def all(self) -> list[ProcessDescriptor]:
        with self._lock:
            return list(self._by_id.values())

    def get(self, local_id: str) -> ProcessDescriptor:
        with self._lock:
            desc = self._by_id.get(local_id)
        if desc is None:
            raise NotFoundError(f"no service {local_id!r}")
        return desc

    def by_wrapper(self, wrapper_name: str) -> Optional[ProcessDescriptor]:
        with self._lock:
            for d in self._by_id.values():
                if d.wrapper_name == wrapper_name:
                    return d
        return None

    def by_remote_identifier(self, endpoint: str, identifier: str) -> Optional[ProcessDescriptor]:
        with self._lock:
            for d in self._by_id.values():
                if d.remote_identifier == identifier and d.endpoint == endpoint:
                    return d
        return None

    def search(self, query: str) -> list[ProcessDescriptor]:
        needle = query.lower()
        with self._lock:
            hits = [
                d
                for d in self._by_id.values()
                if needle in d.display_name.lower() or needle in d.description.lower()
            ]
        return sorted(hits, key=lambda d: d.display_name)

    def wrapper_names(self) -> set[str]:
        with self._lock:
            return {d.wrapper_name for d in self._by_id.values()}

    # -- mutation

    def add(self, descriptor: ProcessDescriptor) -> None:
        with self._lock:
            if descriptor.local_id in self._by_id:
                raise ValidationError(f"duplicate service id {descriptor.local_id!r}")
            if not _IDENT_RE.match(descriptor.wrapper_name):
                raise ValidationError(
                    f"wrapper name {descriptor.wrapper_name!r} is not an identifier"
                )
            if descriptor.wrapper_name in self.wrapper_names():
                raise ValidationError(
                    f"wrapper name {descriptor.wrapper_name!r} already taken"
                )
            self._by_id[descriptor.local_id] = descriptor
            self._save()

    def remove(self, local_id: str) -> None:
        with self._lock:
            if local_id not in self._by_id:
                raise NotFoundError(f"no service {local_id!r}")
            del self._by_id[local_id]
            self._save()

    def finalize_registration(
        self,
        draft: RegistrationDraft,
        widget_bindings: list[tuple[str, WidgetDescriptor, str, str]],
        wrapper_name: str,
        local_id: Optional[str] = None,
    ) -> ProcessDescriptor:
        """Step 4: bind widgets, persist, and expose the wrapper. Atomic."""
        desc = draft.remote_description
        if desc is None:
            raise ValidationError("registration draft has no selected process")
        by_param = {b[0]: b for b in widget_bindings}
        if len(by_param) != len(widget_bindings):
            raise ValidationError("duplicate widget binding")

        def bind(decl: ParamDecl, required: bool) -> BoundParam:
            binding = by_param.pop(decl.identifier, None)
            if binding is None:
                if required:
                    raise ValidationError(f"missing widget binding for {decl.identifier!r}")
                widget = default_widget(decl.dtype)
                return BoundParam(decl=decl, widget=widget, human_name=decl.title)
            _, widget, human_name, human_description = binding
            return BoundParam(
                decl=decl,
                widget=widget,
                human_name=human_name or decl.title,
                human_description=human_description,
            )

        inputs = tuple(bind(p, required=True) for p in desc.inputs)
        outputs = tuple(bind(p, required=False) for p in desc.outputs)
        if by_param:
            raise ValidationError(f"bindings for unknown parameters: {sorted(by_param)}")

        descriptor = ProcessDescriptor(
            local_id=local_id or new_local_id(desc.identifier, set(self._by_id)),
            display_name=draft.display_name,
            description=draft.description,
            endpoint=draft.endpoint,
            remote_identifier=desc.identifier,
            inputs=inputs,
            outputs=outputs,
            wrapper_name=wrapper_name,
            kind=ProcessKind.REMOTE,
            store_supported=desc.store_supported,
            status_supported=desc.status_supported,
        )
        self.add(descriptor)
        return descriptor


def default_widget(dtype: DataTypeSpec) -> WidgetDescriptor:
    if isinstance(dtype, LiteralType):
        base = dtype.base.lower()
        if base in ("double", "float", "integer", "int"):
            return WidgetDescriptor(kind="number")
        if base == "boolean":
            return WidgetDescriptor(kind="checkbox")
        return WidgetDescriptor(kind="edit")
    if isinstance(dtype, BBoxType):
        return WidgetDescriptor(kind="rectangle")
    return WidgetDescriptor(kind="file_save")


def new_local_id(base: str, taken: set[str]) -> str:
    slug = re.sub(r"[^A-Za-z0-9_-]", "_", base.lower()) or "service"
    name, n = slug, 2
    while name in taken:
        name = f"{slug}-{n}"
        n += 1
    return name


# ---------------------------------------------------------------- JSON codec


def dtype_to_json(dtype: DataTypeSpec) -> dict:
    if isinstance(dtype, LiteralType):
        return {"kind": "literal", "base": dtype.base}
    if isinstance(dtype, ComplexType):
        return {
            "kind": "complex",
            "mime": dtype.mime,
            "encoding": dtype.encoding,
            "schema": dtype.schema,
        }
    if isinstance(dtype, BBoxType):
        return {"kind": "bbox", "default_crs": dtype.default_crs}
    raise TypeError(f"unknown dtype {dtype!r}")


def dtype_from_json(doc: dict) -> DataTypeSpec:
    kind = doc.get("kind")
    if kind == "literal":
        return LiteralType(base=doc["base"])
    if kind == "complex":
        return ComplexType(
            mime=doc["mime"], encoding=doc.get("encoding"), schema=doc.get("schema")
        )
    if kind == "bbox":
        return BBoxType(default_crs=doc.get("default_crs", "EPSG:4326"))
    raise ValidationError(f"unknown dtype kind {kind!r}")


def bound_param_to_json(p: BoundParam) -> dict:
    return {
        "identifier": p.decl.identifier,
        "title": p.decl.title,
        "min_occurs": p.decl.min_occurs,
        "max_occurs": p.decl.max_occurs,
        "dtype": dtype_to_json(p.decl.dtype),
        "widget": {
            "kind": p.widget.kind,
            "min": p.widget.min,
            "max": p.widget.max,
            "default": p.widget.default,
        },
        "human_name": p.human_name,
        "human_description": p.human_description,
    }


def bound_param_from_json(doc: dict) -> BoundParam:
    w = doc.get("widget", {})
    return BoundParam(
        decl=ParamDecl(
            identifier=doc["identifier"],
            title=doc.get("title", doc["identifier"]),
            min_occurs=doc.get("min_occurs", 1),
            max_occurs=doc.get("max_occurs", 1),
            dtype=dtype_from_json(doc["dtype"]),
        ),
        widget=WidgetDescriptor(
            kind=w["kind"], min=w.get("min"), max=w.get("max"), default=w.get("default")
        ),
        human_name=doc.get("human_name", ""),
        human_description=doc.get("human_description", ""),
    )


def descriptor_to_json(d: ProcessDescriptor) -> dict:
    doc = {
        "local_id": d.local_id,
        "display_name": d.display_name,
        "description": d.description,
        "endpoint": d.endpoint,
        "remote_identifier": d.remote_identifier,
        "inputs": [bound_param_to_json(p) for p in d.inputs],
        "outputs": [bound_param_to_json(p) for p in d.outputs],
        "wrapper_name": d.wrapper_name,
        "kind": d.kind.value,
        "store_supported": d.store_supported,
        "status_supported": d.status_supported,
    }
    if d.scenario_source is not None:
        doc["scenario_source"] = d.scenario_source
        doc["entry_function"] = d.entry_function
    return doc


def descriptor_from_json(doc: dict) -> ProcessDescriptor:
    return ProcessDescriptor(
        local_id=doc["local_id"],
        display_name=doc["display_name"],
        description=doc.get("description", ""),
        endpoint=doc["endpoint"],
        remote_identifier=doc["remote_identifier"],
        inputs=tuple(bound_param_from_json(p) for p in doc.get("inputs", [])),
        outputs=tuple(bound_param_from_json(p) for p in doc.get("outputs", [])),
        wrapper_name=doc["wrapper_name"],
        kind=ProcessKind(doc["kind"]),
        store_supported=doc.get("store_supported", True),
        status_supported=doc.get("status_supported", True),
        scenario_source=doc.get("scenario_source"),
        entry_function=doc.get("entry_function"),
    )


def description_of(d: ProcessDescriptor) -> ProcessDescription:
    """Synthesize the WPS description the gateway serves for this entry."""
    return ProcessDescription(
        identifier=d.remote_identifier,
        title=d.display_name,
        abstract=d.description or None,
        inputs=tuple(p.decl for p in d.inputs),
        outputs=tuple(p.decl for p in d.outputs),
        store_supported=d.store_supported,
        status_supported=d.status_supported,
    )
