"""WPS 1.0.0 message model and XML codec.

Covers GetCapabilities / DescribeProcess / Execute / ExecuteResponse
documents. Only version 1.0.0 is accepted; anything else is a
ProtocolError. Unknown elements are skipped, required elements are
enforced. All functions are pure and safe to call concurrently.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional, Union
from xml.etree import ElementTree as ET

from .errors import ProtocolError

log = logging.getLogger(__name__)

WPS_NS = "http://www.opengis.net/wps/1.0.0"
OWS_NS = "http://www.opengis.net/ows/1.1"
XLINK_NS = "http://www.w3.org/1999/xlink"

ET.register_namespace("wps", WPS_NS)
ET.register_namespace("ows", OWS_NS)
ET.register_namespace("xlink", XLINK_NS)


def _wps(tag: str) -> str:
    return f"{{{WPS_NS}}}{tag}"


def _ows(tag: str) -> str:
    return f"{{{OWS_NS}}}{tag}"


def _xlink(tag: str) -> str:
    return f"{{{XLINK_NS}}}{tag}"


# ---------------------------------------------------------------- data types


@dataclass(frozen=True)
class LiteralType:
    base: str  # "string" | "double" | "integer" | "boolean" | ...


@dataclass(frozen=True)
class ComplexType:
    mime: str
    encoding: Optional[str] = None
    schema: Optional[str] = None


@dataclass(frozen=True)
class BBoxType:
    default_crs: str = "EPSG:4326"


DataTypeSpec = Union[LiteralType, ComplexType, BBoxType]


@dataclass(frozen=True)
class ParamDecl:
    identifier: str
    title: str
    dtype: DataTypeSpec
    min_occurs: int = 1
    max_occurs: int = 1


@dataclass(frozen=True)
class ProcessBrief:
    identifier: str
    title: str
    abstract: Optional[str] = None


@dataclass(frozen=True)
class CapabilitiesDoc:
    service_title: str
    process_briefs: tuple[ProcessBrief, ...]


@dataclass(frozen=True)
class ProcessDescription:
    identifier: str
    title: str
    inputs: tuple[ParamDecl, ...]
    outputs: tuple[ParamDecl, ...]
    abstract: Optional[str] = None
    store_supported: bool = False
    status_supported: bool = False


# ---------------------------------------------------------------- values


@dataclass(frozen=True)
class LiteralVal:
    text: str


@dataclass(frozen=True)
class ComplexRef:
    href: str
    mime: str = "application/octet-stream"


@dataclass(frozen=True)
class ComplexInline:
    body: str
    mime: str = "text/plain"


@dataclass(frozen=True)
class BBoxVal:
    minx: float
    miny: float
    maxx: float
    maxy: float
    crs: str = "EPSG:4326"


InputValue = Union[LiteralVal, ComplexRef, ComplexInline, BBoxVal]


# ---------------------------------------------------------------- statuses


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class Accepted:
    timestamp: datetime = field(default_factory=utcnow)


@dataclass(frozen=True)
class Started:
    percent: int = 0
    timestamp: datetime = field(default_factory=utcnow)


@dataclass(frozen=True)
class Succeeded:
    timestamp: datetime = field(default_factory=utcnow)


@dataclass(frozen=True)
class Failed:
    message: str = ""
    timestamp: datetime = field(default_factory=utcnow)


ExecuteStatus = Union[Accepted, Started, Succeeded, Failed]


def is_terminal(status: ExecuteStatus) -> bool:
    return isinstance(status, (Succeeded, Failed))


# ---------------------------------------------------------------- requests


@dataclass(frozen=True)
class ResponseForm:
    store_results: bool = False
    status: bool = False
    requested_outputs: tuple[str, ...] = ()


@dataclass(frozen=True)
class ExecuteRequest:
    process_id: str
    inputs: tuple[tuple[str, InputValue], ...] = ()
    response_form: ResponseForm = ResponseForm()


@dataclass(frozen=True)
class ExecuteResponse:
    process_id: str
    status: ExecuteStatus
    status_location: Optional[str] = None
    outputs: tuple[tuple[str, InputValue], ...] = ()


# ---------------------------------------------------------------- helpers


def _fmt_num(x: float) -> str:
    # shortest decimal form that round-trips through float()
    x = float(x)
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def _parse_xml(data: bytes | str) -> ET.Element:
    # LookupError/ValueError cover hostile encoding declarations
    try:
        return ET.fromstring(data)
    except (ET.ParseError, LookupError, ValueError) as exc:
        raise ProtocolError(f"malformed XML: {exc}") from exc


def _find_any(elem: ET.Element, *names: str) -> Optional[ET.Element]:
    """WPS 1.0.0 local elements are unqualified in the schema, but some
    servers emit them wps-qualified; accept either spelling."""
    for name in names:
        found = elem.find(name)
        if found is None:
            found = elem.find(_wps(name))
        if found is not None:
            return found
    return None


def _check_version(root: ET.Element) -> None:
    version = root.get("version")
    if version is not None and version != "1.0.0":
        raise ProtocolError(f"unsupported WPS version {version!r}")


def _text(elem: Optional[ET.Element]) -> Optional[str]:
    if elem is None:
        return None
    return elem.text or ""


def _require_identifier(elem: ET.Element, context: str) -> str:
    ident = _text(elem.find(_ows("Identifier")))
    if not ident:
        raise ProtocolError(f"missing Identifier in {context}")
    return ident


# ---------------------------------------------------------------- capabilities


def parse_capabilities(xml: bytes | str) -> CapabilitiesDoc:
    root = _parse_xml(xml)
    _check_version(root)
    offerings = root.find(_wps("ProcessOfferings"))
    if offerings is None:
        raise ProtocolError("missing ProcessOfferings")
    ident = root.find(f"{_ows('ServiceIdentification')}/{_ows('Title')}")
    briefs = []
    seen = set()
    for proc in offerings.findall(_wps("Process")):
        pid = _require_identifier(proc, "Process")
        if pid in seen:
            raise ProtocolError(f"duplicate process identifier {pid!r}")
        seen.add(pid)
        briefs.append(
            ProcessBrief(
                identifier=pid,
                title=_text(proc.find(_ows("Title"))) or pid,
                abstract=_text(proc.find(_ows("Abstract"))),
            )
        )
    return CapabilitiesDoc(
        service_title=_text(ident) or "WPS",
        process_briefs=tuple(briefs),
    )


def encode_capabilities(doc: CapabilitiesDoc) -> bytes:
    root = ET.Element(_wps("Capabilities"), {"service": "WPS", "version": "1.0.0"})
    si = ET.SubElement(root, _ows("ServiceIdentification"))
    ET.SubElement(si, _ows("Title")).text = doc.service_title
    offerings = ET.SubElement(root, _wps("ProcessOfferings"))
    for brief in doc.process_briefs:
        proc = ET.SubElement(offerings, _wps("Process"), {_wps("processVersion"): "1"})
        ET.SubElement(proc, _ows("Identifier")).text = brief.identifier
        ET.SubElement(proc, _ows("Title")).text = brief.title
        if brief.abstract is not None:
            ET.SubElement(proc, _ows("Abstract")).text = brief.abstract
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


# ---------------------------------------------------------------- descriptions


def _parse_dtype(container: ET.Element, is_input: bool) -> DataTypeSpec:
    literal = _find_any(container, "LiteralData", "LiteralOutput")
    if literal is not None:
        dtype_el = literal.find(_ows("DataType"))
        base = None
        if dtype_el is not None:
            base = dtype_el.text or dtype_el.get(_ows("reference"))
            if base and "#" in base:
                base = base.rsplit("#", 1)[1]
        return LiteralType(base=base or "string")

    cx = _find_any(container, "ComplexData", "ComplexOutput")
    if cx is not None:
        default = _find_any(cx, "Default")
        fmt = _find_any(default, "Format") if default is not None else None
        if fmt is None:
            raise ProtocolError("ComplexData without Default Format")
        mime = _text(_find_any(fmt, "MimeType"))
        if not mime:
            raise ProtocolError("ComplexData Format without MimeType")
        enc = _find_any(fmt, "Encoding")
        schema = _find_any(fmt, "Schema")
        return ComplexType(
            mime=mime,
            encoding=enc.text if enc is not None else None,
            schema=schema.text if schema is not None else None,
        )

    bbox = _find_any(container, "BoundingBoxData", "BoundingBoxOutput")
    if bbox is not None:
        default = _find_any(bbox, "Default")
        crs = _text(_find_any(default, "CRS")) if default is not None else None
        return BBoxType(default_crs=crs or "EPSG:4326")

    raise ProtocolError("unsupported data form")


def _parse_param(elem: ET.Element, is_input: bool) -> ParamDecl:
    ident = _require_identifier(elem, "parameter")
    title = _text(elem.find(_ows("Title"))) or ident
    min_occurs = int(elem.get("minOccurs", "1"))
    max_occurs = int(elem.get("maxOccurs", "1"))
    return ParamDecl(
        identifier=ident,
        title=title,
        dtype=_parse_dtype(elem, is_input),
        min_occurs=min_occurs,
        max_occurs=max_occurs,
    )


def parse_process_description(xml: bytes | str) -> ProcessDescription:
    root = _parse_xml(xml)
    _check_version(root)
    if root.tag == _wps("ProcessDescriptions"):
        desc = root.find("ProcessDescription")
        if desc is None:
            desc = root.find(_wps("ProcessDescription"))
    else:
        desc = root
    if desc is None:
        raise ProtocolError("missing ProcessDescription")
    ident = _require_identifier(desc, "ProcessDescription")

    inputs = []
    data_inputs = desc.find(_wps("DataInputs"))
    if data_inputs is None:
        data_inputs = desc.find("DataInputs")
    if data_inputs is not None:
        for el in data_inputs:
            if el.tag in (_wps("Input"), "Input"):
                inputs.append(_parse_param(el, is_input=True))

    outputs = []
    proc_outputs = desc.find(_wps("ProcessOutputs"))
    if proc_outputs is None:
        proc_outputs = desc.find("ProcessOutputs")
    if proc_outputs is not None:
        for el in proc_outputs:
            if el.tag in (_wps("Output"), "Output"):
                outputs.append(_parse_param(el, is_input=False))

    seen_in = [p.identifier for p in inputs]
    seen_out = [p.identifier for p in outputs]
    if len(set(seen_in)) != len(seen_in) or len(set(seen_out)) != len(seen_out):
        raise ProtocolError("duplicate parameter identifier")

    return ProcessDescription(
        identifier=ident,
        title=_text(desc.find(_ows("Title"))) or ident,
        abstract=_text(desc.find(_ows("Abstract"))),
        inputs=tuple(inputs),
        outputs=tuple(outputs),
        store_supported=desc.get("storeSupported", "false") == "true",
        status_supported=desc.get("statusSupported", "false") == "true",
    )


def _encode_dtype(parent: ET.Element, dtype: DataTypeSpec, is_input: bool) -> None:
    if isinstance(dtype, LiteralType):
        lit = ET.SubElement(parent, _wps("LiteralData" if is_input else "LiteralOutput"))
        ET.SubElement(lit, _ows("DataType")).text = dtype.base
    elif isinstance(dtype, ComplexType):
        cx = ET.SubElement(parent, _wps("ComplexData" if is_input else "ComplexOutput"))
        fmt = ET.SubElement(ET.SubElement(cx, _wps("Default")), _wps("Format"))
        ET.SubElement(fmt, _wps("MimeType")).text = dtype.mime
        if dtype.encoding is not None:
            ET.SubElement(fmt, _wps("Encoding")).text = dtype.encoding
        if dtype.schema is not None:
            ET.SubElement(fmt, _wps("Schema")).text = dtype.schema
    elif isinstance(dtype, BBoxType):
        bb = ET.SubElement(
            parent, _wps("BoundingBoxData" if is_input else "BoundingBoxOutput")
        )
        ET.SubElement(ET.SubElement(bb, _wps("Default")), _wps("CRS")).text = (
            dtype.default_crs
        )
    else:  # pragma: no cover
        raise TypeError(f"unknown dtype {dtype!r}")


def encode_process_description(desc: ProcessDescription) -> bytes:
    root = ET.Element(
        _wps("ProcessDescriptions"),
        {"service": "WPS", "version": "1.0.0", "lang": "en-US"},
    )
    pd = ET.SubElement(
        root,
        "ProcessDescription",
        {
            "storeSupported": "true" if desc.store_supported else "false",
            "statusSupported": "true" if desc.status_supported else "false",
            _wps("processVersion"): "1",
        },
    )
    ET.SubElement(pd, _ows("Identifier")).text = desc.identifier
    ET.SubElement(pd, _ows("Title")).text = desc.title
    if desc.abstract is not None:
        ET.SubElement(pd, _ows("Abstract")).text = desc.abstract
    if desc.inputs:
        di = ET.SubElement(pd, "DataInputs")
        for p in desc.inputs:
            el = ET.SubElement(
                di,
                "Input",
                {"minOccurs": str(p.min_occurs), "maxOccurs": str(p.max_occurs)},
            )
            ET.SubElement(el, _ows("Identifier")).text = p.identifier
            ET.SubElement(el, _ows("Title")).text = p.title
            _encode_dtype(el, p.dtype, is_input=True)
    po = ET.SubElement(pd, "ProcessOutputs")
    for p in desc.outputs:
        el = ET.SubElement(po, "Output")
        ET.SubElement(el, _ows("Identifier")).text = p.identifier
        ET.SubElement(el, _ows("Title")).text = p.title
        _encode_dtype(el, p.dtype, is_input=False)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


# ---------------------------------------------------------------- execute


def _encode_value(parent: ET.Element, value: InputValue) -> None:
    if isinstance(value, LiteralVal):
        data = ET.SubElement(parent, _wps("Data"))
        ET.SubElement(data, _wps("LiteralData")).text = value.text
    elif isinstance(value, ComplexRef):
        ET.SubElement(
            parent,
            _wps("Reference"),
            {_xlink("href"): value.href, "mimeType": value.mime},
        )
    elif isinstance(value, ComplexInline):
        data = ET.SubElement(parent, _wps("Data"))
        cx = ET.SubElement(data, _wps("ComplexData"), {"mimeType": value.mime})
        cx.text = value.body
    elif isinstance(value, BBoxVal):
        data = ET.SubElement(parent, _wps("Data"))
        bb = ET.SubElement(data, _wps("BoundingBoxData"), {"crs": value.crs})
        ET.SubElement(bb, _ows("LowerCorner")).text = (
            f"{_fmt_num(value.minx)} {_fmt_num(value.miny)}"
        )
        ET.SubElement(bb, _ows("UpperCorner")).text = (
            f"{_fmt_num(value.maxx)} {_fmt_num(value.maxy)}"
        )
    else:  # pragma: no cover
        raise TypeError(f"unknown input value {value!r}")


def _decode_value(container: ET.Element) -> InputValue:
    ref = container.find(_wps("Reference"))
    if ref is not None:
        href = ref.get(_xlink("href")) or ref.get("href")
        if not href:
            raise ProtocolError("Reference without href")
        return ComplexRef(href=href, mime=ref.get("mimeType") or "application/octet-stream")

    data = container.find(_wps("Data"))
    if data is None:
        raise ProtocolError("input without Data or Reference")

    lit = data.find(_wps("LiteralData"))
    if lit is not None:
        return LiteralVal(text=lit.text or "")

    cx = data.find(_wps("ComplexData"))
    if cx is not None:
        return ComplexInline(body=cx.text or "", mime=cx.get("mimeType") or "text/plain")

    bb = data.find(_wps("BoundingBoxData"))
    if bb is not None:
        lower = _text(bb.find(_ows("LowerCorner")))
        upper = _text(bb.find(_ows("UpperCorner")))
        if not lower or not upper:
            raise ProtocolError("BoundingBoxData without corners")
        try:
            minx, miny = (float(v) for v in lower.split())
            maxx, maxy = (float(v) for v in upper.split())
        except ValueError as exc:
            raise ProtocolError(f"bad corner coordinates: {exc}") from exc
        return BBoxVal(minx, miny, maxx, maxy, crs=bb.get("crs") or "EPSG:4326")

    raise ProtocolError("unsupported data form")


def encode_execute(req: ExecuteRequest) -> bytes:
    root = ET.Element(_wps("Execute"), {"service": "WPS", "version": "1.0.0"})
    ET.SubElement(root, _ows("Identifier")).text = req.process_id
    di = ET.SubElement(root, _wps("DataInputs"))
    for ident, value in req.inputs:
        inp = ET.SubElement(di, _wps("Input"))
        ET.SubElement(inp, _ows("Identifier")).text = ident
        _encode_value(inp, value)
    form = req.response_form
    rf = ET.SubElement(root, _wps("ResponseForm"))
    rd = ET.SubElement(
        rf,
        _wps("ResponseDocument"),
        {
            "storeExecuteResponse": "true" if form.store_results else "false",
            "status": "true" if form.status else "false",
        },
    )
    for out in form.requested_outputs:
        oel = ET.SubElement(rd, _wps("Output"))
        ET.SubElement(oel, _ows("Identifier")).text = out
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


def decode_execute(xml: bytes | str) -> ExecuteRequest:
    root = _parse_xml(xml)
    if root.tag != _wps("Execute"):
        raise ProtocolError(f"expected wps:Execute, got {root.tag}")
    _check_version(root)
    process_id = _require_identifier(root, "Execute")

    inputs = []
    di = root.find(_wps("DataInputs"))
    if di is not None:
        for inp in di.findall(_wps("Input")):
            ident = _require_identifier(inp, "Input")
            inputs.append((ident, _decode_value(inp)))

    form = ResponseForm()
    rd = root.find(f"{_wps('ResponseForm')}/{_wps('ResponseDocument')}")
    if rd is not None:
        form = ResponseForm(
            store_results=rd.get("storeExecuteResponse") == "true",
            status=rd.get("status") == "true",
            requested_outputs=tuple(
                _require_identifier(o, "Output") for o in rd.findall(_wps("Output"))
            ),
        )
    return ExecuteRequest(process_id=process_id, inputs=tuple(inputs), response_form=form)


# ---------------------------------------------------------------- responses


def encode_execute_response(resp: ExecuteResponse) -> bytes:
    attrs = {"service": "WPS", "version": "1.0.0"}
    if resp.status_location is not None:
        attrs["statusLocation"] = resp.status_location
    root = ET.Element(_wps("ExecuteResponse"), attrs)
    proc = ET.SubElement(root, _wps("Process"))
    ET.SubElement(proc, _ows("Identifier")).text = resp.process_id

    status_el = ET.SubElement(
        root, _wps("Status"), {"creationTime": resp.status.timestamp.isoformat()}
    )
    st = resp.status
    if isinstance(st, Accepted):
        ET.SubElement(status_el, _wps("ProcessAccepted")).text = "accepted"
    elif isinstance(st, Started):
        ET.SubElement(
            status_el, _wps("ProcessStarted"), {"percentCompleted": str(st.percent)}
        ).text = "running"
    elif isinstance(st, Succeeded):
        ET.SubElement(status_el, _wps("ProcessSucceeded")).text = "done"
    elif isinstance(st, Failed):
        failed = ET.SubElement(status_el, _wps("ProcessFailed"))
        report = ET.SubElement(
            failed, _ows("ExceptionReport"), {"version": "1.1.0"}
        )
        exc = ET.SubElement(report, _ows("Exception"), {"exceptionCode": "NoApplicableCode"})
        ET.SubElement(exc, _ows("ExceptionText")).text = st.message
    else:  # pragma: no cover
        raise TypeError(f"unknown status {st!r}")

    if resp.outputs:
        po = ET.SubElement(root, _wps("ProcessOutputs"))
        for ident, value in resp.outputs:
            out = ET.SubElement(po, _wps("Output"))
            ET.SubElement(out, _ows("Identifier")).text = ident
            _encode_value(out, value)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


def encode_exception_report(code: str, text: str) -> bytes:
    root = ET.Element(_ows("ExceptionReport"), {"version": "1.1.0"})
    exc = ET.SubElement(root, _ows("Exception"), {"exceptionCode": code})
    ET.SubElement(exc, _ows("ExceptionText")).text = text
    return ET.tostring(root, encoding="utf-8", xml_declaration=True)


def parse_execute_response(xml: bytes | str) -> ExecuteResponse:
    root = _parse_xml(xml)
    if root.tag != _wps("ExecuteResponse"):
        raise ProtocolError(f"expected wps:ExecuteResponse, got {root.tag}")
    _check_version(root)
    process_id = _require_identifier(root.find(_wps("Process")) or root, "Process")

    status_el = root.find(_wps("Status"))
    if status_el is None:
        raise ProtocolError("missing Status")
    try:
        ts = datetime.fromisoformat(status_el.get("creationTime", ""))
    except ValueError:
        ts = utcnow()

    status: ExecuteStatus
    if status_el.find(_wps("ProcessAccepted")) is not None:
        status = Accepted(timestamp=ts)
    elif (started := status_el.find(_wps("ProcessStarted"))) is not None:
        raw = started.get("percentCompleted")
        try:
            percent = int(float(raw)) if raw is not None else 0
        except ValueError:
            percent = 0
        if not 0 <= percent <= 99:
            log.warning("percentCompleted %s outside [0,99]; clamping", percent)
            percent = min(99, max(0, percent))
        status = Started(percent=percent, timestamp=ts)
    elif status_el.find(_wps("ProcessSucceeded")) is not None:
        status = Succeeded(timestamp=ts)
    elif (failed := status_el.find(_wps("ProcessFailed"))) is not None:
        text = failed.find(f".//{_ows('ExceptionText')}")
        status = Failed(message=_text(text) or "", timestamp=ts)
    else:
        raise ProtocolError("Status without a recognized state")

    outputs = []
    po = root.find(_wps("ProcessOutputs"))
    if po is not None:
        for out in po.findall(_wps("Output")):
            ident = _require_identifier(out, "Output")
            outputs.append((ident, _decode_value(out)))

    return ExecuteResponse(
        process_id=process_id,
        status=status,
        status_location=root.get("statusLocation"),
        outputs=tuple(outputs),
    )
