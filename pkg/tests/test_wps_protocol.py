"""WPS 1.0.0 codec tests: fixed-document oracles, round trips, decoder fuzz."""

from __future__ import annotations

import random
import string
import xml.etree.ElementTree as ET

import pytest

from wpsenv.errors import ProtocolError, WpsEnvError
from wpsenv.wps_protocol import (
    Accepted,
    BBoxType,
    BBoxVal,
    CapabilitiesDoc,
    ComplexInline,
    ComplexRef,
    ComplexType,
    ExecuteRequest,
    ExecuteResponse,
    Failed,
    LiteralType,
    LiteralVal,
    ParamDecl,
    ProcessBrief,
    ProcessDescription,
    ResponseForm,
    Started,
    Succeeded,
    decode_execute,
    encode_capabilities,
    encode_exception_report,
    encode_execute,
    encode_execute_response,
    encode_process_description,
    is_terminal,
    parse_capabilities,
    parse_execute_response,
    parse_process_description,
)

WPS = "http://www.opengis.net/wps/1.0.0"
OWS = "http://www.opengis.net/ows/1.1"


# ------------------------------------------------------------- fixed oracles

CAPS_XML = f"""<?xml version="1.0" encoding="UTF-8"?>
<wps:Capabilities service="WPS" version="1.0.0"
    xmlns:wps="{WPS}" xmlns:ows="{OWS}">
  <ows:ServiceIdentification>
    <ows:Title>Test server</ows:Title>
  </ows:ServiceIdentification>
  <wps:ProcessOfferings>
    <wps:Process wps:processVersion="1">
      <ows:Identifier>buffer</ows:Identifier>
      <ows:Title>Buffer geometry</ows:Title>
      <ows:Abstract>Buffers features.</ows:Abstract>
    </wps:Process>
    <wps:Process>
      <ows:Identifier>contour</ows:Identifier>
      <ows:Title>Contour lines</ows:Title>
    </wps:Process>
  </wps:ProcessOfferings>
</wps:Capabilities>
"""

DESCRIBE_XML = f"""<?xml version="1.0" encoding="UTF-8"?>
<wps:ProcessDescriptions service="WPS" version="1.0.0"
    xmlns:wps="{WPS}" xmlns:ows="{OWS}">
  <ProcessDescription storeSupported="true" statusSupported="true">
    <ows:Identifier>buffer</ows:Identifier>
    <ows:Title>Buffer geometry</ows:Title>
    <DataInputs>
      <Input minOccurs="1" maxOccurs="1">
        <ows:Identifier>distance</ows:Identifier>
        <ows:Title>Distance</ows:Title>
        <LiteralData><ows:DataType>double</ows:DataType></LiteralData>
      </Input>
      <Input minOccurs="0" maxOccurs="1">
        <ows:Identifier>geometry</ows:Identifier>
        <ows:Title>Geometry</ows:Title>
        <ComplexData>
          <Default><Format><MimeType>application/gml+xml</MimeType></Format></Default>
        </ComplexData>
      </Input>
      <Input minOccurs="1" maxOccurs="1">
        <ows:Identifier>region</ows:Identifier>
        <ows:Title>Region</ows:Title>
        <BoundingBoxData>
          <Default><CRS>EPSG:3857</CRS></Default>
        </BoundingBoxData>
      </Input>
    </DataInputs>
    <ProcessOutputs>
      <Output>
        <ows:Identifier>result</ows:Identifier>
        <ows:Title>Result</ows:Title>
        <ComplexOutput>
          <Default><Format><MimeType>application/gml+xml</MimeType></Format></Default>
        </ComplexOutput>
      </Output>
    </ProcessOutputs>
  </ProcessDescription>
</wps:ProcessDescriptions>
"""


def test_parse_capabilities_fixed_document():
    doc = parse_capabilities(CAPS_XML)
    assert [p.identifier for p in doc.process_briefs] == ["buffer", "contour"]
    assert doc.process_briefs[0].title == "Buffer geometry"
    assert doc.process_briefs[0].abstract == "Buffers features."
    assert doc.process_briefs[1].abstract is None


def test_parse_process_description_fixed_document():
    desc = parse_process_description(DESCRIBE_XML)
    assert desc.identifier == "buffer"
    assert desc.store_supported and desc.status_supported
    by_id = {p.identifier: p for p in desc.inputs}
    assert isinstance(by_id["distance"].dtype, LiteralType)
    assert by_id["distance"].dtype.base == "double"
    assert isinstance(by_id["geometry"].dtype, ComplexType)
    assert by_id["geometry"].dtype.mime == "application/gml+xml"
    assert by_id["geometry"].min_occurs == 0
    assert isinstance(by_id["region"].dtype, BBoxType)
    assert by_id["region"].dtype.default_crs == "EPSG:3857"
    assert desc.outputs[0].identifier == "result"
    assert isinstance(desc.outputs[0].dtype, ComplexType)


def test_capabilities_round_trip():
    doc = CapabilitiesDoc(
        service_title="svc",
        process_briefs=(
            ProcessBrief(identifier="a", title="A", abstract="first"),
            ProcessBrief(identifier="b", title="B", abstract=None),
        ),
    )
    back = parse_capabilities(encode_capabilities(doc))
    assert back.process_briefs == doc.process_briefs


def test_process_description_round_trip():
    desc = ProcessDescription(
        identifier="p",
        title="P",
        abstract="does p",
        inputs=(
            ParamDecl("x", "X", LiteralType("integer")),
            ParamDecl("g", "G", ComplexType("text/xml", "utf-8", "http://s")),
            ParamDecl("bb", "BB", BBoxType("EPSG:4326")),
        ),
        outputs=(ParamDecl("out", "Out", ComplexType("text/plain")),),
        store_supported=True,
        status_supported=False,
    )
    back = parse_process_description(encode_process_description(desc))
    assert back.identifier == desc.identifier
    assert back.inputs == desc.inputs
    assert back.outputs == desc.outputs
    assert back.store_supported is True
    assert back.status_supported is False


def test_wrong_version_rejected():
    bad = CAPS_XML.replace('version="1.0.0"', 'version="2.0.0"')
    with pytest.raises(ProtocolError):
        parse_capabilities(bad)


def test_exception_report_is_well_formed():
    body = encode_exception_report("InvalidParameterValue", "bad identifier")
    root = ET.fromstring(body)
    assert root.tag.endswith("ExceptionReport")
    exc = root.find(f"{{{OWS}}}Exception")
    assert exc.get("exceptionCode") == "InvalidParameterValue"
    assert "bad identifier" in exc.find(f"{{{OWS}}}ExceptionText").text


def test_started_percent_clamped():
    xml = f"""<wps:ExecuteResponse service="WPS" version="1.0.0"
        xmlns:wps="{WPS}" xmlns:ows="{OWS}">
      <wps:Process><ows:Identifier>p</ows:Identifier></wps:Process>
      <wps:Status>
        <wps:ProcessStarted percentCompleted="250">working</wps:ProcessStarted>
      </wps:Status>
    </wps:ExecuteResponse>"""
    resp = parse_execute_response(xml)
    assert isinstance(resp.status, Started)
    assert 0 <= resp.status.percent <= 99


def test_started_percent_missing_defaults_to_zero():
    xml = f"""<wps:ExecuteResponse service="WPS" version="1.0.0"
        xmlns:wps="{WPS}" xmlns:ows="{OWS}">
      <wps:Process><ows:Identifier>p</ows:Identifier></wps:Process>
      <wps:Status><wps:ProcessStarted>working</wps:ProcessStarted></wps:Status>
    </wps:ExecuteResponse>"""
    resp = parse_execute_response(xml)
    assert resp.status == Started(percent=0, timestamp=resp.status.timestamp)


def test_is_terminal():
    assert not is_terminal(Accepted())
    assert not is_terminal(Started(percent=10))
    assert is_terminal(Succeeded())
    assert is_terminal(Failed(message="x"))


# --------------------------------------------------------- randomized trips


def _rand_text(rng: random.Random, n: int = 12) -> str:
    alphabet = string.ascii_letters + string.digits + " .,-_:/&<>'\""
    return "".join(rng.choice(alphabet) for _ in range(rng.randint(0, n)))


def _rand_ident(rng: random.Random) -> str:
    return "p_" + "".join(rng.choice(string.ascii_lowercase) for _ in range(6))


def _rand_input_value(rng: random.Random):
    kind = rng.randrange(4)
    if kind == 0:
        return LiteralVal(text=_rand_text(rng))
    if kind == 1:
        return ComplexRef(
            href="http://host/" + _rand_ident(rng), mime=rng.choice(["text/xml", "text/plain"])
        )
    if kind == 2:
        return ComplexInline(body=_rand_text(rng, 40), mime="text/plain")
    a, b = sorted(rng.uniform(-180, 180) for _ in range(2))
    c, d = sorted(rng.uniform(-90, 90) for _ in range(2))
    return BBoxVal(minx=a, miny=c, maxx=b, maxy=d, crs="EPSG:4326")


def _rand_request(rng: random.Random) -> ExecuteRequest:
    n = rng.randint(0, 6)
    return ExecuteRequest(
        process_id=_rand_ident(rng),
        inputs=tuple((_rand_ident(rng), _rand_input_value(rng)) for _ in range(n)),
        response_form=ResponseForm(
            store_results=rng.random() < 0.5,
            status=rng.random() < 0.5,
            requested_outputs=tuple(_rand_ident(rng) for _ in range(rng.randint(0, 3))),
        ),
    )


def _rand_status(rng: random.Random):
    k = rng.randrange(4)
    if k == 0:
        return Accepted()
    if k == 1:
        return Started(percent=rng.randint(0, 99))
    if k == 2:
        return Succeeded()
    return Failed(message=_rand_text(rng) or "boom")


def _rand_response(rng: random.Random) -> ExecuteResponse:
    status = _rand_status(rng)
    outputs = ()
    if isinstance(status, Succeeded):
        outputs = tuple(
            (
                _rand_ident(rng),
                rng.choice(
                    [
                        LiteralVal(text=_rand_text(rng)),
                        ComplexRef(href="http://host/r/" + _rand_ident(rng), mime="text/plain"),
                    ]
                ),
            )
            for _ in range(rng.randint(0, 3))
        )
    return ExecuteResponse(
        process_id=_rand_ident(rng),
        status=status,
        status_location=(
            "http://host/status/" + _rand_ident(rng) if rng.random() < 0.5 else None
        ),
        outputs=outputs,
    )


def _status_eq(a, b) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, Started):
        return a.percent == b.percent
    if isinstance(a, Failed):
        return a.message == b.message
    return True


def test_execute_request_round_trip_500_cases():
    rng = random.Random(20260824)
    for _ in range(500):
        req = _rand_request(rng)
        back = decode_execute(encode_execute(req))
        assert back.process_id == req.process_id
        assert len(back.inputs) == len(req.inputs)
        for (pid_a, val_a), (pid_b, val_b) in zip(req.inputs, back.inputs):
            assert pid_a == pid_b
            if isinstance(val_a, BBoxVal):
                assert isinstance(val_b, BBoxVal)
                for f in ("minx", "miny", "maxx", "maxy"):
                    assert getattr(val_a, f) == pytest.approx(getattr(val_b, f))
            else:
                assert val_a == val_b
        assert back.response_form.store_results == req.response_form.store_results
        assert back.response_form.status == req.response_form.status
        assert tuple(back.response_form.requested_outputs) == tuple(
            req.response_form.requested_outputs
        )


def test_execute_response_round_trip_500_cases():
    rng = random.Random(9121)
    for _ in range(500):
        resp = _rand_response(rng)
        back = parse_execute_response(encode_execute_response(resp))
        assert back.process_id == resp.process_id
        assert _status_eq(back.status, resp.status)
        assert back.status_location == resp.status_location
        assert len(back.outputs) == len(resp.outputs)
        for (pid_a, val_a), (pid_b, val_b) in zip(resp.outputs, back.outputs):
            assert pid_a == pid_b
            assert val_a == val_b


# ------------------------------------------------------------------ fuzzing


def _mutate(data: bytes, rng: random.Random) -> bytes:
    buf = bytearray(data)
    for _ in range(rng.randint(1, 8)):
        op = rng.randrange(3)
        if op == 0 and buf:
            buf[rng.randrange(len(buf))] = rng.randrange(256)
        elif op == 1 and buf:
            del buf[rng.randrange(len(buf))]
        else:
            buf.insert(rng.randrange(len(buf) + 1), rng.randrange(256))
    return bytes(buf)


def test_decoder_fuzz_10000_cases_no_aborts():
    rng = random.Random(0xFACADE)
    seeds = [
        encode_execute(_rand_request(rng)),
        encode_execute_response(_rand_response(rng)),
        CAPS_XML.encode(),
        DESCRIBE_XML.encode(),
        b"",
        b"<not-xml",
        b"\xff\xfe\x00garbage",
    ]
    decoders = [decode_execute, parse_execute_response, parse_capabilities,
                parse_process_description]
    for i in range(10_000):
        seed = seeds[i % len(seeds)]
        data = _mutate(seed, rng) if rng.random() < 0.9 else bytes(
            rng.randrange(256) for _ in range(rng.randint(0, 200))
        )
        decoder = decoders[i % len(decoders)]
        try:
            decoder(data)
        except WpsEnvError:
            pass  # structured rejection is the contract; anything else aborts
