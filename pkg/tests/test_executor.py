"""Executor tests: status machine, marshaling, journal replay, remote polling."""

from __future__ import annotations

import dataclasses
import json
import os
import time

import pytest

from conftest import ASC, LIT_NUM, LIT_STR, USER, make_stack, param
from wpsenv.catalog import Extent, ProcessDescriptor, ProcessKind
from wpsenv.errors import GoneError, ValidationError
from wpsenv.executor import InstanceRegistry, canonical_literal
from wpsenv.wps_protocol import (
    Accepted,
    BBoxVal,
    ComplexRef,
    Failed,
    LiteralVal,
    Started,
    Succeeded,
)


@pytest.fixture()
def stack(tmp_path):
    s = make_stack(tmp_path, poll_interval_ms=100)
    yield s
    s.server.stop()


# ----------------------------------------------------------- canonical_literal


def test_canonical_literal_forms():
    assert canonical_literal(True) == "true"
    assert canonical_literal(False) == "false"
    assert canonical_literal(3.0) == "3"
    assert canonical_literal(3.5) == "3.5"
    assert canonical_literal("plain") == "plain"


# -------------------------------------------------------------- status machine


def test_status_machine_no_exit_from_terminal(stack):
    reg = stack.env.registry
    inst = reg.create(USER, "slow_echo")
    assert isinstance(inst.status, Accepted)
    assert reg.set_status(inst.id, Started(percent=10))
    assert reg.set_status(inst.id, Succeeded())
    # terminal state is absorbing
    assert not reg.set_status(inst.id, Started(percent=90))
    assert not reg.set_status(inst.id, Failed(message="late"))
    assert isinstance(reg.get(inst.id).status, Succeeded)


def test_status_machine_percent_monotone(stack):
    reg = stack.env.registry
    inst = reg.create(USER, "slow_echo")
    reg.set_status(inst.id, Started(percent=40))
    reg.set_status(inst.id, Started(percent=10))  # regression clamped, not applied
    assert reg.get(inst.id).status.percent == 40
    reg.set_status(inst.id, Started(percent=70))
    assert reg.get(inst.id).status.percent == 70


def test_journal_replay_marks_orphans_failed(tmp_path):
    journal = os.path.join(str(tmp_path), "instances.jsonl")
    reg = InstanceRegistry(journal)
    running = reg.create(USER, "slow_echo")
    reg.set_status(running.id, Started(percent=30))
    done = reg.create(USER, "g_sum")
    reg.set_status(done.id, Succeeded())

    # a process crash leaves the journal as-is; a new registry replays it
    reg2 = InstanceRegistry(journal)
    replayed = reg2.get(running.id)
    assert isinstance(replayed.status, Failed)
    assert replayed.status.message == "orphaned"
    assert replayed.finished_at is not None
    assert isinstance(reg2.get(done.id).status, Succeeded)


def test_journal_replay_tolerates_torn_tail(tmp_path):
    journal = os.path.join(str(tmp_path), "instances.jsonl")
    reg = InstanceRegistry(journal)
    inst = reg.create(USER, "g_sum")
    reg.set_status(inst.id, Succeeded())
    with open(journal, "a", encoding="utf-8") as fh:
        fh.write('{"id": "trunc')  # interrupted write
    reg2 = InstanceRegistry(journal)
    assert isinstance(reg2.get(inst.id).status, Succeeded)


def test_snapshot_shape(stack):
    reg = stack.env.registry
    inst = reg.create(USER, "slow_echo")
    snap = reg.snapshot(inst.id)
    assert snap["id"] == inst.id
    assert snap["service_id"] == "slow_echo"
    assert snap["status"]["state"] == "accepted"
    assert snap["results"] == []


# ------------------------------------------------------------- validate_values


def _toy_descriptor(inputs, outputs=()):
    return ProcessDescriptor(
        local_id="toy",
        display_name="toy",
        description="",
        endpoint="local:",
        remote_identifier="toy",
        inputs=tuple(inputs),
        outputs=tuple(outputs),
        wrapper_name="toy",
        kind=ProcessKind.LOCAL_BUILTIN,
    )


def test_validate_values_missing_required(stack):
    desc = _toy_descriptor([param("n", "number", LIT_NUM)])
    with pytest.raises(ValidationError, match="missing"):
        stack.env.executor.validate_values(desc, {}, USER)


def test_validate_values_unknown_parameter(stack):
    desc = _toy_descriptor([param("n", "number", LIT_NUM)])
    with pytest.raises(ValidationError, match="unknown"):
        stack.env.executor.validate_values(desc, {"n": "1", "bogus": "2"}, USER)


def test_validate_values_converts_by_widget(stack):
    stack.put_fixture_files()
    desc = _toy_descriptor(
        [
            param("n", "number", LIT_NUM),
            param("flag", "checkbox", {"kind": "literal", "base": "boolean"}),
            param("src", "file", ASC),
        ]
    )
    values = stack.env.executor.validate_values(
        desc, {"n": "2.5", "flag": "true", "src": "in/points.csv"}, USER
    )
    assert values["n"] == 2.5
    assert values["flag"] is True
    assert values["src"] == "in/points.csv"


def test_validate_values_rejects_missing_file(stack):
    desc = _toy_descriptor([param("src", "file", ASC)])
    with pytest.raises(ValidationError):
        stack.env.executor.validate_values(desc, {"src": "in/nope.csv"}, USER)


# -------------------------------------------------------------- marshal_inputs


def test_marshal_file_becomes_one_time_link(stack):
    stack.put_fixture_files()
    desc = _toy_descriptor([param("src", "file", ASC)])
    inst = stack.env.registry.create(USER, "toy")
    marshaled = stack.env.executor.marshal_inputs(
        desc, {"src": "in/points.csv"}, inst.id, USER
    )
    [(pid, value)] = marshaled
    assert pid == "src"
    assert isinstance(value, ComplexRef)
    assert value.href.startswith(stack.base + "/files/")
    # the link serves the file content and dies with the instance
    import requests

    assert requests.get(value.href, timeout=10).status_code == 200
    stack.env.registry.set_status(inst.id, Failed(message="x"))
    stack.env.links.terminate_instance(inst.id)
    assert requests.get(value.href, timeout=10).status_code == 410


def test_marshal_rectangle_becomes_bbox(stack):
    desc = _toy_descriptor([param("area", "rectangle", {"kind": "bbox", "crs": "EPSG:4326"})])
    inst = stack.env.registry.create(USER, "toy")
    [(_, value)] = stack.env.executor.marshal_inputs(
        desc, {"area": Extent(0, 1, 2, 3)}, inst.id, USER
    )
    assert isinstance(value, BBoxVal)
    assert (value.minx, value.miny, value.maxx, value.maxy) == (0, 1, 2, 3)


def test_marshal_select_table_local_only(stack):
    desc = _toy_descriptor([param("tbl", "select_table", LIT_STR)])
    inst = stack.env.registry.create(USER, "toy")
    [(_, value)] = stack.env.executor.marshal_inputs(
        desc, {"tbl": "roads"}, inst.id, USER
    )
    assert isinstance(value, LiteralVal)
    assert value.text == f"dsn://{USER}/roads"

    remote = dataclasses.replace(desc, kind=ProcessKind.REMOTE)
    with pytest.raises(ValidationError, match="local"):
        stack.env.executor.marshal_inputs(remote, {"tbl": "roads"}, inst.id, USER)


def test_marshal_literal_canonicalization(stack):
    desc = _toy_descriptor(
        [
            param("n", "number", LIT_NUM),
            param("flag", "checkbox", {"kind": "literal", "base": "boolean"}),
        ]
    )
    inst = stack.env.registry.create(USER, "toy")
    marshaled = dict(
        stack.env.executor.marshal_inputs(desc, {"n": 4.0, "flag": True}, inst.id, USER)
    )
    assert marshaled["n"].text == "4"
    assert marshaled["flag"].text == "true"


# ------------------------------------------------------------ local execution


def test_sync_builtin_execution_succeeds(stack):
    desc = stack.env.catalog.get("slow_echo")
    inst_id = stack.env.executor.execute(desc, {"payload": "hi", "duration": 0.0}, USER)
    snap = stack.env.registry.snapshot(inst_id)
    assert snap["status"]["state"] == "succeeded"
    assert snap["results"] == [{"param_id": "result", "kind": "literal", "value": "hi"}]


def test_builtin_failure_is_captured(stack):
    desc = stack.env.catalog.get("slow_echo")
    inst_id = stack.env.executor.execute(desc, {"payload": "x", "duration": 999.0}, USER)
    snap = stack.env.registry.snapshot(inst_id)
    assert snap["status"]["state"] == "failed"
    assert "duration" in snap["status"]["message"]


def test_async_execution_and_cancel(stack):
    desc = stack.env.catalog.get("slow_echo")
    inst_id = stack.env.executor.execute(
        desc, {"payload": "x", "duration": 5.0}, USER, mode="async"
    )
    deadline = time.monotonic() + 5
    while time.monotonic() < deadline:
        if stack.env.registry.snapshot(inst_id)["status"]["state"] == "started":
            break
        time.sleep(0.02)
    assert stack.env.executor.cancel(inst_id)
    snap = stack.env.registry.snapshot(inst_id)
    assert snap["status"]["state"] == "failed"
    assert snap["status"]["message"] == "cancelled"
    # cancel is idempotent about state but reports no second transition
    assert not stack.env.executor.cancel(inst_id)


def test_links_die_when_instance_finishes(stack):
    stack.put_fixture_files()
    desc = _toy_descriptor([param("src", "file", ASC)])
    inst = stack.env.registry.create(USER, "toy")
    link = stack.env.links.mint(USER, "in/points.csv", instance_id=inst.id)
    assert stack.env.links.serve(link.token)  # alive while running
    stack.env.registry.set_status(inst.id, Succeeded())
    stack.env.links.terminate_instance(inst.id)
    with pytest.raises(GoneError):
        stack.env.links.serve(link.token)


# ----------------------------------------------------------- remote execution


def _remote_echo(stack) -> ProcessDescriptor:
    """slow_echo re-registered as a remote service whose endpoint is this
    gateway's own WPS surface; exercises the full network path."""
    base = dataclasses.replace(
        stack.env.catalog.get("slow_echo"),
        local_id="remote_echo",
        wrapper_name="remote_echo",
        kind=ProcessKind.REMOTE,
        endpoint=stack.base + "/wps",
    )
    stack.env.catalog.add(base)
    return base


def test_remote_async_polling_records_progress(stack):
    desc = _remote_echo(stack)
    inst_id = stack.env.executor.execute(desc, {"payload": "pong", "duration": 1.5}, USER)
    snap = stack.env.registry.snapshot(inst_id)
    assert snap["status"]["state"] == "succeeded", snap
    assert snap["results"] == [
        {"param_id": "result", "kind": "literal", "value": "pong"}
    ]
    percents = []
    for entry in stack.env.registry.get(inst_id).log:
        if entry.text.startswith("remote progress "):
            percents.append(int(entry.text.split()[2].rstrip("%")))
    assert len(set(percents)) >= 2, percents
    assert percents == sorted(percents)


def test_remote_sync_when_store_not_supported(stack):
    desc = dataclasses.replace(
        _remote_echo(stack),
        local_id="sync_echo",
        wrapper_name="sync_echo",
        store_supported=False,
    )
    stack.env.catalog.add(desc)
    inst_id = stack.env.executor.execute(desc, {"payload": "now", "duration": 0.0}, USER)
    snap = stack.env.registry.snapshot(inst_id)
    assert snap["status"]["state"] == "succeeded"
    assert stack.env.registry.get(inst_id).status_location is None


def test_remote_fault_surfaces_as_failed(stack):
    desc = dataclasses.replace(
        _remote_echo(stack),
        local_id="bad_echo",
        wrapper_name="bad_echo",
        remote_identifier="no_such_process",
    )
    stack.env.catalog.add(desc)
    inst_id = stack.env.executor.execute(desc, {"payload": "x", "duration": 0.0}, USER)
    snap = stack.env.registry.snapshot(inst_id)
    assert snap["status"]["state"] == "failed"


def test_remote_timeout_fails_instance(tmp_path):
    s = make_stack(tmp_path, poll_interval_ms=100, job_timeout_s=1)
    try:
        desc = _remote_echo(s)
        inst_id = s.env.executor.execute(desc, {"payload": "x", "duration": 10.0}, USER)
        snap = s.env.registry.snapshot(inst_id)
        assert snap["status"]["state"] == "failed"
        assert snap["status"]["message"] == "timeout"
    finally:
        s.server.stop()
