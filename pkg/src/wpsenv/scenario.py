"""Scenario runtime: wrapper generation, CallWPS, spawn/join, publication.

Every registered service gets a global wrapper function in the scenario
environment. Wrapper arguments are positional: declared inputs in order,
then one destination path per file_save output. Published scenarios are
catalog entries of kind Scenario and are served over WPS like any other
process, so scenarios can call scenarios.
"""

from __future__ import annotations

import copy
import threading
from dataclasses import dataclass
from typing import Optional

from .catalog import (
    LOCAL,
    BoundParam,
    Catalog,
    Extent,
    ProcessDescriptor,
    ProcessKind,
    new_local_id,
)
from .errors import RemoteFault, ScriptError, ValidationError
from .executor import Executor, ResultRecord, canonical_literal
from .script import Interpreter, RunBudget, parse_source, render_value
from .script.ast_nodes import Program
from .script.interpreter import HandleValue, MatrixValue, kind_name, matrix_builtins
from .wps_protocol import Failed, Started, Succeeded


@dataclass(frozen=True)
class ScenarioProgram:
    source: str
    ast: Program
    declared_inputs: tuple[BoundParam, ...]
    declared_outputs: tuple[BoundParam, ...]
    entry_function: str
    local_id: str
    wrapper_name: str


def wrapper_arity(descriptor: ProcessDescriptor) -> int:
    return len(descriptor.inputs) + sum(
        1 for b in descriptor.outputs if b.widget.kind == "file_save"
    )


def _coerce_wrapper_arg(bound: BoundParam, value, wrapper: str) -> str:
    kind = bound.widget.kind
    if isinstance(value, (list, MatrixValue, HandleValue)):
        raise ScriptError(
            f"{wrapper}: argument {bound.decl.identifier!r} cannot be {kind_name(value)}"
        )
    if kind == "rectangle" and isinstance(value, dict):
        try:
            return ",".join(
                canonical_literal(float(value[k])) for k in ("minx", "miny", "maxx", "maxy")
            )
        except (KeyError, TypeError, ValueError):
            raise ScriptError(
                f"{wrapper}: rectangle object needs numeric minx/miny/maxx/maxy"
            ) from None
    if kind == "file" and isinstance(value, dict):
        ref = value.get("path", value.get("href"))
        if not isinstance(ref, str):
            raise ScriptError(f"{wrapper}: file object needs a path")
        return ref
    if isinstance(value, dict):
        raise ScriptError(
            f"{wrapper}: argument {bound.decl.identifier!r} cannot be an object"
        )
    if value is None:
        raise ScriptError(f"{wrapper}: argument {bound.decl.identifier!r} is null")
    return canonical_literal(value)


class ScenarioRuntime:
    """Per-run environment binding wrappers and builtins to one user/instance."""

    def __init__(
        self,
        executor: Executor,
        user: str,
        parent_instance_id: Optional[str] = None,
        log=None,
    ):
        self.executor = executor
        self.user = user
        self.parent_instance_id = parent_instance_id
        self._log = log or (lambda _msg: None)

    # -- the injected global scope

    def globals(self) -> dict:
        env = dict(matrix_builtins())
        env["log"] = self._builtin_log
        env["CallWPS"] = self._builtin_callwps
        env["spawn"] = self._builtin_spawn
        env["join"] = self._builtin_join
        env["LOCAL"] = LOCAL
        for descriptor in self.executor.catalog.all():
            env[descriptor.wrapper_name] = self._make_wrapper(descriptor)
        return env

    def _builtin_log(self, msg=None):
        self._log(render_value(msg))
        return None

    # -- service invocation

    def _invoke(self, descriptor: ProcessDescriptor, raw: dict[str, str]) -> dict:
        try:
            values = self.executor.validate_values(descriptor, raw, self.user)
        except ValidationError as exc:
            raise RemoteFault(f"{descriptor.wrapper_name}: {exc.message}") from exc
        instance_id = self.executor.execute(
            descriptor, values, self.user, mode="sync", parent_id=self.parent_instance_id
        )
        inst = self.executor.registry.get(instance_id)
        if isinstance(inst.status, Failed):
            raise RemoteFault(inst.status.message)
        if not isinstance(inst.status, Succeeded):  # pragma: no cover
            raise RemoteFault(f"instance ended in state {type(inst.status).__name__}")
        outputs: dict = {}
        for record in inst.results:
            if record.kind == "file":
                outputs[record.param_id] = {"path": record.value}
            else:
                outputs[record.param_id] = record.value
        return outputs

    def _make_wrapper(self, descriptor: ProcessDescriptor):
        arity = wrapper_arity(descriptor)

        def wrapper(*args):
            if len(args) != arity:
                raise ScriptError(
                    f"{descriptor.wrapper_name}() takes {arity} argument(s), "
                    f"got {len(args)}"
                )
            raw: dict[str, str] = {}
            it = iter(args)
            for bound in descriptor.inputs:
                raw[bound.decl.identifier] = _coerce_wrapper_arg(
                    bound, next(it), descriptor.wrapper_name
                )
            for bound in descriptor.outputs:
                if bound.widget.kind == "file_save":
                    dest = next(it)
                    if not isinstance(dest, str):
                        raise ScriptError(
                            f"{descriptor.wrapper_name}: destination for "
                            f"{bound.decl.identifier!r} must be text"
                        )
                    raw[bound.decl.identifier] = dest
            return self._invoke(descriptor, raw)

        wrapper.script_name = descriptor.wrapper_name
        return wrapper

    def _builtin_callwps(self, endpoint, process_id, inputs):
        if not isinstance(endpoint, str) or not isinstance(process_id, str):
            raise ScriptError("CallWPS: endpoint and process id must be text")
        if not isinstance(inputs, dict):
            raise ScriptError("CallWPS: inputs must be an object")
        if endpoint == LOCAL:
            descriptor = next(
                (
                    d
                    for d in self.executor.catalog.all()
                    if d.endpoint == LOCAL and d.remote_identifier == process_id
                ),
                None,
            )
        else:
            descriptor = self.executor.catalog.by_remote_identifier(endpoint, process_id)
        if descriptor is None:
            raise RemoteFault(f"unknown process {process_id!r} at {endpoint!r}")
        raw: dict[str, str] = {}
        by_id = {
            b.decl.identifier: b for b in list(descriptor.inputs) + list(descriptor.outputs)
        }
        for key, value in inputs.items():
            bound = by_id.get(key)
            if bound is None:
                raise RemoteFault(f"unknown parameter {key!r} for {process_id!r}")
            raw[key] = _coerce_wrapper_arg(bound, value, f"CallWPS({process_id})")
        return self._invoke(descriptor, raw)

    # -- parallel execution

    def _builtin_spawn(self, wrapper_name, args):
        if not isinstance(wrapper_name, str):
            raise ScriptError("spawn: wrapper name must be text")
        if not isinstance(args, list):
            raise ScriptError("spawn: arguments must be an array")
        descriptor = self.executor.catalog.by_wrapper(wrapper_name)
        if descriptor is None:
            raise ScriptError(f"spawn: no wrapper {wrapper_name!r}")
        arity = wrapper_arity(descriptor)
        if len(args) != arity:
            raise ScriptError(
                f"spawn: {wrapper_name}() takes {arity} argument(s), got {len(args)}"
            )
        wrapper = self._make_wrapper(descriptor)
        handle = HandleValue(wrapper_name)

        def target():
            try:
                handle.result = wrapper(*args)
            except BaseException as exc:
                handle.error = exc

        handle._thread = threading.Thread(target=target, daemon=True)
        handle._thread.start()
        return handle

    def _builtin_join(self, handle):
        if not isinstance(handle, HandleValue):
            raise ScriptError(f"join: expected a handle, got {kind_name(handle)}")
        if handle._thread is not None:
            handle._thread.join()
        if handle.error is not None:
            raise handle.error
        return copy.deepcopy(handle.result)


# ---------------------------------------------------------------- publication


def compile_scenario(
    source: str,
    declared_inputs: tuple[BoundParam, ...],
    declared_outputs: tuple[BoundParam, ...],
    wrapper_name: str,
    local_id: str,
    entry_function: Optional[str] = None,
) -> ScenarioProgram:
    program = parse_source(source)
    if not program.functions:
        raise ScriptError("scenario source declares no function")
    if entry_function is None:
        entry_function = program.functions[0].name
    entry = next((f for f in program.functions if f.name == entry_function), None)
    if entry is None:
        raise ScriptError(f"no entry function {entry_function!r} in scenario source")
    expected = len(declared_inputs) + sum(
        1 for b in declared_outputs if b.widget.kind == "file_save"
    )
    if len(entry.params) != expected:
        raise ScriptError(
            f"entry {entry_function}() has {len(entry.params)} parameter(s) "
            f"but the declarations require {expected}"
        )
    return ScenarioProgram(
        source=source,
        ast=program,
        declared_inputs=tuple(declared_inputs),
        declared_outputs=tuple(declared_outputs),
        entry_function=entry_function,
        local_id=local_id,
        wrapper_name=wrapper_name,
    )


def publish_scenario(
    catalog: Catalog,
    source: str,
    name: str,
    description: str,
    declared_inputs: list[BoundParam],
    declared_outputs: list[BoundParam],
    wrapper_name: str,
    entry_function: Optional[str] = None,
) -> ProcessDescriptor:
    """Validate and register a scenario as a catalog process. Atomic: any
    error leaves the catalog untouched."""
    local_id = new_local_id(wrapper_name, {d.local_id for d in catalog.all()})
    program = compile_scenario(
        source,
        tuple(declared_inputs),
        tuple(declared_outputs),
        wrapper_name,
        local_id,
        entry_function,
    )
    descriptor = ProcessDescriptor(
        local_id=local_id,
        display_name=name,
        description=description,
        endpoint=LOCAL,
        remote_identifier=wrapper_name,
        inputs=program.declared_inputs,
        outputs=program.declared_outputs,
        wrapper_name=wrapper_name,
        kind=ProcessKind.SCENARIO,
        scenario_source=source,
        entry_function=program.entry_function,
    )
    catalog.add(descriptor)
    return descriptor


# ---------------------------------------------------------------- execution


def _arg_for_scenario(bound: BoundParam, value):
    kind = bound.widget.kind
    if kind == "rectangle" and isinstance(value, Extent):
        return {
            "minx": value.minx,
            "miny": value.miny,
            "maxx": value.maxx,
            "maxy": value.maxy,
        }
    if kind == "number":
        return float(value)
    if kind == "checkbox":
        return bool(value)
    return str(value)


def run_scenario_instance(
    executor: Executor,
    instance_id: str,
    descriptor: ProcessDescriptor,
    values: dict,
    output_dests: dict,
    user: str,
) -> None:
    """Backend for Executor runs of kind Scenario (called on the run thread)."""
    registry = executor.registry
    if descriptor.scenario_source is None:
        raise ValidationError(f"scenario {descriptor.local_id!r} has no source")
    program = parse_source(descriptor.scenario_source)
    entry = descriptor.entry_function or (
        program.functions[0].name if program.functions else ""
    )

    args = []
    for bound in descriptor.inputs:
        pid = bound.decl.identifier
        if pid not in values:
            raise ValidationError(f"missing scenario input {pid!r}")
        args.append(_arg_for_scenario(bound, values[pid]))
    dests: dict[str, str] = {}
    for bound in descriptor.outputs:
        if bound.widget.kind != "file_save":
            continue
        pid = bound.decl.identifier
        dest = output_dests.get(pid, f"results/{instance_id}/{pid}")
        dests[pid] = dest
        args.append(dest)

    runtime = ScenarioRuntime(
        executor,
        user,
        parent_instance_id=instance_id,
        log=lambda msg: registry.append_log(instance_id, "script", msg),
    )
    cancel = registry.cancel_event(instance_id)

    def check_interrupt():
        if cancel.is_set():
            from .executor import _Cancelled

            raise _Cancelled()

    registry.set_status(instance_id, Started(percent=0))
    interp = Interpreter(
        program,
        builtins=runtime.globals(),
        budget=RunBudget(),
        check_interrupt=check_interrupt,
    )
    returned = interp.run(entry, args)

    store = executor.store.store_for(user)
    records = []
    for bound in descriptor.outputs:
        pid = bound.decl.identifier
        if bound.widget.kind == "file_save":
            dest = dests[pid]
            if not store.exists(dest):
                raise RemoteFault(f"scenario did not produce output {pid!r} at {dest!r}")
            records.append(ResultRecord(param_id=pid, kind="file", value=dest))
        else:
            records.append(
                ResultRecord(param_id=pid, kind="literal", value=render_value(returned))
            )
    registry.add_results(instance_id, records)
    registry.set_status(instance_id, Succeeded())
