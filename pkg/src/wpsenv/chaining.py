"""Output-to-input chaining rules.

A producing slot can feed a consuming slot exactly when their data types
match: literals by case-insensitive base, bounding boxes regardless of
CRS (conversion is the consumer's job at marshaling time), complex types
by case-insensitive mime with absent consumer encoding/schema acting as
wildcards.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

from .errors import PreconditionError
from .wps_protocol import BBoxType, ComplexType, DataTypeSpec, LiteralType

if TYPE_CHECKING:
    from .catalog import ProcessDescriptor


class Direction(Enum):
    IN = "in"
    OUT = "out"


@dataclass(frozen=True)
class TypedSlot:
    owner_process: str
    param_id: str
    direction: Direction
    dtype: DataTypeSpec


def dtypes_match(producer: DataTypeSpec, consumer: DataTypeSpec) -> bool:
    if isinstance(producer, LiteralType) and isinstance(consumer, LiteralType):
        return producer.base.lower() == consumer.base.lower()
    if isinstance(producer, BBoxType) and isinstance(consumer, BBoxType):
        return True
    if isinstance(producer, ComplexType) and isinstance(consumer, ComplexType):
        if producer.mime.lower() != consumer.mime.lower():
            return False
        if consumer.encoding is not None and consumer.encoding != producer.encoding:
            return False
        if consumer.schema is not None and consumer.schema != producer.schema:
            return False
        return True
    return False


def can_chain(producer: TypedSlot, consumer: TypedSlot) -> bool:
    if producer.direction is not Direction.OUT:
        raise PreconditionError("producer slot must be an output")
    if consumer.direction is not Direction.IN:
        raise PreconditionError("consumer slot must be an input")
    return dtypes_match(producer.dtype, consumer.dtype)


def slots_of(descriptor: "ProcessDescriptor") -> tuple[list[TypedSlot], list[TypedSlot]]:
    """All (output_slots, input_slots) of one registered service."""
    ins = [
        TypedSlot(descriptor.local_id, p.decl.identifier, Direction.IN, p.decl.dtype)
        for p in descriptor.inputs
    ]
    outs = [
        TypedSlot(descriptor.local_id, p.decl.identifier, Direction.OUT, p.decl.dtype)
        for p in descriptor.outputs
    ]
    return outs, ins


def chainable_pairs(
    catalog: list["ProcessDescriptor"],
) -> list[tuple[TypedSlot, TypedSlot]]:
    producers: list[TypedSlot] = []
    consumers: list[TypedSlot] = []
    for desc in catalog:
        outs, ins = slots_of(desc)
        producers.extend(outs)
        consumers.extend(ins)
    return [
        (p, c) for p in producers for c in consumers if dtypes_match(p.dtype, c.dtype)
    ]
