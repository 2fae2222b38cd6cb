"""AST node definitions. Every node carries its source position."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


@dataclass(frozen=True)
class Node:
    line: int
    col: int


# -- expressions


@dataclass(frozen=True)
class NumberLit(Node):
    value: float


@dataclass(frozen=True)
class StringLit(Node):
    value: str


@dataclass(frozen=True)
class BoolLit(Node):
    value: bool


@dataclass(frozen=True)
class NullLit(Node):
    pass


@dataclass(frozen=True)
class Ident(Node):
    name: str


@dataclass(frozen=True)
class Member(Node):
    obj: Node
    name: str


@dataclass(frozen=True)
class Index(Node):
    obj: Node
    index: Node


@dataclass(frozen=True)
class Call(Node):
    callee: Node
    args: tuple[Node, ...]


@dataclass(frozen=True)
class Unary(Node):
    op: str
    operand: Node


@dataclass(frozen=True)
class Binary(Node):
    op: str
    left: Node
    right: Node


@dataclass(frozen=True)
class ObjectLit(Node):
    entries: tuple[tuple[str, Node], ...]


@dataclass(frozen=True)
class ArrayLit(Node):
    items: tuple[Node, ...]


# -- statements


@dataclass(frozen=True)
class VarDecl(Node):
    name: str
    value: Node


@dataclass(frozen=True)
class Assign(Node):
    target: Node  # Ident | Member | Index
    value: Node


@dataclass(frozen=True)
class ExprStmt(Node):
    expr: Node


@dataclass(frozen=True)
class If(Node):
    cond: Node
    then: tuple[Node, ...]
    otherwise: Optional[tuple[Node, ...]] = None


@dataclass(frozen=True)
class While(Node):
    cond: Node
    body: tuple[Node, ...]


@dataclass(frozen=True)
class For(Node):
    init: Optional[Node]
    cond: Optional[Node]
    step: Optional[Node]
    body: tuple[Node, ...]


@dataclass(frozen=True)
class Return(Node):
    value: Optional[Node] = None


@dataclass(frozen=True)
class FunctionDecl(Node):
    name: str
    params: tuple[str, ...]
    body: tuple[Node, ...]


@dataclass(frozen=True)
class Program(Node):
    functions: tuple[FunctionDecl, ...] = field(default_factory=tuple)
