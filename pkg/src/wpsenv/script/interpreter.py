"""Tree-walking evaluator with enforced run budgets.

Dynamic semantics: numbers are 64-bit floats; `+` concatenates when
either side is text; `==` is structural within one kind and false across
kinds; `&&`/`||` short-circuit to a Boolean; falsy values are false, 0,
"" and null. Division by zero follows IEEE (inf/nan). Every node
evaluation costs one budget step, so runaway loops die deterministically.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..errors import BudgetExceeded, ScriptError
from . import ast_nodes as ast


@dataclass
class RunBudget:
    max_steps: int = 10_000_000
    max_wall_ms: int = 3_600_000
    max_call_depth: int = 128


@dataclass
class MatrixValue:
    cells: np.ndarray  # (rows, cols) float64

    @property
    def rows(self) -> int:
        return self.cells.shape[0]

    @property
    def cols(self) -> int:
        return self.cells.shape[1]


class HandleValue:
    """Opaque async-call handle produced by spawn(), consumed by join()."""

    def __init__(self, label: str):
        self.label = label
        self.result = None
        self.error: Optional[BaseException] = None
        self.joined = False
        self._thread = None

    def __repr__(self):
        return f"<handle {self.label}>"


class _ReturnSignal(Exception):
    def __init__(self, value):
        self.value = value


class _Scope:
    __slots__ = ("vars", "parent")

    def __init__(self, parent: Optional["_Scope"] = None):
        self.vars: dict = {}
        self.parent = parent

    def lookup(self, name: str):
        scope = self
        while scope is not None:
            if name in scope.vars:
                return scope.vars[name]
            scope = scope.parent
        raise KeyError(name)

    def declare(self, name: str, value) -> None:
        self.vars[name] = value

    def assign(self, name: str, value) -> bool:
        scope = self
        while scope is not None:
            if name in scope.vars:
                scope.vars[name] = value
                return True
            scope = scope.parent
        return False


def number_text(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def render_value(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return number_text(value)
    if isinstance(value, str):
        return value
    if isinstance(value, list):
        return "[" + ", ".join(render_value(v) for v in value) + "]"
    if isinstance(value, dict):
        inner = ", ".join(f"{k}: {render_value(v)}" for k, v in value.items())
        return "{" + inner + "}"
    if isinstance(value, MatrixValue):
        return f"matrix({value.rows}x{value.cols})"
    if isinstance(value, HandleValue):
        return repr(value)
    if callable(value):
        return f"<function {getattr(value, 'script_name', '?')}>"
    return str(value)


def truthy(value) -> bool:
    if value is None or value is False:
        return False
    if isinstance(value, float):
        return value != 0.0  # nan compares unequal, so nan is truthy
    if isinstance(value, str):
        return value != ""
    return True


def values_equal(a, b) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a is b
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, float) and isinstance(b, float):
        return a == b
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict) and isinstance(b, dict):
        return list(a.keys()) == list(b.keys()) and all(
            values_equal(a[k], b[k]) for k in a
        )
    if isinstance(a, MatrixValue) and isinstance(b, MatrixValue):
        return a.cells.shape == b.cells.shape and bool(np.all(a.cells == b.cells))
    return False  # mixed kinds compare unequal


def kind_name(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, float):
        return "number"
    if isinstance(value, str):
        return "text"
    if isinstance(value, list):
        return "array"
    if isinstance(value, dict):
        return "object"
    if isinstance(value, MatrixValue):
        return "matrix"
    if isinstance(value, HandleValue):
        return "handle"
    return "function"


class ScriptFunction:
    def __init__(self, decl: ast.FunctionDecl, interpreter: "Interpreter"):
        self.decl = decl
        self.interpreter = interpreter
        self.script_name = decl.name

    def __call__(self, *args):
        return self.interpreter.call_function(self.decl, list(args))


class Interpreter:
    def __init__(
        self,
        program: ast.Program,
        builtins: Optional[dict] = None,
        budget: Optional[RunBudget] = None,
        check_interrupt: Optional[Callable[[], None]] = None,
    ):
        self.program = program
        self.budget = budget or RunBudget()
        self.check_interrupt = check_interrupt
        self.steps = 0
        self.depth = 0
        self.started_at = time.monotonic()
        self.globals = _Scope()
        for name, fn in (builtins or {}).items():
            self.globals.declare(name, fn)
        for decl in program.functions:
            self.globals.declare(decl.name, ScriptFunction(decl, self))

    # ------------------------------------------------------------ budget

    def _step(self, node: ast.Node) -> None:
        self.steps += 1
        if self.steps > self.budget.max_steps:
            raise BudgetExceeded("steps")
        if self.steps % 1024 == 0:
            if (time.monotonic() - self.started_at) * 1000 > self.budget.max_wall_ms:
                raise BudgetExceeded("wall")
            if self.check_interrupt is not None:
                self.check_interrupt()

    # ------------------------------------------------------------ entry

    def run(self, entry: str, args: list) -> object:
        self.started_at = time.monotonic()
        try:
            fn = self.globals.lookup(entry)
        except KeyError:
            raise ScriptError(f"undefined entry function {entry!r}") from None
        if not isinstance(fn, ScriptFunction):
            raise ScriptError(f"{entry!r} is not a scenario function")
        return fn(*args)

    def call_function(self, decl: ast.FunctionDecl, args: list):
        if len(args) != len(decl.params):
            raise ScriptError(
                f"{decl.name}() takes {len(decl.params)} argument(s), got {len(args)}",
                decl.line,
                decl.col,
            )
        self.depth += 1
        if self.depth > self.budget.max_call_depth:
            self.depth -= 1
            raise BudgetExceeded("depth")
        scope = _Scope(self.globals)
        for name, value in zip(decl.params, args):
            scope.declare(name, value)
        try:
            self.exec_block(decl.body, scope)
            return None
        except _ReturnSignal as ret:
            return ret.value
        finally:
            self.depth -= 1

    # ------------------------------------------------------------ statements

    def exec_block(self, stmts: tuple[ast.Node, ...], parent: _Scope) -> None:
        scope = _Scope(parent)
        for stmt in stmts:
            self.exec_stmt(stmt, scope)

    def exec_stmt(self, stmt: ast.Node, scope: _Scope) -> None:
        self._step(stmt)
        if isinstance(stmt, ast.VarDecl):
            scope.declare(stmt.name, self.eval(stmt.value, scope))
        elif isinstance(stmt, ast.Assign):
            self.do_assign(stmt, scope)
        elif isinstance(stmt, ast.ExprStmt):
            self.eval(stmt.expr, scope)
        elif isinstance(stmt, ast.If):
            if truthy(self.eval(stmt.cond, scope)):
                self.exec_block(stmt.then, scope)
            elif stmt.otherwise is not None:
                self.exec_block(stmt.otherwise, scope)
        elif isinstance(stmt, ast.While):
            while truthy(self.eval(stmt.cond, scope)):
                self._step(stmt)
                self.exec_block(stmt.body, scope)
        elif isinstance(stmt, ast.For):
            inner = _Scope(scope)
            if stmt.init is not None:
                self.exec_stmt(stmt.init, inner)
            while stmt.cond is None or truthy(self.eval(stmt.cond, inner)):
                self._step(stmt)
                self.exec_block(stmt.body, inner)
                if stmt.step is not None:
                    self.exec_stmt(stmt.step, inner)
        elif isinstance(stmt, ast.Return):
            value = None if stmt.value is None else self.eval(stmt.value, scope)
            raise _ReturnSignal(value)
        else:
            raise ScriptError(f"unknown statement {type(stmt).__name__}", stmt.line, stmt.col)

    def do_assign(self, stmt: ast.Assign, scope: _Scope) -> None:
        value = self.eval(stmt.value, scope)
        target = stmt.target
        if isinstance(target, ast.Ident):
            if not scope.assign(target.name, value):
                raise ScriptError(
                    f"assignment to undeclared variable {target.name!r}",
                    target.line,
                    target.col,
                )
        elif isinstance(target, ast.Member):
            obj = self.eval(target.obj, scope)
            if not isinstance(obj, dict):
                raise ScriptError(
                    f"cannot set member on {kind_name(obj)}", target.line, target.col
                )
            obj[target.name] = value
        elif isinstance(target, ast.Index):
            obj = self.eval(target.obj, scope)
            index = self.eval(target.index, scope)
            if isinstance(obj, list):
                i = self._as_index(index, len(obj), target)
                obj[i] = value
            elif isinstance(obj, dict):
                if not isinstance(index, str):
                    raise ScriptError("object index must be text", target.line, target.col)
                obj[index] = value
            else:
                raise ScriptError(
                    f"cannot index into {kind_name(obj)}", target.line, target.col
                )
        else:  # pragma: no cover - parser guarantees the target shape
            raise ScriptError("invalid assignment target", stmt.line, stmt.col)

    # ------------------------------------------------------------ expressions

    def eval(self, node: ast.Node, scope: _Scope):
        self._step(node)
        if isinstance(node, ast.NumberLit):
            return node.value
        if isinstance(node, ast.StringLit):
            return node.value
        if isinstance(node, ast.BoolLit):
            return node.value
        if isinstance(node, ast.NullLit):
            return None
        if isinstance(node, ast.Ident):
            try:
                return scope.lookup(node.name)
            except KeyError:
                raise ScriptError(
                    f"undefined identifier {node.name!r}", node.line, node.col
                ) from None
        if isinstance(node, ast.Member):
            obj = self.eval(node.obj, scope)
            if isinstance(obj, dict):
                return obj.get(node.name)
            raise ScriptError(
                f"cannot read member of {kind_name(obj)}", node.line, node.col
            )
        if isinstance(node, ast.Index):
            obj = self.eval(node.obj, scope)
            index = self.eval(node.index, scope)
            if isinstance(obj, list):
                return obj[self._as_index(index, len(obj), node)]
            if isinstance(obj, dict):
                if not isinstance(index, str):
                    raise ScriptError("object index must be text", node.line, node.col)
                return obj.get(index)
            if isinstance(obj, str):
                return obj[self._as_index(index, len(obj), node)]
            raise ScriptError(f"cannot index into {kind_name(obj)}", node.line, node.col)
        if isinstance(node, ast.Call):
            callee = self.eval(node.callee, scope)
            if not callable(callee):
                raise ScriptError(
                    f"{kind_name(callee)} is not callable", node.line, node.col
                )
            args = [self.eval(arg, scope) for arg in node.args]
            return callee(*args)
        if isinstance(node, ast.Unary):
            operand = self.eval(node.operand, scope)
            if node.op == "!":
                return not truthy(operand)
            if not isinstance(operand, float) or isinstance(operand, bool):
                raise ScriptError(
                    f"unary '-' needs a number, got {kind_name(operand)}",
                    node.line,
                    node.col,
                )
            return -operand
        if isinstance(node, ast.Binary):
            return self.eval_binary(node, scope)
        if isinstance(node, ast.ObjectLit):
            return {key: self.eval(value, scope) for key, value in node.entries}
        if isinstance(node, ast.ArrayLit):
            return [self.eval(item, scope) for item in node.items]
        raise ScriptError(f"unknown expression {type(node).__name__}", node.line, node.col)

    def _as_index(self, index, length: int, node: ast.Node) -> int:
        if not isinstance(index, float) or isinstance(index, bool) or index != int(index):
            raise ScriptError("array index must be an integer", node.line, node.col)
        i = int(index)
        if not 0 <= i < length:
            raise ScriptError(f"index {i} out of range [0,{length})", node.line, node.col)
        return i

    def eval_binary(self, node: ast.Binary, scope: _Scope):
        op = node.op
        if op == "&&":
            left = self.eval(node.left, scope)
            if not truthy(left):
                return False
            return truthy(self.eval(node.right, scope))
        if op == "||":
            left = self.eval(node.left, scope)
            if truthy(left):
                return True
            return truthy(self.eval(node.right, scope))

        left = self.eval(node.left, scope)
        right = self.eval(node.right, scope)

        if op == "==":
            return values_equal(left, right)
        if op == "!=":
            return not values_equal(left, right)

        if op == "+":
            if isinstance(left, str) or isinstance(right, str):
                return render_value(left) + render_value(right)
            if self._both_numbers(left, right):
                return left + right
            raise ScriptError(
                f"cannot add {kind_name(left)} and {kind_name(right)}",
                node.line,
                node.col,
            )

        if op in ("-", "*", "/", "%"):
            if not self._both_numbers(left, right):
                raise ScriptError(
                    f"'{op}' needs numbers, got {kind_name(left)} and {kind_name(right)}",
                    node.line,
                    node.col,
                )
            if op == "-":
                return left - right
            if op == "*":
                return left * right
            if op == "/":
                if right == 0.0:
                    if left == 0.0:
                        return math.nan
                    return math.inf if left > 0 else -math.inf
                return left / right
            if right == 0.0:
                return math.nan
            return math.fmod(left, right)

        if op in ("<", "<=", ">", ">="):
            comparable = self._both_numbers(left, right) or (
                isinstance(left, str) and isinstance(right, str)
            )
            if not comparable:
                raise ScriptError(
                    f"'{op}' cannot compare {kind_name(left)} and {kind_name(right)}",
                    node.line,
                    node.col,
                )
            if op == "<":
                return left < right
            if op == "<=":
                return left <= right
            if op == ">":
                return left > right
            return left >= right

        raise ScriptError(f"unknown operator {op!r}", node.line, node.col)

    @staticmethod
    def _both_numbers(left, right) -> bool:
        return (
            isinstance(left, float)
            and isinstance(right, float)
            and not isinstance(left, bool)
            and not isinstance(right, bool)
        )


# ---------------------------------------------------------------- matrices


def _expect_matrix(value, name: str) -> MatrixValue:
    if not isinstance(value, MatrixValue):
        raise ScriptError(f"{name} expects a matrix, got {kind_name(value)}")
    return value


def _expect_number(value, name: str) -> float:
    if not isinstance(value, float) or isinstance(value, bool):
        raise ScriptError(f"{name} expects a number, got {kind_name(value)}")
    return value


def matrix_builtins() -> dict:
    def matrix(rows, cols):
        r = int(_expect_number(rows, "matrix"))
        c = int(_expect_number(cols, "matrix"))
        if r <= 0 or c <= 0:
            raise ScriptError("matrix dimensions must be positive")
        return MatrixValue(np.zeros((r, c), dtype=float))

    def _index(m: MatrixValue, r, c, name: str) -> tuple[int, int]:
        ri = int(_expect_number(r, name))
        ci = int(_expect_number(c, name))
        if not (0 <= ri < m.rows and 0 <= ci < m.cols):
            raise ScriptError(
                f"{name}: index ({ri},{ci}) out of range {m.rows}x{m.cols}"
            )
        return ri, ci

    def mget(m, r, c):
        mat = _expect_matrix(m, "mget")
        ri, ci = _index(mat, r, c, "mget")
        return float(mat.cells[ri, ci])

    def mset(m, r, c, v):
        mat = _expect_matrix(m, "mset")
        ri, ci = _index(mat, r, c, "mset")
        mat.cells[ri, ci] = _expect_number(v, "mset")
        return None

    def madd(a, b):
        ma = _expect_matrix(a, "madd")
        mb = _expect_matrix(b, "madd")
        if ma.cells.shape != mb.cells.shape:
            raise ScriptError(
                f"madd: shape mismatch {ma.rows}x{ma.cols} vs {mb.rows}x{mb.cols}"
            )
        return MatrixValue(ma.cells + mb.cells)

    def mmul(a, b):
        ma = _expect_matrix(a, "mmul")
        mb = _expect_matrix(b, "mmul")
        if ma.cols != mb.rows:
            raise ScriptError(
                f"mmul: shape mismatch {ma.rows}x{ma.cols} vs {mb.rows}x{mb.cols}"
            )
        return MatrixValue(ma.cells @ mb.cells)

    def msum(m):
        return float(_expect_matrix(m, "msum").cells.sum())

    return {
        "matrix": matrix,
        "mget": mget,
        "mset": mset,
        "madd": madd,
        "mmul": mmul,
        "msum": msum,
    }
