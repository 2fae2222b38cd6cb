"""Recursive-descent parser for ScenarioScript."""

from __future__ import annotations

from typing import Optional

from ..errors import ScriptError
from . import ast_nodes as ast
from .lexer import Token, tokenize

_BINARY_LEVELS = (
    ("||",),
    ("&&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("+", "-"),
    ("*", "/", "%"),
)


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def check(self, kind: str, value: Optional[str] = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (value is None or tok.value == value)

    def accept(self, kind: str, value: Optional[str] = None) -> Optional[Token]:
        if self.check(kind, value):
            return self.advance()
        return None

    def expect(self, kind: str, value: Optional[str] = None) -> Token:
        tok = self.peek()
        if not self.check(kind, value):
            want = value if value is not None else kind
            raise ScriptError(f"expected {want!r}, got {tok.value or tok.kind!r}", tok.line, tok.col)
        return self.advance()

    # -- program

    def program(self) -> ast.Program:
        functions = []
        first = self.peek()
        while not self.check("eof"):
            functions.append(self.function_decl())
        return ast.Program(line=first.line, col=first.col, functions=tuple(functions))

    def function_decl(self) -> ast.FunctionDecl:
        kw = self.expect("keyword", "function")
        name = self.expect("ident").value
        self.expect("punct", "(")
        params = []
        if not self.check("punct", ")"):
            params.append(self.expect("ident").value)
            while self.accept("punct", ","):
                params.append(self.expect("ident").value)
        self.expect("punct", ")")
        if len(set(params)) != len(params):
            raise ScriptError(f"duplicate parameter in function {name!r}", kw.line, kw.col)
        body = self.block()
        return ast.FunctionDecl(line=kw.line, col=kw.col, name=name, params=tuple(params), body=body)

    def block(self) -> tuple[ast.Node, ...]:
        self.expect("punct", "{")
        stmts = []
        while not self.check("punct", "}"):
            if self.check("eof"):
                tok = self.peek()
                raise ScriptError("unexpected end of input in block", tok.line, tok.col)
            stmts.append(self.statement())
        self.expect("punct", "}")
        return tuple(stmts)

    # -- statements

    def statement(self) -> ast.Node:
        tok = self.peek()
        if tok.kind == "keyword":
            if tok.value == "var":
                stmt = self.var_decl()
                self.expect("punct", ";")
                return stmt
            if tok.value == "if":
                return self.if_stmt()
            if tok.value == "while":
                return self.while_stmt()
            if tok.value == "for":
                return self.for_stmt()
            if tok.value == "return":
                self.advance()
                value = None
                if not self.check("punct", ";"):
                    value = self.expression()
                self.expect("punct", ";")
                return ast.Return(line=tok.line, col=tok.col, value=value)
        stmt = self.simple_stmt()
        self.expect("punct", ";")
        return stmt

    def var_decl(self) -> ast.VarDecl:
        kw = self.expect("keyword", "var")
        name = self.expect("ident").value
        self.expect("punct", "=")
        value = self.expression()
        return ast.VarDecl(line=kw.line, col=kw.col, name=name, value=value)

    def simple_stmt(self) -> ast.Node:
        """Assignment or bare expression (no trailing semicolon)."""
        if self.check("keyword", "var"):
            return self.var_decl()
        expr = self.expression()
        if self.check("punct", "="):
            eq = self.advance()
            if not isinstance(expr, (ast.Ident, ast.Member, ast.Index)):
                raise ScriptError("invalid assignment target", eq.line, eq.col)
            value = self.expression()
            return ast.Assign(line=expr.line, col=expr.col, target=expr, value=value)
        return ast.ExprStmt(line=expr.line, col=expr.col, expr=expr)

    def if_stmt(self) -> ast.If:
        kw = self.expect("keyword", "if")
        self.expect("punct", "(")
        cond = self.expression()
        self.expect("punct", ")")
        then = self.block()
        otherwise = None
        if self.accept("keyword", "else"):
            otherwise = self.block()
        return ast.If(line=kw.line, col=kw.col, cond=cond, then=then, otherwise=otherwise)

    def while_stmt(self) -> ast.While:
        kw = self.expect("keyword", "while")
        self.expect("punct", "(")
        cond = self.expression()
        self.expect("punct", ")")
        body = self.block()
        return ast.While(line=kw.line, col=kw.col, cond=cond, body=body)

    def for_stmt(self) -> ast.For:
        kw = self.expect("keyword", "for")
        self.expect("punct", "(")
        init = None if self.check("punct", ";") else self.simple_stmt()
        self.expect("punct", ";")
        cond = None if self.check("punct", ";") else self.expression()
        self.expect("punct", ";")
        step = None if self.check("punct", ")") else self.simple_stmt()
        self.expect("punct", ")")
        body = self.block()
        return ast.For(line=kw.line, col=kw.col, init=init, cond=cond, step=step, body=body)

    # -- expressions

    def expression(self) -> ast.Node:
        return self.binary(0)

    def binary(self, level: int) -> ast.Node:
        if level >= len(_BINARY_LEVELS):
            return self.unary()
        expr = self.binary(level + 1)
        while self.peek().kind == "punct" and self.peek().value in _BINARY_LEVELS[level]:
            op = self.advance()
            right = self.binary(level + 1)
            expr = ast.Binary(line=op.line, col=op.col, op=op.value, left=expr, right=right)
        return expr

    def unary(self) -> ast.Node:
        tok = self.peek()
        if tok.kind == "punct" and tok.value in ("!", "-"):
            self.advance()
            operand = self.unary()
            return ast.Unary(line=tok.line, col=tok.col, op=tok.value, operand=operand)
        return self.postfix()

    def postfix(self) -> ast.Node:
        expr = self.primary()
        while True:
            tok = self.peek()
            if self.accept("punct", "."):
                name = self.expect("ident").value
                expr = ast.Member(line=tok.line, col=tok.col, obj=expr, name=name)
            elif self.accept("punct", "["):
                index = self.expression()
                self.expect("punct", "]")
                expr = ast.Index(line=tok.line, col=tok.col, obj=expr, index=index)
            elif self.accept("punct", "("):
                args = []
                if not self.check("punct", ")"):
                    args.append(self.expression())
                    while self.accept("punct", ","):
                        args.append(self.expression())
                self.expect("punct", ")")
                expr = ast.Call(line=tok.line, col=tok.col, callee=expr, args=tuple(args))
            else:
                return expr

    def primary(self) -> ast.Node:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return ast.NumberLit(line=tok.line, col=tok.col, value=float(tok.value))
        if tok.kind == "string":
            self.advance()
            return ast.StringLit(line=tok.line, col=tok.col, value=tok.value)
        if tok.kind == "keyword" and tok.value in ("true", "false"):
            self.advance()
            return ast.BoolLit(line=tok.line, col=tok.col, value=tok.value == "true")
        if tok.kind == "keyword" and tok.value == "null":
            self.advance()
            return ast.NullLit(line=tok.line, col=tok.col)
        if tok.kind == "ident":
            self.advance()
            return ast.Ident(line=tok.line, col=tok.col, name=tok.value)
        if self.accept("punct", "("):
            expr = self.expression()
            self.expect("punct", ")")
            return expr
        if tok.kind == "punct" and tok.value == "{":
            self.advance()
            entries = []
            if not self.check("punct", "}"):
                entries.append(self.object_entry())
                while self.accept("punct", ","):
                    entries.append(self.object_entry())
            self.expect("punct", "}")
            keys = [k for k, _v in entries]
            if len(set(keys)) != len(keys):
                raise ScriptError("duplicate object key", tok.line, tok.col)
            return ast.ObjectLit(line=tok.line, col=tok.col, entries=tuple(entries))
        if tok.kind == "punct" and tok.value == "[":
            self.advance()
            items = []
            if not self.check("punct", "]"):
                items.append(self.expression())
                while self.accept("punct", ","):
                    items.append(self.expression())
            self.expect("punct", "]")
            return ast.ArrayLit(line=tok.line, col=tok.col, items=tuple(items))
        raise ScriptError(f"unexpected token {tok.value or tok.kind!r}", tok.line, tok.col)

    def object_entry(self) -> tuple[str, ast.Node]:
        key = self.expect("ident").value
        self.expect("punct", ":")
        return key, self.expression()


def parse(tokens: list[Token]) -> ast.Program:
    parser = _Parser(tokens)
    program = parser.program()
    duplicate = len({f.name for f in program.functions}) != len(program.functions)
    if duplicate:
        raise ScriptError("duplicate function name", program.line, program.col)
    return program


def parse_source(source: str) -> ast.Program:
    return parse(tokenize(source))
