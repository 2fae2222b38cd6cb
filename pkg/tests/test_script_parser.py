"""Parser tests: precedence, statements, error positions, parse totality."""

from __future__ import annotations

import random
import string

import pytest

from wpsenv.errors import ScriptError
from wpsenv.script import parse_source
from wpsenv.script.ast_nodes import (
    Assign,
    Binary,
    Call,
    For,
    FunctionDecl,
    If,
    Index,
    Member,
    NumberLit,
    Return,
    Unary,
    VarDecl,
    While,
)

# A widely circulated legacy scenario in this dialect; must keep parsing.
LEGACY_SOURCE = """function road_pnt_pol(housefile, roadsources, commonresult, sumpol){
    var houseresult='/tmp/hr.tif';
    var roadResult ='/tmp/hr.tif';
    vector2grid(housefile, houseresult);
    road2grid(roadsources, roadResult, sumpol);
    g_sum(roadResult, houseresult, commonresult);
    return true;
}
"""


def first_fn(src: str) -> FunctionDecl:
    return parse_source(src).functions[0]


def expr_of(src_expr: str):
    fn = first_fn(f"function f() {{ return {src_expr}; }}")
    ret = fn.body[0]
    assert isinstance(ret, Return)
    return ret.value


def test_legacy_scenario_parses_with_four_params():
    program = parse_source(LEGACY_SOURCE)
    assert len(program.functions) == 1
    fn = program.functions[0]
    assert fn.name == "road_pnt_pol"
    assert fn.params == ("housefile", "roadsources", "commonresult", "sumpol")
    assert len(fn.body) == 6


def test_precedence_or_below_and():
    e = expr_of("a || b && c")
    assert isinstance(e, Binary) and e.op == "||"
    assert isinstance(e.right, Binary) and e.right.op == "&&"


def test_precedence_and_below_equality():
    e = expr_of("a == b && c != d")
    assert e.op == "&&"
    assert e.left.op == "==" and e.right.op == "!="


def test_precedence_equality_below_relational():
    e = expr_of("a < b == c >= d")
    assert e.op == "=="
    assert e.left.op == "<" and e.right.op == ">="


def test_precedence_relational_below_additive():
    e = expr_of("a + b < c - d")
    assert e.op == "<"
    assert e.left.op == "+" and e.right.op == "-"


def test_precedence_additive_below_multiplicative():
    e = expr_of("a + b * c % d")
    assert e.op == "+"
    assert e.right.op == "%"
    assert e.right.left.op == "*"


def test_additive_left_associative():
    e = expr_of("a - b - c")
    assert e.op == "-" and e.left.op == "-"


def test_unary_binds_tighter_than_binary():
    e = expr_of("-a * !b")
    assert isinstance(e, Binary) and e.op == "*"
    assert isinstance(e.left, Unary) and e.left.op == "-"
    assert isinstance(e.right, Unary) and e.right.op == "!"


def test_postfix_chains():
    e = expr_of("a.b[0](1, 2).c")
    assert isinstance(e, Member) and e.name == "c"
    call = e.obj
    assert isinstance(call, Call) and len(call.args) == 2
    idx = call.callee
    assert isinstance(idx, Index)
    assert isinstance(idx.obj, Member) and idx.obj.name == "b"


def test_parens_override_precedence():
    e = expr_of("(a + b) * c")
    assert e.op == "*" and e.left.op == "+"


def test_object_and_array_literals():
    e = expr_of("{a: 1, b: [2, 3]}")
    assert dict((k, type(v).__name__) for k, v in e.entries) == {
        "a": "NumberLit", "b": "ArrayLit",
    }


def test_object_literal_rejects_duplicate_keys():
    with pytest.raises(ScriptError, match="[Dd]uplicate"):
        parse_source("function f() { var o = {a: 1, a: 2}; }")


def test_statements_shapes():
    fn = first_fn(
        """function f(n) {
            var total = 0;
            for (var i = 0; i < n; i = i + 1) { total = total + i; }
            while (total > 100) { total = total - 1; }
            if (total == 0) { return 0; } else { return total; }
        }"""
    )
    assert isinstance(fn.body[0], VarDecl)
    assert isinstance(fn.body[1], For)
    assert isinstance(fn.body[2], While)
    assert isinstance(fn.body[3], If)
    assert fn.body[3].otherwise is not None


def test_for_clauses_optional():
    fn = first_fn("function f() { for (;;) { return 1; } }")
    loop = fn.body[0]
    assert loop.init is None and loop.cond is None and loop.step is None


def test_assignment_targets():
    fn = first_fn(
        'function f(o, m) { o.field = 1; o["k"] = 2; m = 3; }'
    )
    assert all(isinstance(s, Assign) for s in fn.body)
    assert isinstance(fn.body[0].target, Member)
    assert isinstance(fn.body[1].target, Index)


def test_assignment_to_literal_rejected():
    with pytest.raises(ScriptError):
        parse_source("function f() { 1 = 2; }")


def test_duplicate_function_names_rejected():
    with pytest.raises(ScriptError, match="[Dd]uplicate"):
        parse_source("function f() {} function f() {}")


def test_duplicate_params_rejected():
    with pytest.raises(ScriptError):
        parse_source("function f(a, a) {}")


def test_code_outside_function_rejected():
    with pytest.raises(ScriptError):
        parse_source("var x = 1;")


def test_error_position_reported():
    try:
        parse_source("function f() {\n  var = 3;\n}")
    except ScriptError as exc:
        assert exc.line == 2
    else:  # pragma: no cover
        pytest.fail("expected ScriptError")


def test_parse_totality_fuzz_10000():
    """Any byte soup either parses or raises ScriptError; nothing else."""
    rng = random.Random(12345)
    alphabet = string.printable
    tokensoup = ["function", "f", "(", ")", "{", "}", "var", "=", ";", "if",
                 "while", "for", "return", "+", "-", "*", "/", "%", "==", "&&",
                 "||", "!", '"s"', "1", "null", "true", ",", ".", "[", "]"]
    for i in range(10_000):
        if i % 2 == 0:
            src = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 80)))
        else:
            src = " ".join(rng.choice(tokensoup) for _ in range(rng.randrange(0, 40)))
        try:
            parse_source(src)
        except ScriptError:
            pass
