"""ScenarioScript: lexer, parser and tree-walking interpreter."""

from .lexer import Token, tokenize
from .parser import parse, parse_source
from .interpreter import Interpreter, MatrixValue, RunBudget, render_value

__all__ = [
    "Token",
    "tokenize",
    "parse",
    "parse_source",
    "Interpreter",
    "MatrixValue",
    "RunBudget",
    "render_value",
]
