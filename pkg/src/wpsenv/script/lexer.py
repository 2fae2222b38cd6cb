"""Tokenizer for ScenarioScript sources."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ScriptError

KEYWORDS = {
    "function",
    "var",
    "if",
    "else",
    "while",
    "for",
    "return",
    "true",
    "false",
    "null",
}

# longest first so "<=" wins over "<"
PUNCT = (
    "==", "!=", "<=", ">=", "&&", "||",
    "(", ")", "{", "}", "[", "]",
    ",", ";", ":", ".",
    "+", "-", "*", "/", "%",
    "!", "<", ">", "=",
)

_ESCAPES = {"\\": "\\", '"': '"', "'": "'", "n": "\n", "t": "\t"}


@dataclass(frozen=True)
class Token:
    kind: str  # "number" | "string" | "ident" | "keyword" | "punct" | "eof"
    value: str
    line: int
    col: int

    def __repr__(self):
        return f"Token({self.kind},{self.value!r}@{self.line}:{self.col})"


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)

    def err(msg: str, at_line=None, at_col=None):
        raise ScriptError(msg, at_line or line, at_col or col)

    while i < n:
        ch = source[i]

        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue

        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
                col += 1
            continue
        if source.startswith("/*", i):
            start_line, start_col = line, col
            i += 2
            col += 2
            while i < n and not source.startswith("*/", i):
                if source[i] == "\n":
                    line += 1
                    col = 1
                else:
                    col += 1
                i += 1
            if i >= n:
                err("unterminated block comment", start_line, start_col)
            i += 2
            col += 2
            continue

        if ch.isdigit():
            start, start_col = i, col
            while i < n and source[i].isdigit():
                i += 1
            if i < n and source[i] == "." and i + 1 < n and source[i + 1].isdigit():
                i += 1
                while i < n and source[i].isdigit():
                    i += 1
            if i < n and source[i] in "eE":
                j = i + 1
                if j < n and source[j] in "+-":
                    j += 1
                if j >= n or not source[j].isdigit():
                    err("malformed number exponent", line, start_col)
                i = j
                while i < n and source[i].isdigit():
                    i += 1
            text = source[start:i]
            col += i - start
            tokens.append(Token("number", text, line, start_col))
            continue

        if ch.isalpha() or ch == "_":
            start, start_col = i, col
            while i < n and (source[i].isalnum() or source[i] == "_"):
                i += 1
            text = source[start:i]
            col += i - start
            kind = "keyword" if text in KEYWORDS else "ident"
            tokens.append(Token(kind, text, line, start_col))
            continue

        if ch in "\"'":
            quote = ch
            start_line, start_col = line, col
            i += 1
            col += 1
            parts = []
            while True:
                if i >= n or source[i] == "\n":
                    err("unterminated string", start_line, start_col)
                c = source[i]
                if c == quote:
                    i += 1
                    col += 1
                    break
                if c == "\\":
                    if i + 1 >= n:
                        err("unterminated string", start_line, start_col)
                    esc = source[i + 1]
                    if esc not in _ESCAPES:
                        err(f"unknown escape \\{esc}", line, col)
                    parts.append(_ESCAPES[esc])
                    i += 2
                    col += 2
                else:
                    parts.append(c)
                    i += 1
                    col += 1
            tokens.append(Token("string", "".join(parts), start_line, start_col))
            continue

        for p in PUNCT:
            if source.startswith(p, i):
                tokens.append(Token("punct", p, line, col))
                i += len(p)
                col += len(p)
                break
        else:
            err(f"unexpected character {ch!r}")

    tokens.append(Token("eof", "", line, col))
    return tokens
