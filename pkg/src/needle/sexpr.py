"""S-expression reading shared by the problem parser and the arithmetic layer."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union


class SexprError(Exception):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Atom:
    """A symbol, keyword, or numeral token, tagged with its source position."""

    text: str
    line: int
    column: int

    def __repr__(self) -> str:
        return self.text


@dataclass(frozen=True)
class SList:
    items: tuple["Sexpr", ...]
    line: int
    column: int

    def __repr__(self) -> str:
        return "(" + " ".join(repr(i) for i in self.items) + ")"


Sexpr = Union[Atom, SList]

# Characters allowed in unquoted SMT-LIB symbols, besides alphanumerics.
_SYMBOL_PUNCT = set("~!@$%^&*_-+=<>.?/")


def _is_symbol_char(c: str) -> bool:
    return c.isalnum() or c in _SYMBOL_PUNCT


def tokenize(text: str) -> list[Atom]:
    """Split ``text`` into parenthesis and atom tokens, tracking positions."""
    tokens: list[Atom] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
        elif c in " \t\r":
            i += 1
            col += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            tokens.append(Atom(c, line, col))
            i += 1
            col += 1
        elif c == "|":
            start_line, start_col = line, col
            j = i + 1
            while j < n and text[j] != "|":
                if text[j] == "\n":
                    line += 1
                    col = 0
                j += 1
                col += 1
            if j >= n:
                raise SexprError("unterminated |...| symbol", start_line, start_col)
            tokens.append(Atom(text[i + 1 : j], start_line, start_col))
            col += 2
            i = j + 1
        elif c == '"':
            start_line, start_col = line, col
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            if j >= n:
                raise SexprError("unterminated string", start_line, start_col)
            tokens.append(Atom(text[i : j + 1], start_line, start_col))
            col += j + 1 - i
            i = j + 1
        elif _is_symbol_char(c) or c == ":":
            start_col = col
            j = i
            while j < n and (_is_symbol_char(text[j]) or text[j] == ":"):
                j += 1
            tokens.append(Atom(text[i:j], line, start_col))
            col += j - i
            i = j
        else:
            raise SexprError(f"unexpected character {c!r}", line, col)
    return tokens


def parse_all(text: str) -> list[Sexpr]:
    """Parse every top-level s-expression in ``text``."""
    tokens = tokenize(text)
    out: list[Sexpr] = []
    pos = 0

    def parse_one() -> Sexpr:
        nonlocal pos
        tok = tokens[pos]
        if tok.text == "(":
            pos += 1
            items: list[Sexpr] = []
            while True:
                if pos >= len(tokens):
                    raise SexprError("unbalanced '('", tok.line, tok.column)
                if tokens[pos].text == ")":
                    pos += 1
                    return SList(tuple(items), tok.line, tok.column)
                items.append(parse_one())
        if tok.text == ")":
            raise SexprError("unbalanced ')'", tok.line, tok.column)
        pos += 1
        return tok

    while pos < len(tokens):
        out.append(parse_one())
    return out


def parse_one(text: str) -> Sexpr:
    exprs = parse_all(text)
    if len(exprs) != 1:
        raise SexprError(f"expected one expression, found {len(exprs)}", 1, 1)
    return exprs[0]


def quote_symbol(name: str) -> str:
    """Render ``name`` as an SMT-LIB symbol, quoting when needed.

    Names containing ``!`` are always quoted so generated variables render
    as ``|x!lia|`` and stay visually distinct from user symbols.
    """
    if not name:
        return "||"
    plain = (
        all(_is_symbol_char(c) for c in name)
        and not name[0].isdigit()
        and "!" not in name
    )
    return name if plain else "|" + name + "|"
