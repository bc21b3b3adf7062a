"""S-expression reader shared by PDDL files, rule files and plan files."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union


class PDDLError(Exception):
    """Base class for every diagnostic raised while reading PDDL-like text.

    ``code`` is a stable dotted identifier (``lex.*``, ``syntax.*``,
    ``semantic.*``) listed in ``docs/grammar.md``.
    """

    kind = "error"

    def __init__(self, message: str, line: int | None = None, col: int | None = None,
                 code: str | None = None, expected: frozenset[str] = frozenset(),
                 source: str | None = None):
        self.message = message
        self.line = line
        self.col = col
        self.code = code or self.kind
        self.expected = expected
        self.source = source
        super().__init__(str(self))

    def __str__(self) -> str:
        where = ""
        if self.line is not None:
            where = f"{self.source + ':' if self.source else ''}{self.line}:{self.col}: "
        exp = f" (expected one of: {', '.join(sorted(self.expected))})" if self.expected else ""
        return f"{where}{self.kind} error [{self.code}]: {self.message}{exp}"


class LexError(PDDLError):
    kind = "lexical"


class ParseError(PDDLError):
    kind = "syntax"


class SemanticError(PDDLError):
    kind = "semantic"


@dataclass(frozen=True)
class Sym:
    value: str
    line: int
    col: int

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SList:
    items: tuple["Node", ...]
    line: int
    col: int

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]

    def __iter__(self):
        return iter(self.items)

    def head(self) -> str | None:
        if self.items and isinstance(self.items[0], Sym):
            return self.items[0].value.lower()
        return None


Node = Union[Sym, SList]

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>;[^\n]*)
  | (?P<open>\()
  | (?P<close>\))
  | (?P<sym>[A-Za-z0-9?:_.=<>+*/-][A-Za-z0-9?:_.=<>+*/-]*)
""", re.VERBOSE)


def tokenize(text: str | bytes, source: str | None = None):
    """Yield ``(kind, value, line, col)`` with kind in ``open``/``close``/``sym``."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise LexError(f"input is not valid UTF-8 (byte offset {exc.start})",
                           1, 1, "lex.encoding", source=source) from None
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise LexError(f"unexpected character {text[pos]!r}", line, col, "lex.bad-char", source=source)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("open", "close", "sym"):
            yield kind, m.group(), line, col
        pos = m.end()


def read_all(text: str | bytes, source: str | None = None) -> list[SList]:
    """Read every top-level list in ``text``."""
    stack: list[tuple[int, int, list]] = []
    out: list[SList] = []
    for kind, value, line, col in tokenize(text, source):
        if kind == "open":
            stack.append((line, col, []))
        elif kind == "close":
            if not stack:
                raise ParseError("unbalanced ')' with no matching '('", line, col,
                                 "syntax.unbalanced-close", source=source)
            l0, c0, items = stack.pop()
            node = SList(tuple(items), l0, c0)
            if stack:
                stack[-1][2].append(node)
            else:
                out.append(node)
        else:
            if not stack:
                raise ParseError(f"symbol {value!r} outside any list", line, col,
                                 "syntax.stray-symbol", expected=frozenset({"("}), source=source)
            stack[-1][2].append(Sym(value, line, col))
    if stack:
        # innermost unclosed list is the best guess for the missing ')'
        l0, c0, _ = stack[-1]
        raise ParseError("unbalanced '(' never closed", l0, c0, "syntax.unbalanced-open",
                         expected=frozenset({")"}), source=source)
    return out


def read_one(text: str | bytes, source: str | None = None) -> SList:
    forms = read_all(text, source)
    if not forms:
        raise ParseError("empty input", 1, 1, "syntax.empty", expected=frozenset({"("}), source=source)
    if len(forms) > 1:
        extra = forms[1]
        raise ParseError("trailing content after the top-level form", extra.line, extra.col,
                         "syntax.trailing", source=source)
    return forms[0]
