"""Tokenizer for model files."""

from __future__ import annotations

from dataclasses import dataclass

from .ast import Pos


class DslError(Exception):
    """Parse or validation diagnostic with a source position."""

    def __init__(self, message: str, pos: Pos | None = None, source_name: str = "<string>"):
        self.message = message
        self.pos = pos
        self.source_name = source_name
        super().__init__(self.render())

    def render(self) -> str:
        if self.pos is None:
            return f"{self.source_name}: {self.message}"
        return f"{self.source_name}:{self.pos.line}:{self.pos.col}: {self.message}"


KEYWORDS = {
    "class",
    "end",
    "parameter",
    "subproblem",
    "begin",
    "index",
    "on",
    "by",
    "preferring",
    "observe",
    "as",
    "from",
    "let",
    "derive",
    "observed_values",
}

PUNCT = [
    "==",
    "!=",
    "<=",
    ">=",
    "~",
    "(",
    ")",
    "[",
    "]",
    ",",
    ".",
    ":",
    "?",
    "=",
    "<",
    ">",
    ";",
    "+",
    "-",
    "*",
    "/",
    "_",
]


@dataclass(frozen=True)
class Token:
    kind: str  # NAME, NUMBER, STRING, NEWLINE, EOF, keyword, or punct literal
    text: str
    pos: Pos
    value: object = None


def tokenize(source: str, source_name: str = "<string>") -> list[Token]:
    tokens: list[Token] = []
    line = 1
    col = 1
    i = 0
    n = len(source)

    def pos():
        return Pos(line, col)

    while i < n:
        c = source[i]
        if c == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if c == "\n":
            if tokens and tokens[-1].kind != "NEWLINE":
                tokens.append(Token("NEWLINE", "\n", pos()))
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == '"':
            start = pos()
            j = i + 1
            buf = []
            while j < n and source[j] != '"':
                if source[j] == "\n":
                    raise DslError("unterminated string literal", start, source_name)
                if source[j] == "\\" and j + 1 < n:
                    buf.append(source[j + 1])
                    j += 2
                else:
                    buf.append(source[j])
                    j += 1
            if j >= n:
                raise DslError("unterminated string literal", start, source_name)
            text = "".join(buf)
            tokens.append(Token("STRING", text, start, text))
            col += j + 1 - i
            i = j + 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            start = pos()
            j = i
            seen_dot = False
            seen_exp = False
            while j < n:
                ch = source[j]
                if ch.isdigit():
                    j += 1
                elif ch == "." and not seen_dot and not seen_exp and j + 1 < n and source[j + 1].isdigit():
                    seen_dot = True
                    j += 1
                elif ch in "eE" and j + 1 < n and (source[j + 1].isdigit() or source[j + 1] in "+-"):
                    seen_exp = True
                    j += 2
                else:
                    break
            text = source[i:j]
            value = float(text) if (seen_dot or seen_exp) else int(text)
            tokens.append(Token("NUMBER", text, start, value))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            start = pos()
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            if text == "_":
                tokens.append(Token("_", text, start))
            elif text in KEYWORDS:
                tokens.append(Token(text, text, start))
            else:
                tokens.append(Token("NAME", text, start))
            col += j - i
            i = j
            continue
        matched = None
        for p in PUNCT:
            if source.startswith(p, i):
                matched = p
                break
        if matched is None:
            raise DslError(f"unexpected character {c!r}", pos(), source_name)
        tokens.append(Token(matched, matched, pos()))
        i += len(matched)
        col += len(matched)

    tokens.append(Token("NEWLINE", "\n", pos()))
    tokens.append(Token("EOF", "", pos()))
    return tokens
