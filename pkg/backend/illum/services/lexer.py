"""
Tokenizer and token stream shared by the .ill and .hll parsers
"""

import re
from dataclasses import dataclass
from typing import List, Optional, Sequence

from illum.core.errors import ParseError


@dataclass(frozen=True)
class Token:
    kind: str  # INT, HEX, STRING, NAME, SYM, EOF
    value: str
    line: int
    column: int

    def __str__(self) -> str:
        return "end of input" if self.kind == "EOF" else repr(self.value)


_SPACE = re.compile(r"[ \t\r]+")
_COMMENT = re.compile(r"//[^\n]*")
_HEX = re.compile(r"0x[0-9a-fA-F]*")
_INT = re.compile(r"[0-9]+")
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_STRING = re.compile(r'"([^"\\\n]|\\.)*"')


def tokenize(source: str, symbols: Sequence[str], source_name: str = "") -> List[Token]:
    """Split ``source`` into tokens; ``symbols`` are tried longest first"""
    ordered = sorted(symbols, key=len, reverse=True)
    tokens: List[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        column = pos - line_start + 1
        ch = source[pos]
        if ch == "\n":
            pos += 1
            line, line_start = line + 1, pos
            continue
        m = _SPACE.match(source, pos) or _COMMENT.match(source, pos)
        if m:
            pos = m.end()
            continue
        for kind, pattern in (("HEX", _HEX), ("INT", _INT), ("NAME", _NAME), ("STRING", _STRING)):
            m = pattern.match(source, pos)
            if m:
                tokens.append(Token(kind, m.group(0), line, column))
                pos = m.end()
                break
        else:
            for sym in ordered:
                if source.startswith(sym, pos):
                    tokens.append(Token("SYM", sym, line, column))
                    pos += len(sym)
                    break
            else:
                raise ParseError(f"unexpected character {ch!r}", line, column, source_name)
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


class TokenStream:
    """Cursor over a token list with the usual peek/accept/expect helpers"""

    def __init__(self, tokens: List[Token], source_name: str = ""):
        self.tokens = tokens
        self.pos = 0
        self.source_name = source_name

    def peek(self, offset: int = 0) -> Token:
        index = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[index]

    def next(self) -> Token:
        token = self.peek()
        if token.kind != "EOF":
            self.pos += 1
        return token

    def at(self, value: str, offset: int = 0) -> bool:
        token = self.peek(offset)
        return token.kind in ("SYM", "NAME") and token.value == value

    def accept(self, value: str) -> Optional[Token]:
        if self.at(value):
            return self.next()
        return None

    def expect(self, value: str) -> Token:
        token = self.peek()
        if not self.at(value):
            self.error(f"expected {value!r}, found {token}")
        return self.next()

    def expect_kind(self, kind: str, what: str) -> Token:
        token = self.peek()
        if token.kind != kind:
            self.error(f"expected {what}, found {token}")
        return self.next()

    def at_end(self) -> bool:
        return self.peek().kind == "EOF"

    def error(self, message: str, token: Token = None):
        token = token or self.peek()
        raise ParseError(message, token.line, token.column, self.source_name)


def unescape(literal: str) -> bytes:
    """Bytes of a double-quoted string literal"""
    body = literal[1:-1]
    return re.sub(r"\\(.)", lambda m: {"n": "\n", "t": "\t"}.get(m.group(1), m.group(1)), body).encode("utf-8")
