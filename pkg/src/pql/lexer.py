"""Tokenizer for the query language.

Keywords are case-insensitive. Qualified column names (``TABLE.COLUMN`` or
``TABLE.*``) are recognized as single tokens, so keyword-spelled words are
legal as name parts. String literals take single or double quotes with the
delimiter doubled to escape it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List

from .ast import AggKind
from .errors import LexError, Span


class TokenType(enum.Enum):
    KEYWORD = "keyword"
    AGGR = "aggr"
    IDENT = "ident"
    COLUMN = "column"  # TABLE.COLUMN
    WILDCARD_COLUMN = "wildcard"  # TABLE.*
    INT = "int"
    FLOAT = "float"
    STRING = "string"
    MINUS_INF = "-INF"
    OP = "op"  # != <= >= < > =
    LPAREN = "("
    RPAREN = ")"
    LBRACKET = "["
    RBRACKET = "]"
    COMMA = ","
    EOF = "eof"


KEYWORDS = {
    "PREDICT",
    "FOR",
    "EACH",
    "WHERE",
    "ASSUMING",
    "RANK",
    "CLASSIFY",
    "TOP",
    "NOT",
    "AND",
    "OR",
    "IS",
    "IN",
    "LIKE",
    "CONTAINS",
    "STARTS",
    "ENDS",
    "WITH",
    "NULL",
    "TRUE",
    "FALSE",
}

AGG_KINDS = {k.value for k in AggKind}


@dataclass(frozen=True)
class Token:
    type: TokenType
    text: str
    span: Span
    value: object = None

    def __repr__(self) -> str:
        return f"Token({self.type.name}, {self.text!r}@{self.span})"


def _is_ident_start(ch: str) -> bool:
    return ch.isalpha() or ch == "_"


def _is_ident_char(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


class _Scanner:
    def __init__(self, source: str):
        self.src = source
        self.pos = 0
        self.line = 1
        self.col = 1

    def span(self) -> Span:
        return Span(self.line, self.col)

    def peek(self, ahead: int = 0) -> str:
        i = self.pos + ahead
        return self.src[i] if i < len(self.src) else ""

    def advance(self) -> str:
        ch = self.src[self.pos]
        self.pos += 1
        if ch == "\n":
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        return ch

    def take_while(self, pred) -> str:
        start = self.pos
        while self.pos < len(self.src) and pred(self.src[self.pos]):
            self.advance()
        return self.src[start : self.pos]


def tokenize(source: str) -> List[Token]:
    """Tokenize `source`, returning a token list terminated by EOF."""
    sc = _Scanner(source)
    out: List[Token] = []
    while sc.pos < len(sc.src):
        ch = sc.peek()
        if ch in " \t\r\n":
            sc.advance()
            continue
        span = sc.span()
        if ch in "('\"":
            if ch == "(":
                sc.advance()
                out.append(Token(TokenType.LPAREN, "(", span))
                continue
            out.append(_scan_string(sc, span))
            continue
        if ch == ")":
            sc.advance()
            out.append(Token(TokenType.RPAREN, ")", span))
            continue
        if ch == "[":
            sc.advance()
            out.append(Token(TokenType.LBRACKET, "[", span))
            continue
        if ch == "]":
            sc.advance()
            out.append(Token(TokenType.RBRACKET, "]", span))
            continue
        if ch == ",":
            sc.advance()
            out.append(Token(TokenType.COMMA, ",", span))
            continue
        if ch in "!<>=":
            out.append(_scan_operator(sc, span))
            continue
        if ch == "-":
            out.append(_scan_signed(sc, span))
            continue
        if ch.isdigit():
            out.append(_scan_number(sc, span, ""))
            continue
        if _is_ident_start(ch):
            out.append(_scan_word(sc, span))
            continue
        raise LexError(f"illegal character {ch!r}", span)
    out.append(Token(TokenType.EOF, "", sc.span()))
    return out


def _scan_string(sc: _Scanner, span: Span) -> Token:
    quote = sc.advance()
    parts: List[str] = []
    while True:
        if sc.pos >= len(sc.src):
            raise LexError("unterminated string literal", span)
        ch = sc.advance()
        if ch == quote:
            if sc.peek() == quote:  # doubled delimiter = literal quote
                sc.advance()
                parts.append(quote)
                continue
            break
        parts.append(ch)
    text = "".join(parts)
    return Token(TokenType.STRING, text, span, value=text)


def _scan_operator(sc: _Scanner, span: Span) -> Token:
    ch = sc.advance()
    if ch in "!<>" and sc.peek() == "=":
        sc.advance()
        return Token(TokenType.OP, ch + "=", span)
    if ch == "!":
        raise LexError("expected '=' after '!'", span)
    return Token(TokenType.OP, ch, span)


def _scan_signed(sc: _Scanner, span: Span) -> Token:
    sc.advance()  # consume '-'
    nxt = sc.peek()
    if nxt.isdigit():
        return _scan_number(sc, span, "-")
    if _is_ident_start(nxt):
        word = sc.take_while(_is_ident_char)
        if word.upper() == "INF":
            return Token(TokenType.MINUS_INF, "-INF", span)
        raise LexError(f"unexpected '-{word}'", span)
    raise LexError("unexpected '-'", span)


def _scan_number(sc: _Scanner, span: Span, sign: str) -> Token:
    digits = sc.take_while(str.isdigit)
    text = sign + digits
    is_float = False
    if sc.peek() == "." and sc.peek(1).isdigit():
        sc.advance()
        text += "." + sc.take_while(str.isdigit)
        is_float = True
    if sc.peek() in "eE" and (sc.peek(1).isdigit() or (sc.peek(1) in "+-" and sc.peek(2).isdigit())):
        text += sc.advance()
        if sc.peek() in "+-":
            text += sc.advance()
        text += sc.take_while(str.isdigit)
        is_float = True
    if is_float:
        return Token(TokenType.FLOAT, text, span, value=float(text))
    return Token(TokenType.INT, text, span, value=int(text))


def _scan_word(sc: _Scanner, span: Span) -> Token:
    word = sc.take_while(_is_ident_char)
    # A dot immediately after a word makes a qualified column token; the
    # parts may be spelled like keywords (the dot binds tighter).
    if sc.peek() == ".":
        nxt = sc.peek(1)
        if nxt == "*":
            sc.advance()
            sc.advance()
            return Token(TokenType.WILDCARD_COLUMN, word.upper() + ".*", span, value=(word.upper(), "*"))
        if _is_ident_start(nxt):
            sc.advance()
            col = sc.take_while(_is_ident_char)
            return Token(
                TokenType.COLUMN,
                f"{word.upper()}.{col.upper()}",
                span,
                value=(word.upper(), col.upper()),
            )
    upper = word.upper()
    if upper in AGG_KINDS:
        return Token(TokenType.AGGR, upper, span, value=AggKind(upper))
    if upper in KEYWORDS:
        return Token(TokenType.KEYWORD, upper, span)
    return Token(TokenType.IDENT, upper, span, value=upper)
