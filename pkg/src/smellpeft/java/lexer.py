"""A lossless Java lexer.

Whitespace is not emitted as tokens, but every token records its byte span,
so the gaps between spans are exactly the whitespace of the input.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass


class TokenKind(str, enum.Enum):
    IDENTIFIER = "identifier"
    KEYWORD = "keyword"
    NUMBER = "number-literal"
    STRING = "string-literal"
    CHAR = "char-literal"
    OPERATOR = "operator"
    PUNCTUATION = "punctuation"
    COMMENT = "comment"
    ANNOTATION = "annotation"


KEYWORDS = frozenset(
    """
    abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package
    private protected public return short static strictfp super switch
    synchronized this throw throws transient try void volatile while
    true false null var record yield sealed permits non-sealed
    """.split()
)

# Longest first; `<` and `>` alone are punctuation (generics are not disambiguated).
OPERATORS = (
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&", "||",
    "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
    "<<", ">>", "=", "+", "-", "*", "/", "%", "&", "|", "^", "!", "~", "?", ":",
)
PUNCTUATION = frozenset("(){}[];,.<>@")

_NUMBER = re.compile(
    r"""
    0[xX][0-9a-fA-F_]*(?:\.[0-9a-fA-F_]*)?(?:[pP][+-]?\d+)?[lLfFdD]?
    | 0[bB][01_]+[lL]?
    | (?:\d[\d_]*\.?[\d_]*|\.\d[\d_]*)(?:[eE][+-]?\d+)?[lLfFdD]?
    """,
    re.VERBOSE,
)
_IDENT = re.compile(r"[A-Za-z_$\u0080-\uffff][\w$\u0080-\uffff]*")
_WS = re.compile(r"\s+")


class LexError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class JavaToken:
    kind: TokenKind
    text: str
    line: int
    column: int
    start: int
    end: int

    def is_op(self, *texts: str) -> bool:
        return self.kind is TokenKind.OPERATOR and self.text in texts

    def is_kw(self, *texts: str) -> bool:
        return self.kind is TokenKind.KEYWORD and self.text in texts

    def is_punct(self, *texts: str) -> bool:
        return self.kind is TokenKind.PUNCTUATION and self.text in texts


def tokenize_java(source: str, *, strict: bool = True) -> list[JavaToken]:
    """Split ``source`` into tokens.

    With ``strict=False`` an unterminated literal or comment runs to the end
    of its line (or of the input, for block comments) instead of raising.
    """
    tokens: list[JavaToken] = []
    pos = 0
    line = 1
    line_start = 0
    n = len(source)

    def emit(kind: TokenKind, end: int) -> None:
        tokens.append(JavaToken(kind, source[pos:end], line, pos - line_start + 1, pos, end))

    while pos < n:
        ch = source[pos]
        m = _WS.match(source, pos)
        if m:
            chunk = m.group()
            newlines = chunk.count("\n")
            if newlines:
                line += newlines
                line_start = pos + chunk.rindex("\n") + 1
            pos = m.end()
            continue

        col = pos - line_start + 1
        if source.startswith("//", pos):
            end = source.find("\n", pos)
            end = n if end < 0 else end
            emit(TokenKind.COMMENT, end)
            pos = end
            continue
        if source.startswith("/*", pos):
            end = source.find("*/", pos + 2)
            if end < 0:
                if strict:
                    raise LexError("unterminated comment", line, col)
                end = n
            else:
                end += 2
            emit(TokenKind.COMMENT, end)
            text = source[pos:end]
            if "\n" in text:
                line += text.count("\n")
                line_start = pos + text.rindex("\n") + 1
            pos = end
            continue
        if source.startswith('"""', pos):
            end = _scan_text_block(source, pos + 3)
            if end < 0:
                if strict:
                    raise LexError("unterminated text block", line, col)
                end = n
            emit(TokenKind.STRING, end)
            text = source[pos:end]
            if "\n" in text:
                line += text.count("\n")
                line_start = pos + text.rindex("\n") + 1
            pos = end
            continue
        if ch == '"' or ch == "'":
            end = _scan_quoted(source, pos + 1, ch)
            if end < 0:
                if strict:
                    kind = "string" if ch == '"' else "char"
                    raise LexError(f"unterminated {kind} literal", line, col)
                nl = source.find("\n", pos)
                end = n if nl < 0 else nl
            emit(TokenKind.STRING if ch == '"' else TokenKind.CHAR, end)
            pos = end
            continue
        if ch.isdigit() or (ch == "." and pos + 1 < n and source[pos + 1].isdigit()):
            m = _NUMBER.match(source, pos)
            emit(TokenKind.NUMBER, m.end())
            pos = m.end()
            continue
        if ch == "@" and not source.startswith("@interface", pos):
            m = _IDENT.match(source, pos + 1)
            if m:
                end = m.end()
                # qualified annotation names: @java.lang.Override
                while end < n and source[end] == ".":
                    nxt = _IDENT.match(source, end + 1)
                    if not nxt:
                        break
                    end = nxt.end()
                emit(TokenKind.ANNOTATION, end)
                pos = end
                continue
        m = _IDENT.match(source, pos)
        if m:
            word = m.group()
            if word == "non" and source.startswith("non-sealed", pos):
                emit(TokenKind.KEYWORD, pos + len("non-sealed"))
                pos += len("non-sealed")
                continue
            emit(TokenKind.KEYWORD if word in KEYWORDS else TokenKind.IDENTIFIER, m.end())
            pos = m.end()
            continue
        for op in OPERATORS:
            if source.startswith(op, pos):
                emit(TokenKind.OPERATOR, pos + len(op))
                pos += len(op)
                break
        else:
            if ch in PUNCTUATION:
                emit(TokenKind.PUNCTUATION, pos + 1)
                pos += 1
            elif strict:
                raise LexError(f"unexpected character {ch!r}", line, col)
            else:
                emit(TokenKind.PUNCTUATION, pos + 1)
                pos += 1
    return tokens


def _scan_quoted(source: str, pos: int, quote: str) -> int:
    n = len(source)
    while pos < n:
        c = source[pos]
        if c == "\\":
            pos += 2
            continue
        if c == quote:
            return pos + 1
        if c == "\n":
            return -1
        pos += 1
    return -1


def _scan_text_block(source: str, pos: int) -> int:
    n = len(source)
    while pos < n:
        if source[pos] == "\\":
            pos += 2
            continue
        if source.startswith('"""', pos):
            return pos + 3
        pos += 1
    return -1


def code_tokens(tokens: list[JavaToken]) -> list[JavaToken]:
    """Tokens that take part in syntax, i.e. everything except comments."""
    return [t for t in tokens if t.kind is not TokenKind.COMMENT]
