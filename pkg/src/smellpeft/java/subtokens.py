"""The word-level tokenizer shared by the token-limit filter and the model vocabulary."""

from __future__ import annotations

import re

from smellpeft.java.lexer import TokenKind, tokenize_java

_CAMEL = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|\d+")
_COMMENT_WORD = re.compile(r"[A-Za-z]+|\d+|[^\w\s]")

STRING_TOKEN = "<str>"
CHAR_TOKEN = "<char>"
NUMBER_TOKEN = "<num>"

TOKENIZER_ID = "java-subword-v1"


def split_identifier(name: str) -> list[str]:
    """``parseHTTPHeader_v2`` -> ``['parse', 'http', 'header', 'v', '2']``."""
    parts = [p.lower() for p in _CAMEL.findall(name)]
    return parts or [name]


def pipeline_tokens(source: str) -> list[str]:
    out: list[str] = []
    for tok in tokenize_java(source, strict=False):
        kind = tok.kind
        if kind is TokenKind.IDENTIFIER or kind is TokenKind.KEYWORD:
            out.extend(split_identifier(tok.text))
        elif kind is TokenKind.ANNOTATION:
            out.append("@")
            out.extend(split_identifier(tok.text[1:]))
        elif kind is TokenKind.NUMBER:
            out.append(NUMBER_TOKEN)
        elif kind is TokenKind.STRING:
            out.append(STRING_TOKEN)
        elif kind is TokenKind.CHAR:
            out.append(CHAR_TOKEN)
        elif kind is TokenKind.COMMENT:
            out.extend(w.lower() for w in _COMMENT_WORD.findall(tok.text))
        else:
            out.append(tok.text)
    return out


def count_tokens(source: str) -> int:
    return len(pipeline_tokens(source))
