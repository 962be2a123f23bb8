"""Cyclomatic complexity and per-condition clause counts over a token stream."""

from __future__ import annotations

from dataclasses import dataclass

from smellpeft.java.lexer import JavaToken, TokenKind, code_tokens, tokenize_java

BRANCH_KEYWORDS = frozenset({"if", "for", "while", "do", "case", "catch"})
LOGICAL_OPERATORS = ("&&", "||")

# Tokens that cannot follow a ternary `?`, only a generic wildcard.
_WILDCARD_FOLLOWERS = {">", ">>", ">>>", ",", "extends", "super", "&"}
# Where a backward scan for the start of a ternary condition stops.
_TERNARY_STOPS = {
    "(", "[", "{", "}", ";", ",", "?", ":", "->", "return", "=",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", ">>>=",
    "yield", "throw", "assert", "case",
}


@dataclass(frozen=True)
class ConditionStat:
    line: int
    column: int
    logical_operator_count: int

    @property
    def location(self) -> tuple[int, int]:
        return (self.line, self.column)

    @property
    def atomic_clause_count(self) -> int:
        return self.logical_operator_count + 1


def _as_code(source_or_tokens) -> list[JavaToken]:
    if isinstance(source_or_tokens, str):
        return code_tokens(tokenize_java(source_or_tokens))
    return code_tokens(list(source_or_tokens))


def _matching(tokens: list[JavaToken], i: int, open_: str, close: str) -> int:
    """Index of the token closing the bracket opened at ``i`` (or len(tokens))."""
    depth = 0
    for j in range(i, len(tokens)):
        t = tokens[j]
        if t.kind is TokenKind.PUNCTUATION:
            if t.text == open_:
                depth += 1
            elif t.text == close:
                depth -= 1
                if depth == 0:
                    return j
    return len(tokens)


def _do_while_tails(tokens: list[JavaToken]) -> set[int]:
    """Indices of the `while` keywords that close a `do` loop."""
    tails = set()
    for i, t in enumerate(tokens):
        if not t.is_kw("do") or i + 1 >= len(tokens):
            continue
        if tokens[i + 1].is_punct("{"):
            end = _matching(tokens, i + 1, "{", "}")
        else:
            # braceless body: a single statement up to its `;`
            end = i + 1
            depth = 0
            while end < len(tokens):
                u = tokens[end]
                if u.is_punct("(", "{", "["):
                    depth += 1
                elif u.is_punct(")", "}", "]"):
                    depth -= 1
                elif u.is_punct(";") and depth == 0:
                    break
                end += 1
        if end + 1 < len(tokens) and tokens[end + 1].is_kw("while"):
            tails.add(end + 1)
    return tails


def is_ternary(tokens: list[JavaToken], i: int) -> bool:
    if not tokens[i].is_op("?"):
        return False
    nxt = tokens[i + 1] if i + 1 < len(tokens) else None
    return nxt is None or nxt.text not in _WILDCARD_FOLLOWERS


def decision_points(source_or_tokens, *, count_logical: bool = True) -> list[JavaToken]:
    """The tokens that each add one to cyclomatic complexity."""
    tokens = _as_code(source_or_tokens)
    tails = _do_while_tails(tokens)
    points = []
    for i, t in enumerate(tokens):
        if t.kind is TokenKind.KEYWORD and t.text in BRANCH_KEYWORDS:
            if i not in tails:
                points.append(t)
        elif t.kind is TokenKind.OPERATOR:
            if t.text == "?" and is_ternary(tokens, i):
                points.append(t)
            elif count_logical and t.text in LOGICAL_OPERATORS:
                points.append(t)
    return points


def cyclomatic_complexity(source_or_tokens, *, count_logical: bool = True) -> int:
    """1 + the number of decision points.

    Decision points are `if`, `for`, `while`, `do`, `case`, `catch`, each
    ternary `?` and, unless ``count_logical`` is false, each `&&` / `||`.
    The `while` closing a do-loop belongs to its `do` and is not counted
    again; `default` labels are not decision points.
    """
    return 1 + len(decision_points(source_or_tokens, count_logical=count_logical))


def _count_logical(tokens: list[JavaToken], lo: int, hi: int) -> int:
    return sum(1 for t in tokens[lo:hi] if t.kind is TokenKind.OPERATOR and t.text in LOGICAL_OPERATORS)


def _ternary_condition_start(tokens: list[JavaToken], q: int) -> int:
    depth = 0
    j = q - 1
    while j >= 0:
        t = tokens[j]
        if t.is_punct(")", "]"):
            depth += 1
        elif t.is_punct("(", "["):
            if depth == 0:
                return j + 1
            depth -= 1
        elif depth == 0 and t.text in _TERNARY_STOPS and t.kind is not TokenKind.STRING:
            return j + 1
        j -= 1
    return 0


def condition_clauses(source_or_tokens) -> list[ConditionStat]:
    """One entry per condition expression, in source order.

    Covers `if`, `while` (including the tail of `do ... while`), the middle
    clause of a classic `for`, and the condition of every ternary.
    """
    tokens = _as_code(source_or_tokens)
    stats = []
    for i, t in enumerate(tokens):
        if t.is_kw("if", "while"):
            if i + 1 < len(tokens) and tokens[i + 1].is_punct("("):
                close = _matching(tokens, i + 1, "(", ")")
                stats.append(ConditionStat(t.line, t.column, _count_logical(tokens, i + 2, close)))
        elif t.is_kw("for"):
            if i + 1 >= len(tokens) or not tokens[i + 1].is_punct("("):
                continue
            close = _matching(tokens, i + 1, "(", ")")
            semis = []
            depth = 0
            for j in range(i + 2, close):
                u = tokens[j]
                if u.is_punct("(", "[", "{"):
                    depth += 1
                elif u.is_punct(")", "]", "}"):
                    depth -= 1
                elif u.is_punct(";") and depth == 0:
                    semis.append(j)
            if len(semis) >= 2 and semis[1] > semis[0] + 1:
                stats.append(ConditionStat(t.line, t.column, _count_logical(tokens, semis[0] + 1, semis[1])))
        elif t.is_op("?") and is_ternary(tokens, i):
            start = _ternary_condition_start(tokens, i)
            stats.append(ConditionStat(t.line, t.column, _count_logical(tokens, start, i)))
    return stats


def max_logical_operators(stats: list[ConditionStat]) -> int:
    return max((s.logical_operator_count for s in stats), default=0)
