"""Method extraction by brace-balanced scanning of a compilation unit."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from smellpeft.java.lexer import JavaToken, TokenKind, code_tokens, tokenize_java
from smellpeft.java.metrics import ConditionStat, condition_clauses, cyclomatic_complexity
from smellpeft.java.subtokens import count_tokens

TYPE_KEYWORDS = ("class", "interface", "enum", "record")
_NOT_METHOD_NAMES = {"if", "for", "while", "switch", "catch", "synchronized", "try", "return", "new"}
_CONTEXTUAL_KEYWORDS = {"record", "var", "yield", "sealed", "permits"}


class ExtractionError(ValueError):
    pass


@dataclass(frozen=True)
class MethodUnit:
    project: str
    package_path: tuple[str, ...]
    class_name: str
    method_name: str
    source: str
    token_count: int = 0
    cyclomatic_complexity: int = 1
    condition_stats: tuple[ConditionStat, ...] = field(default=())

    @property
    def identity(self) -> str:
        """Path-like identity: ``project/pkg/parts/Class/method``."""
        return "/".join((self.project, *self.package_path, self.class_name, self.method_name))

    @property
    def max_logical_ops(self) -> int:
        return max((s.logical_operator_count for s in self.condition_stats), default=0)

    @classmethod
    def from_source(
        cls,
        source: str,
        *,
        project: str = "",
        package_path=(),
        class_name: str = "",
        method_name: str = "",
        count_logical: bool = True,
    ) -> "MethodUnit":
        """Build a unit and populate its metrics from the method text alone."""
        tokens = code_tokens(tokenize_java(source))
        return cls(
            project=project,
            package_path=tuple(package_path),
            class_name=class_name,
            method_name=method_name,
            source=source,
            token_count=count_tokens(source),
            cyclomatic_complexity=cyclomatic_complexity(tokens, count_logical=count_logical),
            condition_stats=tuple(condition_clauses(tokens)),
        )


@dataclass
class _Scope:
    kind: str  # "type", "enum" or "other"
    name: str = ""
    enum_constants_done: bool = True


def _package_path(tokens: list[JavaToken]) -> tuple[str, ...]:
    for i, t in enumerate(tokens):
        if t.is_kw("package"):
            parts = []
            for u in tokens[i + 1 :]:
                if u.is_punct(";"):
                    break
                if u.kind is TokenKind.IDENTIFIER:
                    parts.append(u.text)
            return tuple(parts)
    return ()


def _type_name(header: list[JavaToken]) -> tuple[str, str] | None:
    for i, t in enumerate(header):
        if t.kind is TokenKind.KEYWORD and t.text in TYPE_KEYWORDS:
            # `record` is only a keyword when followed by a name
            if i + 1 < len(header) and header[i + 1].kind is TokenKind.IDENTIFIER:
                return t.text, header[i + 1].text
    return None


def _method_name(header: list[JavaToken]) -> str | None:
    """Name of a method/constructor declaration header, or None."""
    if not header:
        return None
    if any(t.is_op("=") for t in header) or any(t.is_kw("new") for t in header):
        return None  # field initialiser with an anonymous class
    # strip a trailing `throws A, B.C`
    end = len(header)
    for i, t in enumerate(header):
        if t.is_kw("throws"):
            end = i
            break
    if end == 0 or not header[end - 1].is_punct(")"):
        return None
    depth = 0
    for j in range(end - 1, -1, -1):
        u = header[j]
        if u.is_punct(")"):
            depth += 1
        elif u.is_punct("("):
            depth -= 1
            if depth == 0:
                if j == 0:
                    return None
                name_tok = header[j - 1]
                if name_tok.kind is TokenKind.IDENTIFIER and name_tok.text not in _NOT_METHOD_NAMES:
                    return name_tok.text
                if name_tok.kind is TokenKind.KEYWORD and name_tok.text in _CONTEXTUAL_KEYWORDS:
                    return name_tok.text
                return None
    return None


def extract_methods(compilation_unit: str, project: str = "", *, count_logical: bool = True) -> list[MethodUnit]:
    """One MethodUnit per method or constructor body found beneath a type.

    Nested types contribute ``Outer.Inner`` class names. Anything inside a
    method body (lambdas, anonymous and local classes) stays part of that
    method. Overloads get ``name#1``, ``name#2``, ... suffixes.
    """
    raw = tokenize_java(compilation_unit)
    tokens = code_tokens(raw)
    package = _package_path(tokens)

    found: list[tuple[str, str, int, int]] = []  # (class, method, start, end)
    stack: list[_Scope] = []
    header_start = 0
    i = 0
    n = len(tokens)
    while i < n:
        t = tokens[i]
        if t.is_punct(";"):
            if stack and stack[-1].kind == "enum":
                stack[-1].enum_constants_done = True
            header_start = i + 1
        elif t.is_punct("}"):
            if not stack:
                raise ExtractionError(f"unbalanced '}}' at line {t.line}, column {t.column}")
            stack.pop()
            header_start = i + 1
        elif t.is_punct("{"):
            header = tokens[header_start:i]
            if _paren_depth(header) > 0:
                # array initialiser inside annotation arguments
                i = _matching_brace(tokens, i) + 1
                continue
            inside_type = bool(stack) and stack[-1].kind in ("type", "enum")
            typ = _type_name(header)
            if typ is not None and (not stack or inside_type):
                kind, name = typ
                outer = next((s.name for s in reversed(stack) if s.kind in ("type", "enum")), "")
                full = f"{outer}.{name}" if outer else name
                stack.append(_Scope("enum" if kind == "enum" else "type", full, kind != "enum"))
                header_start = i + 1
            elif inside_type and stack[-1].enum_constants_done and (name := _method_name(header)):
                close = _matching_brace(tokens, i)
                found.append((stack[-1].name, name, tokens[header_start].start, tokens[close].end))
                i = close
                header_start = i + 1
            else:
                stack.append(_Scope("other"))
                header_start = i + 1
        elif t.is_punct(",") and stack and stack[-1].kind == "enum" and not stack[-1].enum_constants_done:
            header_start = i + 1
        i += 1
    if stack:
        raise ExtractionError("unbalanced '{': end of input inside a block")

    per_class = Counter((cls, name) for cls, name, _, _ in found)
    seen: Counter = Counter()
    units = []
    for cls, name, start, end in found:
        ident = name
        if per_class[(cls, name)] > 1:
            seen[(cls, name)] += 1
            ident = f"{name}#{seen[(cls, name)]}"
        units.append(
            MethodUnit.from_source(
                compilation_unit[start:end],
                project=project,
                package_path=package,
                class_name=cls,
                method_name=ident,
                count_logical=count_logical,
            )
        )
    return units


def _paren_depth(header: list[JavaToken]) -> int:
    depth = 0
    for t in header:
        if t.is_punct("("):
            depth += 1
        elif t.is_punct(")"):
            depth -= 1
    return depth


def _matching_brace(tokens: list[JavaToken], i: int) -> int:
    depth = 0
    for j in range(i, len(tokens)):
        t = tokens[j]
        if t.is_punct("{"):
            depth += 1
        elif t.is_punct("}"):
            depth -= 1
            if depth == 0:
                return j
    t = tokens[i]
    raise ExtractionError(f"unbalanced '{{' opened at line {t.line}, column {t.column}")
