"""Threshold heuristics for Complex Conditional and Complex Method."""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass
from pathlib import Path

from smellpeft.java.lexer import LexError
from smellpeft.java.methods import ExtractionError, MethodUnit, extract_methods


class SmellKind(str, enum.Enum):
    COMPLEX_CONDITIONAL = "ComplexConditional"
    COMPLEX_METHOD = "ComplexMethod"

    @property
    def short(self) -> str:
        return "cc" if self is SmellKind.COMPLEX_CONDITIONAL else "cm"

    @classmethod
    def parse(cls, value: "str | SmellKind") -> "SmellKind":
        if isinstance(value, SmellKind):
            return value
        lowered = value.lower()
        for kind in cls:
            if lowered in (kind.value.lower(), kind.short):
                return kind
        raise ValueError(f"unknown smell kind {value!r}")


class Provenance(str, enum.Enum):
    HEURISTIC = "heuristic"
    MANUAL = "manual"
    MODEL = "model"


@dataclass(frozen=True)
class SmellLabel:
    kind: SmellKind
    positive: bool
    provenance: Provenance = Provenance.HEURISTIC


@dataclass(frozen=True)
class SmellThresholds:
    """CM fires when complexity > ``cm_complexity_gt``; CC fires when one
    condition holds at least ``cc_logical_ops_ge`` short-circuit operators."""

    cm_complexity_gt: int = 8
    cc_logical_ops_ge: int = 3

    def __post_init__(self):
        if self.cm_complexity_gt <= 0 or self.cc_logical_ops_ge <= 0:
            raise ValueError("smell thresholds must be strictly positive")


def detect_smells(method: MethodUnit, thresholds: SmellThresholds = SmellThresholds()) -> list[SmellLabel]:
    cc = method.max_logical_ops >= thresholds.cc_logical_ops_ge
    cm = method.cyclomatic_complexity > thresholds.cm_complexity_gt
    return [
        SmellLabel(SmellKind.COMPLEX_CONDITIONAL, cc),
        SmellLabel(SmellKind.COMPLEX_METHOD, cm),
    ]


def label_for(method: MethodUnit, kind: SmellKind, thresholds: SmellThresholds = SmellThresholds()) -> SmellLabel:
    return next(lab for lab in detect_smells(method, thresholds) if lab.kind is kind)


def detection_records(path: str, methods: list[MethodUnit], thresholds: SmellThresholds) -> list[dict]:
    records = []
    for m in methods:
        labels = {lab.kind: lab.positive for lab in detect_smells(m, thresholds)}
        records.append(
            {
                "path": path,
                "method": m.identity,
                "complexity": m.cyclomatic_complexity,
                "max_logical_ops": m.max_logical_ops,
                "cm": labels[SmellKind.COMPLEX_METHOD],
                "cc": labels[SmellKind.COMPLEX_CONDITIONAL],
            }
        )
    return records


def java_files(paths) -> list[Path]:
    """All ``.java`` files under the given files/directories, sorted."""
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(q for q in p.rglob("*.java") if q.is_file())
        elif p.exists():
            out.append(p)
        else:
            raise FileNotFoundError(p)
    return sorted(set(out))


def scan_paths(
    paths,
    thresholds: SmellThresholds = SmellThresholds(),
    project: str | None = None,
    *,
    count_logical: bool = True,
):
    """Run detection over every Java file below ``paths``.

    Returns ``(records, methods, errors)``; a file that fails to lex or
    extract is listed in ``errors`` as ``(path, message)`` and skipped.
    """
    paths = list(paths)
    roots = [Path(p) for p in paths]
    records, methods, errors = [], [], []
    for f in java_files(paths):
        rel = _relative(f, roots)
        proj = project if project is not None else _project_name(f, roots)
        try:
            text = f.read_text(encoding="utf-8")
            units = extract_methods(text, proj, count_logical=count_logical)
        except (LexError, ExtractionError, UnicodeDecodeError) as exc:
            errors.append((rel, str(exc)))
            continue
        methods.extend(units)
        records.extend(detection_records(rel, units, thresholds))
    return records, methods, errors


def _relative(f: Path, roots: list[Path]) -> str:
    for r in roots:
        if r.is_dir():
            try:
                return f.relative_to(r).as_posix()
            except ValueError:
                continue
    return f.name


def _project_name(f: Path, roots: list[Path]) -> str:
    """The first directory below the scanned root, taken as the project."""
    for r in roots:
        if r.is_dir():
            try:
                parts = f.relative_to(r).parts
            except ValueError:
                continue
            return parts[0] if len(parts) > 1 else r.resolve().name
    return f.parent.name


def write_report(records: list[dict], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
