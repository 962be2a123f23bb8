"""Random Java methods whose metrics are known by construction.

The generator keeps its own tally of decision points and per-condition
operator counts while it writes each statement, so the tallies serve as an
oracle that shares no code with the lexer-based metrics.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_VARS = ("count", "total", "index", "value", "limit", "offset", "size", "flag", "item", "result")
_CALLS = ("process", "update", "log", "validate", "flush", "render", "emit", "store")
_EXCEPTIONS = ("IOException", "IllegalStateException", "TimeoutException")
_TYPES = ("int", "long", "String", "boolean", "double")
_NOISE_STRINGS = ('"a && b"', '"x || y ? z"', '"if (ok)"', '"for case catch"', '"done"')
_NOISE_COMMENTS = ("// if (a && b) then", "/* while (x || y) */", "// case: catch ? none", "// plain note")


@dataclass
class GeneratedMethod:
    source: str
    name: str
    decision_points: int
    condition_ops: list[int] = field(default_factory=list)

    @property
    def complexity(self) -> int:
        return 1 + self.decision_points


class _Writer:
    def __init__(self, rng: np.random.Generator, noise: bool):
        self.rng = rng
        self.noise = noise
        self.lines: list[str] = []
        self.decisions = 0
        self.conditions: list[int] = []

    def pick(self, seq):
        return seq[int(self.rng.integers(len(seq)))]

    def emit(self, depth: int, text: str) -> None:
        self.lines.append("    " * depth + text)

    def atom(self) -> str:
        a, b = self.pick(_VARS), self.pick(_VARS)
        forms = (f"{a} > {b}", f"{a} != null", f"!{a}.isEmpty()", f"{a} <= {int(self.rng.integers(100))}",
                 f"{a}.equals({b})", f"is{a.capitalize()}()")
        return self.pick(forms)

    def condition(self, ops: int) -> str:
        """An expression with exactly ``ops`` short-circuit operators."""
        parts = [self.atom() for _ in range(ops + 1)]
        text = parts[0]
        for p in parts[1:]:
            op = "&&" if self.rng.random() < 0.6 else "||"
            if self.rng.random() < 0.2:
                text = f"({text})"
            text = f"{text} {op} {p}"
        return text

    def plain(self, depth: int) -> None:
        r = self.rng.random()
        v = self.pick(_VARS)
        if self.noise and r < 0.15:
            self.emit(depth, self.pick(_NOISE_COMMENTS))
        elif self.noise and r < 0.3:
            self.emit(depth, f"{self.pick(_CALLS)}({v}, {self.pick(_NOISE_STRINGS)});")
        elif r < 0.65:
            self.emit(depth, f"{v} = {self.pick(_VARS)} + {int(self.rng.integers(1, 9))};")
        else:
            self.emit(depth, f"{self.pick(_CALLS)}({v});")

    def block(self, depth: int, budget: int, ops_range: tuple[int, int], n_plain: int) -> None:
        """Write statements consuming exactly ``budget`` decision points."""
        while budget > 0:
            budget -= self.construct(depth, budget, ops_range)
            if self.rng.random() < 0.5:
                self.plain(depth)
        for _ in range(n_plain):
            self.plain(depth)

    def take_ops(self, budget: int, ops_range: tuple[int, int]) -> int:
        lo, hi = ops_range
        hi = min(hi, budget - 1)
        if hi < lo:
            return max(0, hi)
        return int(self.rng.integers(lo, hi + 1))

    def construct(self, depth: int, budget: int, ops_range: tuple[int, int]) -> int:
        """Write one branching construct; return the decision points used."""
        kinds = ["if", "while", "for", "foreach", "do", "ternary"]
        if budget >= 2:
            kinds += ["switch", "try"]
        kind = self.pick(kinds)
        inner_budget = 0
        if kind in ("if", "while", "for", "do") and depth < 3 and budget >= 3 and self.rng.random() < 0.4:
            inner_budget = int(self.rng.integers(1, max(2, budget // 2)))

        if kind in ("if", "while", "do", "for", "ternary"):
            ops = self.take_ops(budget - inner_budget, ops_range)
            used = 1 + ops + inner_budget
            cond = self.condition(ops)
            if kind == "if":
                self.conditions.append(ops)
                self.emit(depth, f"if ({cond}) {{")
                self.block(depth + 1, inner_budget, ops_range, 1)
                if self.rng.random() < 0.4:
                    self.emit(depth, "} else {")
                    self.plain(depth + 1)
                self.emit(depth, "}")
            elif kind == "while":
                self.conditions.append(ops)
                self.emit(depth, f"while ({cond}) {{")
                self.block(depth + 1, inner_budget, ops_range, 1)
                self.emit(depth, "}")
            elif kind == "for":
                self.conditions.append(ops)
                self.emit(depth, f"for (int i{depth} = 0; {cond}; i{depth}++) {{")
                self.block(depth + 1, inner_budget, ops_range, 1)
                self.emit(depth, "}")
            elif kind == "do":
                self.emit(depth, "do {")
                self.block(depth + 1, inner_budget, ops_range, 1)
                self.conditions.append(ops)
                self.emit(depth, f"}} while ({cond});")
            else:
                self.conditions.append(ops)
                v = self.pick(_VARS)
                self.emit(depth, f"{v} = {cond} ? {self.pick(_VARS)} : {int(self.rng.integers(9))};")
            self.decisions += 1 + ops  # the nested block tallied its own
            return used
        if kind == "foreach":
            self.emit(depth, f"for (String s{depth} : {self.pick(_VARS)}List) {{")
            self.plain(depth + 1)
            self.emit(depth, "}")
            self.decisions += 1
            return 1
        if kind == "switch":
            cases = int(self.rng.integers(1, min(budget, 6) + 1))
            self.emit(depth, f"switch ({self.pick(_VARS)}) {{")
            for c in range(cases):
                self.emit(depth + 1, f"case {c}:")
                self.plain(depth + 2)
                self.emit(depth + 2, "break;")
            if self.rng.random() < 0.7:
                self.emit(depth + 1, "default:")
                self.plain(depth + 2)
            self.emit(depth, "}")
            self.decisions += cases
            return cases
        # try with one or more catch clauses
        catches = int(self.rng.integers(1, min(budget, 3) + 1))
        self.emit(depth, "try {")
        self.plain(depth + 1)
        for c in range(catches):
            self.emit(depth, f"}} catch ({_EXCEPTIONS[c % len(_EXCEPTIONS)]} e{c}) {{")
            self.plain(depth + 1)
        if self.rng.random() < 0.3:
            self.emit(depth, "} finally {")
            self.plain(depth + 1)
        self.emit(depth, "}")
        self.decisions += catches
        return catches


def generate_method(
    rng: np.random.Generator,
    decision_points: int | None = None,
    *,
    name: str | None = None,
    ops_range: tuple[int, int] = (0, 2),
    n_plain: int | None = None,
    noise: bool = True,
) -> GeneratedMethod:
    """A random method with exactly ``decision_points`` decision points.

    Conditions carry between ``ops_range[0]`` and ``ops_range[1]`` logical
    operators each (fewer when the budget runs out).
    """
    if decision_points is None:
        decision_points = int(rng.integers(0, 15))
    w = _Writer(rng, noise)
    if n_plain is None:
        n_plain = int(rng.integers(1, 4))
    w.block(1, decision_points, ops_range, n_plain)
    name = name or f"{w.pick(_CALLS)}{w.pick(_VARS).capitalize()}"
    ret = w.pick(_TYPES)
    header = f"public {ret} {name}(int {w.pick(_VARS)}, String label) {{"
    body = "\n".join(w.lines)
    tail = f"    return {'null' if ret == 'String' else 'false' if ret == 'boolean' else '0'};"
    source = f"{header}\n{body}\n{tail}\n}}"
    return GeneratedMethod(source, name, w.decisions, w.conditions)


def generate_smell_method(
    rng: np.random.Generator,
    kind: str,
    positive: bool,
    *,
    name: str | None = None,
    cm_complexity_gt: int = 8,
    cc_logical_ops_ge: int = 3,
) -> GeneratedMethod:
    """A method far from the decision boundary of one smell heuristic.

    ``kind`` is ``"cm"`` or ``"cc"``. Negatives get extra straight-line
    statements so that method length alone does not reveal the label.
    """
    if kind == "cm":
        if positive:
            budget = int(rng.integers(cm_complexity_gt + 2, cm_complexity_gt + 9))
            return generate_method(rng, budget, name=name, ops_range=(0, 1), n_plain=int(rng.integers(0, 3)))
        budget = int(rng.integers(0, max(1, cm_complexity_gt // 2)))
        return generate_method(rng, budget, name=name, ops_range=(0, 1), n_plain=int(rng.integers(6, 14)))
    if kind == "cc":
        if positive:
            hi = cc_logical_ops_ge + 3
            budget = int(rng.integers(cc_logical_ops_ge + 1, hi + 2))
            return generate_method(rng, budget, name=name, ops_range=(cc_logical_ops_ge, hi), n_plain=2)
        budget = int(rng.integers(1, 6))
        return generate_method(rng, budget, name=name, ops_range=(0, max(0, cc_logical_ops_ge - 3)), n_plain=3)
    raise ValueError(f"unknown smell kind {kind!r}")


def write_corpus(
    root: str | os.PathLike,
    n_methods: int,
    seed: int = 0,
    *,
    kind: str = "cm",
    positive_fraction: float = 0.5,
    methods_per_class: int = 5,
    n_projects: int = 3,
) -> list[Path]:
    """Write a small multi-project Java corpus of generated methods."""
    rng = np.random.default_rng(seed)
    root = Path(root)
    files = []
    idx = 0
    cls_no = 0
    while idx < n_methods:
        project = f"project{cls_no % n_projects}"
        pkg = ("org", "example", f"mod{cls_no % 4}")
        cls = f"Widget{cls_no}"
        methods = []
        for _ in range(min(methods_per_class, n_methods - idx)):
            positive = bool(rng.random() < positive_fraction)
            m = generate_smell_method(rng, kind, positive, name=f"op{idx}")
            methods.append("\n".join("    " + line for line in m.source.splitlines()))
            idx += 1
        body = "\n\n".join(methods)
        text = f"package {'.'.join(pkg)};\n\nimport java.util.List;\n\npublic class {cls} {{\n{body}\n}}\n"
        path = root / project / "src" / Path(*pkg) / f"{cls}.java"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        files.append(path)
        cls_no += 1
    return files
