"""Dataset construction: labelling, dedup, token limit, balancing, splits.

All randomness comes from one integer seed; each stage draws from its own
stream (:func:`stage_rng`) so adding a stage never perturbs another.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from smellpeft.java.detect import Provenance, SmellKind, SmellLabel, SmellThresholds, label_for
from smellpeft.java.lexer import TokenKind, tokenize_java
from smellpeft.java.methods import MethodUnit
from smellpeft.java.subtokens import TOKENIZER_ID, count_tokens

SCHEMA_VERSION = 1
SPLITS = ("train", "valid", "test")
DATASET_FILE = "dataset.jsonl"
MANIFEST_FILE = "manifest.json"

__all__ = [
    "DatasetSplit",
    "LabeledDataset",
    "PipelineManifest",
    "Sample",
    "SchemaError",
    "apply_manual_labels",
    "assemble_labeled_dataset",
    "count_tokens",
    "deduplicate",
    "export_dataset",
    "filter_by_token_limit",
    "import_dataset",
    "label_methods",
    "normalize_source",
    "split_sizes",
    "stage_rng",
    "stratified_split",
    "subsample_low_resource",
]


class SchemaError(ValueError):
    pass


def stage_rng(seed: int, stage: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(stage.encode())]))


@dataclass(frozen=True)
class Sample:
    method: MethodUnit
    label: SmellLabel
    split: str = "unassigned"

    @property
    def identity(self) -> str:
        return self.method.identity

    @property
    def y(self) -> int:
        return int(self.label.positive)


@dataclass
class LabeledDataset:
    smell_kind: SmellKind
    positives: list[Sample]
    negatives: list[Sample]

    @property
    def samples(self) -> list[Sample]:
        return self.positives + self.negatives


@dataclass
class DatasetSplit:
    smell_kind: SmellKind
    train: list[Sample]
    valid: list[Sample]
    test: list[Sample]
    seed: int = 0

    def part(self, name: str) -> list[Sample]:
        return getattr(self, name)

    def counts(self) -> dict[str, dict[str, int]]:
        out = {}
        for name in SPLITS:
            part = self.part(name)
            pos = sum(s.y for s in part)
            out[name] = {"positive": pos, "negative": len(part) - pos}
        return out


@dataclass
class PipelineManifest:
    smell_kind: str
    criteria: dict | None = None
    thresholds: dict = field(default_factory=lambda: vars(SmellThresholds()).copy())
    count_logical: bool = True
    tokenizer: str = TOKENIZER_ID
    max_tokens: int = 1024
    seed: int = 0
    balance: bool = True
    dedup_rule: str = "whitespace-collapsed outside literals, first occurrence kept"
    negative_sampling: str = "uniform without replacement, seeded"
    split_ratios: tuple[int, int, int] = (8, 1, 1)
    split_rounding: str = "heldout-half-even"
    # {"positive": {"initial": n, "deduplicated": n, "token_filtered": n}, "negative": {...}}
    stage_counts: dict = field(default_factory=dict)
    manual_flips: int = 0
    split_counts: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        d = dict(vars(self))
        d["split_ratios"] = list(self.split_ratios)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineManifest":
        found = d.get("schema_version")
        if found != SCHEMA_VERSION:
            raise SchemaError(f"manifest schema version mismatch: expected {SCHEMA_VERSION}, found {found}")
        d = dict(d)
        d["split_ratios"] = tuple(d.get("split_ratios", (8, 1, 1)))
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise SchemaError(f"unknown manifest fields: {sorted(unknown)}")
        return cls(**d)


# ---------------------------------------------------------------- labelling


def label_methods(methods, kind: SmellKind, thresholds: SmellThresholds = SmellThresholds()) -> tuple[list[Sample], list[Sample]]:
    """Heuristic labels for one smell kind, as (positives, negatives)."""
    pos, neg = [], []
    for m in methods:
        s = Sample(m, label_for(m, kind, thresholds))
        (pos if s.label.positive else neg).append(s)
    return pos, neg


def normalize_source(source: str) -> str:
    """Collapse whitespace runs to one space everywhere except inside literals."""
    parts = []
    for tok in tokenize_java(source, strict=False):
        if tok.kind in (TokenKind.STRING, TokenKind.CHAR):
            parts.append(tok.text)
        else:
            parts.append(" ".join(tok.text.split()))
    return " ".join(parts)


def deduplicate(samples: list[Sample]) -> list[Sample]:
    seen = set()
    out = []
    for s in samples:
        key = normalize_source(s.method.source)
        if key not in seen:
            seen.add(key)
            out.append(s)
    return out


def filter_by_token_limit(samples: list[Sample], max_tokens: int = 1024) -> list[Sample]:
    if max_tokens <= 0:
        raise ValueError("max_tokens must be positive")
    return [s for s in samples if s.method.token_count <= max_tokens]


def assemble_labeled_dataset(
    positives: list[Sample],
    negatives: list[Sample],
    balance: bool = True,
    seed: int = 0,
    kind: SmellKind | None = None,
) -> LabeledDataset:
    """Pair the pools; with ``balance`` the negatives are down-sampled
    uniformly without replacement to the number of positives."""
    if kind is None:
        pool = positives or negatives
        kind = pool[0].label.kind if pool else SmellKind.COMPLEX_METHOD
    if balance:
        if not positives:
            raise ValueError("cannot balance a dataset with zero positives")
        if len(negatives) < len(positives):
            raise ValueError(
                f"cannot down-sample {len(negatives)} negatives to {len(positives)} positives without replacement"
            )
        ordered = sorted(negatives, key=lambda s: s.identity)
        idx = stage_rng(seed, "balance").choice(len(ordered), size=len(positives), replace=False)
        negatives = [ordered[i] for i in sorted(idx)]
    return LabeledDataset(kind, list(positives), list(negatives))


def apply_manual_labels(dataset: LabeledDataset, corrections: dict[str, bool]) -> tuple[LabeledDataset, int]:
    """Merge manual verdicts (identity -> positive?) into the dataset.

    Every corrected sample gets provenance ``manual``; the return value also
    reports how many labels actually flipped.
    """
    flips = 0
    pos, neg = [], []
    for s in dataset.samples:
        if s.identity in corrections:
            verdict = bool(corrections[s.identity])
            flips += verdict != s.label.positive
            s = replace(s, label=SmellLabel(dataset.smell_kind, verdict, Provenance.MANUAL))
        (pos if s.label.positive else neg).append(s)
    return LabeledDataset(dataset.smell_kind, pos, neg), flips


def read_manual_labels(path: str | os.PathLike, kind: SmellKind) -> dict[str, bool]:
    """Sidecar lines ``{"id": ..., "smell_kind": "cc"|"cm", "label": 0|1}``."""
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        if SmellKind.parse(rec.get("smell_kind", kind)) is kind:
            out[rec["id"]] = bool(rec["label"])
    return out


# ---------------------------------------------------------------- splitting


def split_sizes(n: int, ratios=(8, 1, 1), rounding: str = "heldout-half-even") -> list[int]:
    """Integer part sizes for ``n`` items at ``ratios`` (first part = train).

    ``heldout-half-even`` rounds every held-out quota half-to-even and gives
    the remainder to the first part, so 6,945 splits as 5,557/694/694.
    ``largest-remainder`` is the Hamilton method,
    ties going to the earlier part.
    """
    total = sum(ratios)
    if total <= 0 or any(r < 0 for r in ratios):
        raise ValueError(f"invalid ratios {ratios}")
    quotas = [n * r / total for r in ratios]
    if rounding == "heldout-half-even":
        held = [round(q) for q in quotas[1:]]
        return [n - sum(held), *held]
    if rounding == "largest-remainder":
        sizes = [math.floor(q) for q in quotas]
        order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - sizes[i]), i))
        for i in order[: n - sum(sizes)]:
            sizes[i] += 1
        return sizes
    raise ValueError(f"unknown rounding rule {rounding!r}")


def _check_unique(samples: list[Sample]) -> None:
    ids, sources = set(), set()
    for s in samples:
        if s.identity in ids:
            raise ValueError(f"duplicate method identity {s.identity!r}")
        if s.method.source in sources:
            raise ValueError(f"duplicate source text for {s.identity!r}")
        ids.add(s.identity)
        sources.add(s.method.source)


def stratified_split(
    dataset: LabeledDataset,
    ratios=(8, 1, 1),
    seed: int = 0,
    rounding: str = "heldout-half-even",
) -> DatasetSplit:
    """Split positives and negatives independently at ``ratios``.

    Input order does not matter: each class is first sorted by identity,
    then shuffled with the seed.
    """
    if len(ratios) != 3:
        raise ValueError("expected three ratios (train, valid, test)")
    _check_unique(dataset.samples)
    parts: dict[str, list[Sample]] = {name: [] for name in SPLITS}
    for cls_name, pool in (("positive", dataset.positives), ("negative", dataset.negatives)):
        if len(pool) < 3:
            raise ValueError(f"{cls_name} class has {len(pool)} samples; need at least 3 to fill three splits")
        ordered = sorted(pool, key=lambda s: s.identity)
        perm = stage_rng(seed, f"split/{cls_name}").permutation(len(ordered))
        sizes = split_sizes(len(ordered), ratios, rounding)
        if min(sizes) < 1:
            raise ValueError(f"{cls_name} class of {len(pool)} cannot populate every split at {ratios}")
        start = 0
        for name, size in zip(SPLITS, sizes):
            chunk = [ordered[i] for i in perm[start : start + size]]
            parts[name].extend(replace(s, split=name) for s in chunk)
            start += size
    for name in SPLITS:
        parts[name].sort(key=lambda s: (-s.y, s.identity))
    return DatasetSplit(dataset.smell_kind, parts["train"], parts["valid"], parts["test"], seed)


def subsample_low_resource(train: list[Sample], n: int, seed: int = 0) -> list[Sample]:
    """A class-stratified uniform sample of ``n`` training samples.

    Class sizes follow the largest-remainder apportionment of ``n`` to the
    original positive/negative counts.
    """
    if n > len(train):
        raise ValueError(f"cannot draw {n} samples from a training set of {len(train)}")
    if n < 0:
        raise ValueError("n must be non-negative")
    pos = sorted((s for s in train if s.y), key=lambda s: s.identity)
    neg = sorted((s for s in train if not s.y), key=lambda s: s.identity)
    n_pos, n_neg = split_sizes(n, (len(pos), len(neg)), "largest-remainder") if train else (0, 0)
    rng = stage_rng(seed, f"subsample/{n}")
    take_pos = rng.choice(len(pos), size=n_pos, replace=False) if n_pos else []
    take_neg = rng.choice(len(neg), size=n_neg, replace=False) if n_neg else []
    chosen = [pos[i] for i in sorted(take_pos)] + [neg[i] for i in sorted(take_neg)]
    return chosen


# ---------------------------------------------------------------- files


def _record(s: Sample) -> dict:
    m = s.method
    return {
        "id": m.identity,
        "project": m.project,
        "package": ".".join(m.package_path),
        "class": m.class_name,
        "method": m.method_name,
        "source": m.source,
        "token_count": m.token_count,
        "smell_kind": s.label.kind.value,
        "label": s.y,
        "provenance": s.label.provenance.value,
        "split": s.split,
    }


_REQUIRED = ("id", "project", "package", "class", "method", "source", "token_count", "smell_kind", "label", "provenance", "split")


def _sample_from_record(rec: dict, lineno: int, count_logical: bool) -> Sample:
    missing = [k for k in _REQUIRED if k not in rec]
    if missing:
        raise SchemaError(f"record on line {lineno} is missing fields {missing}")
    if rec["label"] not in (0, 1):
        raise SchemaError(f"record on line {lineno} has label {rec['label']!r}, expected 0 or 1")
    if rec["split"] not in SPLITS:
        raise SchemaError(f"record on line {lineno} has split {rec['split']!r}")
    method = MethodUnit.from_source(
        rec["source"],
        project=rec["project"],
        package_path=tuple(p for p in rec["package"].split(".") if p),
        class_name=rec["class"],
        method_name=rec["method"],
        count_logical=count_logical,
    )
    if method.identity != rec["id"]:
        raise SchemaError(f"record on line {lineno}: id {rec['id']!r} does not match its path fields")
    if method.token_count != rec["token_count"]:
        raise SchemaError(
            f"record on line {lineno}: token_count {rec['token_count']} but the source has {method.token_count} tokens"
        )
    label = SmellLabel(SmellKind.parse(rec["smell_kind"]), bool(rec["label"]), Provenance(rec["provenance"]))
    return Sample(method, label, rec["split"])


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def export_dataset(split: DatasetSplit, manifest: PipelineManifest, out_dir: str | os.PathLike) -> dict[str, str]:
    """Write ``dataset.jsonl`` and ``manifest.json``; returns sha256 digests."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest.split_counts = split.counts()
    manifest.seed = split.seed
    lines = [json.dumps(_record(s), ensure_ascii=False) for name in SPLITS for s in split.part(name)]
    data = "".join(line + "\n" for line in lines)
    meta = json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n"
    _atomic_write(out / DATASET_FILE, data)
    _atomic_write(out / MANIFEST_FILE, meta)
    return {
        DATASET_FILE: hashlib.sha256(data.encode()).hexdigest(),
        MANIFEST_FILE: hashlib.sha256(meta.encode()).hexdigest(),
    }


def import_dataset(in_dir: str | os.PathLike) -> tuple[DatasetSplit, PipelineManifest]:
    src = Path(in_dir)
    manifest = PipelineManifest.from_dict(json.loads((src / MANIFEST_FILE).read_text(encoding="utf-8")))
    kind = SmellKind.parse(manifest.smell_kind)
    parts: dict[str, list[Sample]] = {name: [] for name in SPLITS}
    with open(src / DATASET_FILE, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            s = _sample_from_record(json.loads(line), lineno, manifest.count_logical)
            if s.label.kind is not kind:
                raise SchemaError(f"record on line {lineno} has smell kind {s.label.kind.value}, manifest says {kind.value}")
            parts[s.split].append(s)
    split = DatasetSplit(kind, parts["train"], parts["valid"], parts["test"], manifest.seed)
    if manifest.split_counts and split.counts() != manifest.split_counts:
        raise SchemaError(f"manifest split counts {manifest.split_counts} disagree with records {split.counts()}")
    _check_unique(split.train + split.valid + split.test)
    return split, manifest
