"""End-to-end dataset construction from a local Java corpus."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from smellpeft.dataset import (
    DatasetSplit,
    PipelineManifest,
    apply_manual_labels,
    assemble_labeled_dataset,
    deduplicate,
    filter_by_token_limit,
    label_methods,
    read_manual_labels,
    stratified_split,
)
from smellpeft.java.detect import SmellKind, SmellThresholds, scan_paths
from smellpeft.repos import RepoCriteria

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BuildConfig:
    smell_kind: str = "cc"
    thresholds: SmellThresholds = field(default_factory=SmellThresholds)
    count_logical: bool = True
    max_tokens: int = 1024
    balance: bool = True
    ratios: tuple[int, int, int] = (8, 1, 1)
    rounding: str = "heldout-half-even"
    seed: int = 0
    manual_labels: str | None = None
    criteria: RepoCriteria | None = None
    projects: frozenset[str] | None = None  # keep only these project directories


def build_dataset(paths, config: BuildConfig = BuildConfig()) -> tuple[DatasetSplit, PipelineManifest, list]:
    """detect -> split methods -> label -> dedup -> token filter -> balance
    -> (manual corrections) -> stratified split.

    Returns the split, its manifest and the list of per-file analysis errors.
    """
    kind = SmellKind.parse(config.smell_kind)
    _, methods, errors = scan_paths(paths, config.thresholds, count_logical=config.count_logical)
    for path, msg in errors:
        log.warning("skipped %s: %s", path, msg)
    if config.projects is not None:
        methods = [m for m in methods if m.project in config.projects]
        if not methods:
            raise ValueError("no method belongs to a selected repository")
    pos, neg = label_methods(methods, kind, config.thresholds)
    stages = {"positive": {"initial": len(pos)}, "negative": {"initial": len(neg)}}
    pos, neg = deduplicate(pos), deduplicate(neg)
    stages["positive"]["deduplicated"] = len(pos)
    stages["negative"]["deduplicated"] = len(neg)
    pos = filter_by_token_limit(pos, config.max_tokens)
    neg = filter_by_token_limit(neg, config.max_tokens)
    stages["positive"]["token_filtered"] = len(pos)
    stages["negative"]["token_filtered"] = len(neg)

    dataset = assemble_labeled_dataset(pos, neg, config.balance, config.seed, kind)
    flips = 0
    if config.manual_labels:
        dataset, flips = apply_manual_labels(dataset, read_manual_labels(config.manual_labels, kind))
    split = stratified_split(dataset, config.ratios, config.seed, config.rounding)
    manifest = PipelineManifest(
        smell_kind=kind.value,
        criteria=config.criteria.to_dict() if config.criteria else None,
        thresholds=vars(config.thresholds).copy(),
        count_logical=config.count_logical,
        max_tokens=config.max_tokens,
        seed=config.seed,
        balance=config.balance,
        split_ratios=tuple(config.ratios),
        split_rounding=config.rounding,
        stage_counts=stages,
        manual_flips=flips,
        split_counts=split.counts(),
    )
    return split, manifest, errors
