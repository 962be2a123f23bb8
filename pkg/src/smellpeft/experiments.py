"""Experiment grids over PEFT methods, model configs, subsample sizes and seeds.

A report is a flat list of rows, one per leg. Legs are independent: each
builds its own model from its own seed, and a leg that raises is recorded
as failed without stopping the others.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import statistics
from dataclasses import asdict, dataclass, field, replace

from smellpeft.dataset import DatasetSplit, subsample_low_resource
from smellpeft.metrics import ZERO_DIVISION_NOTE
from smellpeft.peft import PeftConfig, attach, trainable_parameter_count
from smellpeft.pipeline import BuildConfig, build_dataset
from smellpeft.synthetic import write_corpus
from smellpeft.train import EncodedSet, TrainConfig, encode_samples, evaluate, memory_account, train
from smellpeft.transformer import ModelConfig, init_model
from smellpeft.vocab import Vocabulary

log = logging.getLogger(__name__)

REPORT_COLUMNS = (
    "smell",
    "method",
    "model_config",
    "trainable_params",
    "peak_bytes",
    "precision",
    "recall",
    "f1",
    "mcc",
    "selected_epoch",
    "seed",
    "n",
    "status",
)
LOW_RESOURCE_SIZES = (100, 200, 500, 1000)
DESK_RANKS = (2, 4, 8, 16)


@dataclass(frozen=True)
class ExperimentConfig:
    """Cross product of ``pefts x model_configs x sizes x seeds``.

    ``model_configs`` maps a short label to a ModelConfig. A size of
    ``None`` trains on the full training split.
    """

    pefts: tuple[PeftConfig, ...]
    model_configs: tuple[tuple[str, ModelConfig], ...]
    sizes: tuple[int | None, ...] = (None,)
    seeds: tuple[int, ...] = (0,)
    train: TrainConfig = field(default_factory=TrainConfig)
    max_len: int = 128

    def legs(self):
        return itertools.product(self.pefts, self.model_configs, self.sizes, self.seeds)


@dataclass(frozen=True)
class ReportRow:
    smell: str
    method: str
    model_config: str
    trainable_params: int | None
    peak_bytes: int | None
    precision: float | None
    recall: float | None
    f1: float | None
    mcc: float | None
    selected_epoch: int | None
    seed: int
    n: int | None
    status: str = "ok"
    error: str = ""


@dataclass
class Report:
    rows: list[ReportRow] = field(default_factory=list)
    averaging: str = "macro"

    def ok_rows(self) -> list[ReportRow]:
        return [r for r in self.rows if r.status == "ok"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS + ("error",))
        for r in self.rows:
            d = asdict(r)
            w.writerow([_fmt(d[c]) for c in REPORT_COLUMNS + ("error",)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, averaging: str = "macro") -> "Report":
        rows = []
        for rec in csv.DictReader(io.StringIO(text)):
            rows.append(
                ReportRow(
                    smell=rec["smell"],
                    method=rec["method"],
                    model_config=rec["model_config"],
                    trainable_params=_opt(int, rec["trainable_params"]),
                    peak_bytes=_opt(int, rec["peak_bytes"]),
                    precision=_opt(float, rec["precision"]),
                    recall=_opt(float, rec["recall"]),
                    f1=_opt(float, rec["f1"]),
                    mcc=_opt(float, rec["mcc"]),
                    selected_epoch=_opt(int, rec["selected_epoch"]),
                    seed=int(rec["seed"]),
                    n=_opt(int, rec["n"]),
                    status=rec["status"],
                    error=rec.get("error", ""),
                )
            )
        return cls(rows, averaging)

    def render(self) -> str:
        """Plain-text table with a footer naming the metric conventions."""
        header = ["smell", "method", "model", "n", "seed", "trainable", "peak MiB", "P", "R", "F1", "MCC", "ep", "status"]
        body = []
        for r in self.rows:
            body.append(
                [
                    r.smell,
                    r.method,
                    r.model_config,
                    "all" if r.n is None else str(r.n),
                    str(r.seed),
                    _fmt(r.trainable_params),
                    "" if r.peak_bytes is None else f"{r.peak_bytes / 2**20:.2f}",
                    _pct(r.precision),
                    _pct(r.recall),
                    _pct(r.f1),
                    _pct(r.mcc),
                    _fmt(r.selected_epoch),
                    r.status,
                ]
            )
        widths = [max(len(h), *(len(row[i]) for row in body)) if body else len(h) for i, h in enumerate(header)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
        lines.append("  ".join("-" * w for w in widths))
        lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in body]
        lines.append("")
        lines.append(f"averaging: {self.averaging}; {ZERO_DIVISION_NOTE}")
        return "\n".join(lines) + "\n"

    def median_mcc(self) -> dict[tuple[str, str, int | None], float]:
        """Median test MCC over seeds for every (method, model, n) with at least one successful leg."""
        groups: dict[tuple, list[float]] = {}
        for r in self.ok_rows():
            groups.setdefault((r.method, r.model_config, r.n), []).append(r.mcc)
        return {k: statistics.median(v) for k, v in groups.items()}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _pct(v) -> str:
    return "" if v is None else f"{100 * v:.2f}"


def _opt(conv, text):
    return conv(text) if text != "" else None


def method_label(peft: PeftConfig) -> str:
    if peft.method == "lora":
        return f"lora-r{peft.lora_rank}"
    if peft.method in ("prompt", "prefix"):
        return f"{peft.method}-{peft.n_virtual_tokens}"
    return peft.method


def run_leg(split: DatasetSplit, vocab: Vocabulary, peft: PeftConfig, model_cfg: ModelConfig, n, seed: int, exp: ExperimentConfig) -> dict:
    """Train and test one leg; returns the metric fields of its report row."""
    train_samples = split.train if n is None else subsample_low_resource(split.train, n, seed)
    max_len = min(exp.max_len, model_cfg.max_seq_len - peft.n_virtual_tokens * (peft.method == "prompt"))
    encode = lambda samples: encode_samples(vocab, samples, max_len)  # noqa: E731
    tr, va, te = encode(train_samples), encode(split.valid), encode(split.test)
    model = init_model(replace(model_cfg, seed=seed))
    attach(model, replace(peft, seed=seed), max_input_len=max_len)
    result = train(model, tr, va, replace(exp.train, seed=seed))
    ev = evaluate(result.model, te, exp.train.averaging)
    mem = memory_account(model, exp.train.batch_size, max_len)
    return dict(
        trainable_params=trainable_parameter_count(model),
        peak_bytes=mem.peak_estimate_bytes,
        selected_epoch=result.selected_epoch,
        **ev.metrics.as_dict(),
    )


def run_experiment(split: DatasetSplit, vocab: Vocabulary, exp: ExperimentConfig, progress=None) -> Report:
    """Execute every leg of ``exp`` in a fixed order.

    ``progress``, if given, is called with each finished row.
    """
    report = Report(averaging=exp.train.averaging)
    for peft, (label, cfg), n, seed in exp.legs():
        base = dict(smell=split.smell_kind.short, method=method_label(peft), model_config=label, seed=seed, n=n)
        try:
            row = ReportRow(**base, **run_leg(split, vocab, peft, cfg, n, seed, exp))
        except Exception as exc:  # a failed leg must not stop the grid
            log.warning("leg %s failed: %s", base, exc)
            row = ReportRow(
                **base,
                trainable_params=None,
                peak_bytes=None,
                precision=None,
                recall=None,
                f1=None,
                mcc=None,
                selected_epoch=None,
                status="failed",
                error=f"{type(exc).__name__}: {exc}",
            )
        report.rows.append(row)
        if progress:
            progress(row)
    return report


def rank_grid_pefts(ranks=DESK_RANKS, **lora_kwargs) -> tuple[PeftConfig, ...]:
    return tuple(PeftConfig("lora", lora_rank=r, **lora_kwargs) for r in ranks)


def encode_split(vocab: Vocabulary, split: DatasetSplit, max_len: int) -> tuple[EncodedSet, EncodedSet, EncodedSet]:
    return tuple(encode_samples(vocab, getattr(split, part), max_len) for part in ("train", "valid", "test"))


def synthetic_split(root, n_methods: int, *, kind: str = "cm", seed: int = 0, max_len: int = 128, vocab_size: int = 512):
    """Write a generated corpus under ``root`` and run the dataset pipeline on it.

    Classes are left unbalanced (the generator draws them about evenly).
    Returns the split and a vocabulary built from its training part.
    """
    write_corpus(root, n_methods, seed=seed, kind=kind)
    split, _, _ = build_dataset([root], BuildConfig(smell_kind=kind, seed=seed, balance=False))
    vocab = Vocabulary.build([s.method.source for s in split.train], vocab_size)
    return split, vocab
