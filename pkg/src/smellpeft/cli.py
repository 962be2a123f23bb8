"""Command-line entry point: detect, build-dataset, train, evaluate, sweep, gradcheck.

Every option can also come from a YAML config file (``--config``), either at
the top level or under a section named after the subcommand. Precedence is
flags > file > built-in defaults. Each run writes a RunManifest holding the
fully resolved config; ``--from-manifest`` replays it.

Exit codes: 0 success, 1 I/O or stage failure, 2 partial analysis errors
(or a failed gradient check), 3 config errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from smellpeft import __version__
from smellpeft.dataset import DATASET_FILE, MANIFEST_FILE, SchemaError, export_dataset, import_dataset, split_sizes
from smellpeft.java.detect import SmellThresholds, scan_paths
from smellpeft.metrics import ConfusionMatrix, compute_metrics
from smellpeft.peft import METHODS, PeftConfig, attach, save_adapter, trainable_parameter_count
from smellpeft.pipeline import BuildConfig, build_dataset
from smellpeft.repos import FixtureProvider, GitHubProvider, ProviderError, RepoCriteria, select_repositories
from smellpeft.train import TrainConfig, TrainingError, encode_samples, memory_account, predict_logits, predict_labels, train
from smellpeft.transformer import ModelConfig, ModelError, checkpoint_bytes, grad_check, init_model, load_checkpoint
from smellpeft.vocab import Vocabulary

log = logging.getLogger("smellpeft")

EXIT_OK, EXIT_IO, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2, 3
RUN_MANIFEST = "run_manifest.json"
GRADCHECK_TOLERANCE = 1e-4


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Opt:
    name: str
    type: type
    default: object
    help: str = ""
    choices: tuple | None = None
    many: bool = False  # a list of ``type``
    optional: bool = False  # None allowed


_SEED = Opt("seed", int, 0, "seed for every random stream of the run")
_THRESHOLDS = [
    Opt("cm_threshold", int, 8, "complex method when cyclomatic complexity exceeds this"),
    Opt("cc_threshold", int, 3, "complex conditional at this many logical operators in one condition"),
    Opt("count_logical", bool, True, "count && and || as decision points"),
]
_MODEL = [
    Opt("vocab_size", int, 512),
    Opt("d_model", int, 32),
    Opt("n_heads", int, 4),
    Opt("n_layers", int, 2),
    Opt("d_ff", int, 64),
    Opt("attention", str, "bidirectional", choices=("bidirectional", "causal")),
    Opt("activation", str, "gelu", choices=("gelu", "relu")),
]
_PEFT = [
    Opt("peft", str, "lora", "fine-tuning method", choices=METHODS),
    Opt("rank", int, 8, "LoRA rank"),
    Opt("alpha", float, 16.0, "LoRA alpha"),
    Opt("lora_dropout", float, 0.1),
    Opt("lora_targets", str, ["q", "k", "v"], many=True),
    Opt("n_virtual", int, 10, "virtual tokens for prompt/prefix tuning"),
    Opt("mlp_hidden", int, 0, "prefix MLP width (0: d_model)"),
]
_TRAIN = [
    Opt("epochs", int, 10),
    Opt("batch_size", int, 8),
    Opt("lr", float, None, "learning rate (default 3e-4 for PEFT, 1e-5 for full)", optional=True),
    Opt("weight_decay", float, 0.01),
    Opt("max_len", int, 128, "input tokens kept per method"),
    Opt("averaging", str, "macro", choices=("macro", "positive_class")),
]

OPTIONS: dict[str, list[Opt]] = {
    "detect": [
        Opt("paths", str, [], "Java files or directories", many=True),
        Opt("out", str, None, "report path (JSONL); stdout when absent", optional=True),
        Opt("project", str, None, "project name for every method", optional=True),
        *_THRESHOLDS,
        _SEED,
    ],
    "build-dataset": [
        Opt("source", str, [], "local corpus directories", many=True),
        Opt("out", str, None, "output directory", optional=True),
        Opt("smell", str, "cc", choices=("cc", "cm")),
        Opt("max_tokens", int, 1024),
        Opt("balance", bool, True, "down-sample negatives to the positive count"),
        Opt("ratios", int, [8, 1, 1], many=True),
        Opt("rounding", str, "heldout-half-even", choices=("heldout-half-even", "largest-remainder")),
        Opt("manual_labels", str, None, "CSV of identity,label corrections", optional=True),
        Opt("repos", str, None, "repository metadata JSONL; keeps only matching projects", optional=True),
        Opt("live", bool, False, "select repositories through the GitHub search API (needs GITHUB_TOKEN)"),
        Opt("expectations", str, None, "YAML/JSON list of split-count expectations to verify first", optional=True),
        Opt("created_after", str, "2020-01-01"),
        Opt("created_before", str, "2024-04-30"),
        Opt("min_stars", int, 1000),
        Opt("min_loc", int, 1000),
        Opt("exclude_forks", bool, True),
        *_THRESHOLDS,
        _SEED,
    ],
    "train": [
        Opt("data", str, None, "dataset directory", optional=True),
        Opt("out", str, None, "output directory", optional=True),
        *_PEFT,
        *_TRAIN,
        *_MODEL,
        _SEED,
    ],
    "evaluate": [
        Opt("model", str, None, "directory written by train", optional=True),
        Opt("data", str, None, "dataset directory", optional=True),
        Opt("split", str, "test", choices=("train", "valid", "test")),
        Opt("out", str, None, "metrics CSV path; stdout when absent", optional=True),
        Opt("averaging", str, "macro", choices=("macro", "positive_class")),
        Opt("zero_division", float, 0.0),
        _SEED,
    ],
    "sweep": [
        Opt("data", str, None, "dataset directory", optional=True),
        Opt("synthetic", int, 0, "generate a corpus of this many methods instead of --data"),
        Opt("smell", str, "cm", "smell of the generated corpus", choices=("cc", "cm")),
        Opt("out", str, None, "output directory", optional=True),
        Opt("grid", str, "rq3", choices=("rq2", "rq3", "methods")),
        Opt("methods", str, ["lora"], many=True),
        Opt("ranks", int, [2, 4, 8, 16], many=True),
        Opt("sizes", int, [100, 200, 500, 1000], many=True),
        Opt("seeds", int, [0, 1, 2], many=True),
        *[o for o in _PEFT if o.name not in ("peft", "rank")],
        *_TRAIN,
        *_MODEL,
        _SEED,
    ],
    "gradcheck": [
        Opt("methods", str, list(METHODS), many=True),
        Opt("vocab_size", int, 64),
        Opt("d_model", int, 16),
        Opt("n_heads", int, 4),
        Opt("n_layers", int, 2),
        Opt("d_ff", int, 32),
        Opt("seq_len", int, 12),
        Opt("batch_size", int, 3),
        Opt("attention", str, "bidirectional", choices=("bidirectional", "causal")),
        Opt("epsilon", float, 1e-5),
        Opt("n_coords", int, 32, "coordinates probed per tensor"),
        Opt("tolerance", float, GRADCHECK_TOLERANCE),
        Opt("out", str, None, "report path; stdout when absent", optional=True),
        _SEED,
    ],
}
SUBCOMMANDS = tuple(OPTIONS)


# ---------------------------------------------------------------- config


def _coerce(opt: Opt, value, where: str):
    if value is None:
        if opt.optional:
            return None
        raise ConfigError(f"{where}: null is not allowed")
    if opt.many:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list")
        return [_coerce(Opt(opt.name, opt.type, None, choices=opt.choices), v, f"{where}[{i}]") for i, v in enumerate(value)]
    ok = {
        bool: isinstance(value, bool),
        int: isinstance(value, int) and not isinstance(value, bool),
        float: isinstance(value, (int, float)) and not isinstance(value, bool),
        str: isinstance(value, str),
    }[opt.type]
    if not ok:
        raise ConfigError(f"{where}: expected {opt.type.__name__}, got {type(value).__name__} {value!r}")
    value = opt.type(value)
    if opt.choices and value not in opt.choices:
        raise ConfigError(f"{where}: {value!r} is not one of {list(opt.choices)}")
    return value


def load_config_file(path) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def resolve_config(command: str, file_data: dict | None, flags: dict) -> dict:
    """Defaults, overlaid by the config file, overlaid by explicit flags."""
    opts = {o.name: o for o in OPTIONS[command]}
    all_names = {o.name for os_ in OPTIONS.values() for o in os_}
    cfg = {name: o.default for name, o in opts.items()}
    file_data = file_data or {}
    for key, value in file_data.items():
        key_n = str(key).replace("-", "_")
        if key in SUBCOMMANDS:
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: section must be a mapping")
            continue
        if key_n not in all_names:
            raise ConfigError(f"{key}: unknown option")
        if key_n in opts:
            cfg[key_n] = _coerce(opts[key_n], value, key)
    section = file_data.get(command) or {}
    for key, value in section.items():
        key_n = str(key).replace("-", "_")
        if key_n not in opts:
            raise ConfigError(f"{command}.{key}: unknown option")
        cfg[key_n] = _coerce(opts[key_n], value, f"{command}.{key}")
    for key, value in flags.items():
        cfg[key] = _coerce(opts[key], value, f"--{key.replace('_', '-')}")
    return cfg


# ---------------------------------------------------------------- manifests and files


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def digest_path(path) -> str:
    """sha256 of a file, or of the sorted (relative path, file digest) list of a directory."""
    p = Path(path)
    if p.is_file():
        return sha256_file(p)
    if not p.is_dir():
        raise FileNotFoundError(f"no such file or directory: {p}")
    h = hashlib.sha256()
    for f in sorted(q for q in p.rglob("*") if q.is_file()):
        h.update(f.relative_to(p).as_posix().encode() + b"\0" + sha256_file(f).encode() + b"\n")
    return h.hexdigest()


def run_manifest(command: str, cfg: dict, inputs) -> dict:
    config = {k: v for k, v in cfg.items() if k != "out"}
    return {
        "subcommand": command,
        "config": config,
        "seed": cfg["seed"],
        "input_digests": {str(p): digest_path(p) for p in inputs},
        "tool_version": __version__,
    }


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def atomic_write(path, data: str | bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data.encode() if isinstance(data, str) else data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


class OutputDir:
    """Stage files in a hidden temp directory and move them into ``path`` on success.

    On error nothing from this run is left behind.
    """

    def __init__(self, path):
        self.path = Path(path)

    def __enter__(self) -> Path:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(dir=self.path.parent, prefix=f".{self.path.name}.partial-"))
        return self.tmp

    def __exit__(self, exc_type, exc, tb):
        try:
            if exc_type is None:
                self.path.mkdir(parents=True, exist_ok=True)
                for f in sorted(self.tmp.iterdir()):
                    os.replace(f, self.path / f.name)
        finally:
            shutil.rmtree(self.tmp, ignore_errors=True)
        return False


def _check_inputs(manifest: dict) -> None:
    for path, digest in manifest.get("input_digests", {}).items():
        now = digest_path(path)
        if now != digest:
            log.warning("input %s changed since the manifest was written; outputs may differ", path)


def _require(cfg: dict, *names) -> None:
    for n in names:
        if cfg.get(n) in (None, []):
            raise ConfigError(f"--{n.replace('_', '-')} is required")


def _emit(text: str, out) -> None:
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _side_manifest(out: str | None, manifest: dict) -> None:
    if out:
        atomic_write(f"{out}.run.json", _dumps(manifest))


def _thresholds(cfg) -> SmellThresholds:
    try:
        return SmellThresholds(cfg["cm_threshold"], cfg["cc_threshold"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _model_config(cfg, max_seq_len: int) -> ModelConfig:
    return ModelConfig(
        vocab_size=cfg["vocab_size"],
        d_model=cfg["d_model"],
        n_heads=cfg["n_heads"],
        n_layers=cfg["n_layers"],
        d_ff=cfg["d_ff"],
        max_seq_len=max_seq_len,
        attention_mode=cfg["attention"],
        activation=cfg["activation"],
        seed=cfg["seed"],
    )


def _peft_config(cfg, method: str, rank: int | None = None) -> PeftConfig:
    return PeftConfig(
        method,
        n_virtual_tokens=cfg["n_virtual"] if method in ("prompt", "prefix") else 0,
        mlp_hidden=cfg["mlp_hidden"] if method == "prefix" else 0,
        lora_rank=rank if rank is not None else cfg.get("rank", 8),
        lora_alpha=cfg["alpha"],
        lora_dropout=cfg["lora_dropout"],
        lora_targets=tuple(cfg["lora_targets"]),
        seed=cfg["seed"],
    )


def _train_config(cfg) -> TrainConfig:
    return TrainConfig(
        learning_rate=cfg["lr"],
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        seed=cfg["seed"],
        weight_decay=cfg["weight_decay"],
        averaging=cfg["averaging"],
    )


def _seq_len(cfg, method: str) -> int:
    return cfg["max_len"] + (cfg["n_virtual"] if method == "prompt" else 0)


# ---------------------------------------------------------------- subcommands


def cmd_detect(cfg: dict) -> int:
    _require(cfg, "paths")
    thresholds = _thresholds(cfg)
    records, _, errors = scan_paths(cfg["paths"], thresholds, cfg["project"], count_logical=cfg["count_logical"])
    text = "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in records)
    _emit(text, cfg["out"])
    _side_manifest(cfg["out"], run_manifest("detect", cfg, cfg["paths"]))
    for path, msg in errors:
        print(f"error: {path}: {msg}", file=sys.stderr)
    return EXIT_PARTIAL if errors else EXIT_OK


def check_split_expectations(path, ratios, rounding) -> list[str]:
    """Compare ``split_sizes`` against stored class totals and part sizes.

    The file holds a list of ``{total: n, expected: [train, valid, test]}``.
    Returns one message per mismatch.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        entries = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise ConfigError(f"{path}: expected a list of {{total, expected}} entries")
    problems = []
    for i, e in enumerate(entries):
        if not isinstance(e, dict) or "total" not in e or "expected" not in e:
            raise ConfigError(f"{path}[{i}]: needs 'total' and 'expected'")
        got = split_sizes(int(e["total"]), ratios, rounding)
        if got != [int(x) for x in e["expected"]]:
            problems.append(f"{e['total']}: expected {e['expected']}, splitter gives {got}")
    return problems


def _project_filter(cfg) -> set[str] | None:
    if not cfg["repos"] and not cfg["live"]:
        return None
    criteria = _criteria(cfg)
    if cfg["live"]:
        if not os.environ.get("GITHUB_TOKEN"):
            raise ConfigError("--live needs the GITHUB_TOKEN environment variable")
        provider = GitHubProvider()
    else:
        provider = FixtureProvider(cfg["repos"])
    selected = select_repositories(criteria, provider)
    names = set()
    for r in selected:
        names.add(r.full_name.replace("/", "__"))
        names.add(r.full_name.rsplit("/", 1)[-1])
    return names


def _criteria(cfg) -> RepoCriteria:
    try:
        return RepoCriteria.from_dict(
            {
                "created_after": cfg["created_after"],
                "created_before": cfg["created_before"],
                "min_stars": cfg["min_stars"],
                "min_loc": cfg["min_loc"],
                "exclude_forks": cfg["exclude_forks"],
            }
        )
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"repository criteria: {exc}") from exc


def cmd_build_dataset(cfg: dict) -> int:
    _require(cfg, "source", "out")
    if len(cfg["ratios"]) != 3:
        raise ConfigError("--ratios needs three values")
    if cfg["expectations"]:
        problems = check_split_expectations(cfg["expectations"], tuple(cfg["ratios"]), cfg["rounding"])
        if problems:
            raise ConfigError("split rounding does not meet expectations: " + "; ".join(problems))
    keep = _project_filter(cfg)
    config = BuildConfig(
        smell_kind=cfg["smell"],
        thresholds=_thresholds(cfg),
        count_logical=cfg["count_logical"],
        max_tokens=cfg["max_tokens"],
        balance=cfg["balance"],
        ratios=tuple(cfg["ratios"]),
        rounding=cfg["rounding"],
        seed=cfg["seed"],
        manual_labels=cfg["manual_labels"],
        criteria=_criteria(cfg) if keep is not None else None,
        projects=frozenset(keep) if keep is not None else None,
    )
    inputs = list(cfg["source"]) + [p for p in (cfg["manual_labels"], cfg["repos"]) if p]
    with OutputDir(cfg["out"]) as tmp:
        split, manifest, errors = build_dataset(cfg["source"], config)
        export_dataset(split, manifest, tmp)
        atomic_write(tmp / RUN_MANIFEST, _dumps(run_manifest("build-dataset", cfg, inputs)))
    for path, msg in errors:
        print(f"error: {path}: {msg}", file=sys.stderr)
    return EXIT_PARTIAL if errors else EXIT_OK


def _dataset_inputs(data) -> list[str]:
    return [str(Path(data) / DATASET_FILE), str(Path(data) / MANIFEST_FILE)]


def cmd_train(cfg: dict) -> int:
    _require(cfg, "data", "out")
    split, _ = import_dataset(cfg["data"])
    method = cfg["peft"]
    vocab = Vocabulary.build([s.method.source for s in split.train], cfg["vocab_size"])
    model_cfg = _model_config(cfg, _seq_len(cfg, method))
    peft = _peft_config(cfg, method)
    model = init_model(model_cfg)
    attach(model, peft, max_input_len=cfg["max_len"])
    tr = encode_samples(vocab, split.train, cfg["max_len"])
    va = encode_samples(vocab, split.valid, cfg["max_len"])
    result = train(model, tr, va, _train_config(cfg))
    mem = memory_account(model, cfg["batch_size"], cfg["max_len"])
    epochs = "".join(
        json.dumps(
            {"epoch": r.epoch, "train_loss": r.train_loss, "valid_loss": r.valid_loss, **{f"valid_{k}": v for k, v in r.valid_metrics.as_dict().items()}},
            sort_keys=True,
        )
        + "\n"
        for r in result.records
    )
    summary = {
        "selected_epoch": result.selected_epoch,
        "trainable_params": trainable_parameter_count(model),
        "total_params": model.num_parameters(),
        "memory": {**vars(mem), "peak_estimate_bytes": mem.peak_estimate_bytes},
        "smell": split.smell_kind.short,
    }
    with OutputDir(cfg["out"]) as tmp:
        atomic_write(tmp / "checkpoint.bin", checkpoint_bytes(result.model))
        if method != "full":
            save_adapter(result.model, tmp / "adapter.bin")
        atomic_write(tmp / "vocab.json", vocab.to_json() + "\n")
        atomic_write(tmp / "epochs.jsonl", epochs)
        atomic_write(tmp / "summary.json", _dumps(summary))
        atomic_write(tmp / RUN_MANIFEST, _dumps(run_manifest("train", cfg, _dataset_inputs(cfg["data"]))))
    return EXIT_OK


def cmd_evaluate(cfg: dict) -> int:
    from smellpeft.experiments import Report, ReportRow

    _require(cfg, "model", "data")
    mdir = Path(cfg["model"])
    model = load_checkpoint(mdir / "checkpoint.bin")
    vocab = Vocabulary.from_json((mdir / "vocab.json").read_text(encoding="utf-8"))
    train_cfg = json.loads((mdir / RUN_MANIFEST).read_text(encoding="utf-8"))["config"]
    summary = json.loads((mdir / "summary.json").read_text(encoding="utf-8"))
    split, _ = import_dataset(cfg["data"])
    data = encode_samples(vocab, split.part(cfg["split"]), train_cfg["max_len"])
    cm = ConfusionMatrix.from_predictions(predict_labels(predict_logits(model, data)), data.labels)
    metrics = compute_metrics(cm, cfg["averaging"], cfg["zero_division"])
    method = model.peft.method if model.peft else "full"
    row = ReportRow(
        smell=split.smell_kind.short,
        method=method,
        model_config=f"d{model.config.d_model}-L{model.config.n_layers}-h{model.config.n_heads}",
        trainable_params=summary["trainable_params"],
        peak_bytes=summary["memory"]["peak_estimate_bytes"],
        selected_epoch=summary["selected_epoch"],
        seed=train_cfg["seed"],
        n=len(split.train),
        **metrics.as_dict(),
    )
    _emit(Report([row], cfg["averaging"]).to_csv(), cfg["out"])
    inputs = [str(mdir / "checkpoint.bin"), *_dataset_inputs(cfg["data"])]
    _side_manifest(cfg["out"], run_manifest("evaluate", cfg, inputs))
    return EXIT_OK


def cmd_sweep(cfg: dict) -> int:
    from smellpeft.experiments import ExperimentConfig, rank_grid_pefts, run_experiment, synthetic_split

    _require(cfg, "out")
    for m in cfg["methods"]:
        if m not in METHODS:
            raise ConfigError(f"--methods: unknown method {m!r}")
    with tempfile.TemporaryDirectory() as corpus:
        if cfg["data"]:
            split, _ = import_dataset(cfg["data"])
            vocab = Vocabulary.build([s.method.source for s in split.train], cfg["vocab_size"])
            inputs = _dataset_inputs(cfg["data"])
        elif cfg["synthetic"] > 0:
            split, vocab = synthetic_split(corpus, cfg["synthetic"], kind=cfg["smell"], seed=cfg["seed"], vocab_size=cfg["vocab_size"])
            inputs = []
        else:
            raise ConfigError("either --data or --synthetic is required")
    lora_kwargs = dict(lora_alpha=cfg["alpha"], lora_dropout=cfg["lora_dropout"], lora_targets=tuple(cfg["lora_targets"]))
    if cfg["grid"] == "rq2":
        pefts, sizes = rank_grid_pefts(cfg["ranks"], **lora_kwargs), (None,)
    else:
        pefts = tuple(_peft_config(cfg, m) for m in cfg["methods"])
        sizes = tuple(cfg["sizes"]) if cfg["grid"] == "rq3" else (None,)
    needs_prompt = any(p.method == "prompt" for p in pefts)
    model_cfg = _model_config(cfg, cfg["max_len"] + (cfg["n_virtual"] if needs_prompt else 0))
    label = f"d{cfg['d_model']}-L{cfg['n_layers']}-h{cfg['n_heads']}"
    exp = ExperimentConfig(pefts, ((label, model_cfg),), sizes, tuple(cfg["seeds"]), _train_config(cfg), cfg["max_len"])
    report = run_experiment(split, vocab, exp, progress=lambda r: log.info("%s n=%s seed=%s mcc=%s %s", r.method, r.n, r.seed, r.mcc, r.status))
    with OutputDir(cfg["out"]) as tmp:
        atomic_write(tmp / "report.csv", report.to_csv())
        atomic_write(tmp / "report.txt", report.render())
        atomic_write(tmp / RUN_MANIFEST, _dumps(run_manifest("sweep", cfg, inputs)))
    return EXIT_OK


def gradcheck_report(cfg: dict) -> tuple[list[tuple[str, str, float]], bool]:
    """Rows of (method, tensor, max relative error) and whether all pass."""
    rows, ok = [], True
    for method in cfg["methods"]:
        if method not in METHODS:
            raise ConfigError(f"--methods: unknown method {method!r}")
        n_virtual = 3 if method in ("prompt", "prefix") else 0
        mc = ModelConfig(
            vocab_size=cfg["vocab_size"],
            d_model=cfg["d_model"],
            n_heads=cfg["n_heads"],
            n_layers=cfg["n_layers"],
            d_ff=cfg["d_ff"],
            max_seq_len=cfg["seq_len"] + n_virtual,
            attention_mode=cfg["attention"],
            seed=cfg["seed"],
        )
        model = init_model(mc)
        attach(model, PeftConfig(method, n_virtual_tokens=n_virtual, lora_rank=min(4, mc.d_model), seed=cfg["seed"]), max_input_len=cfg["seq_len"])
        rng = np.random.default_rng(cfg["seed"])
        # Perturb zero-initialised adapters so their gradients are not trivially symmetric.
        for p in model.params.values():
            if p.trainable and p.role == "adapter":
                p.value += rng.normal(0.0, 0.1, p.value.shape)
        ids = rng.integers(3, mc.vocab_size, size=(cfg["batch_size"], cfg["seq_len"]))
        ids[0, cfg["seq_len"] // 2 :] = 0  # one padded row
        labels = rng.integers(0, 2, size=cfg["batch_size"])
        for e in grad_check(model, ids, labels, epsilon=cfg["epsilon"], n_coords=cfg["n_coords"], seed=cfg["seed"]):
            if e.skipped:
                continue
            rows.append((method, e.name, e.max_rel_error))
            ok &= e.max_rel_error <= cfg["tolerance"]
    return rows, ok


def cmd_gradcheck(cfg: dict) -> int:
    rows, ok = gradcheck_report(cfg)
    width = max((len(n) for _, n, _ in rows), default=6)
    lines = [f"{m:<7} {n:<{width}} {err:.3e} {'ok' if err <= cfg['tolerance'] else 'FAIL'}" for m, n, err in rows]
    worst = max((err for *_, err in rows), default=0.0)
    lines.append(f"max relative error {worst:.3e} (tolerance {cfg['tolerance']:.0e}): {'PASS' if ok else 'FAIL'}")
    _emit("\n".join(lines) + "\n", cfg["out"])
    _side_manifest(cfg["out"], run_manifest("gradcheck", cfg, []))
    return EXIT_OK if ok else EXIT_PARTIAL


COMMANDS = {
    "detect": cmd_detect,
    "build-dataset": cmd_build_dataset,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "gradcheck": cmd_gradcheck,
}


# ---------------------------------------------------------------- argument parsing


def _add_option(parser: argparse.ArgumentParser, opt: Opt) -> None:
    flag = "--" + opt.name.replace("_", "-")
    if opt.name in ("paths", "source"):
        parser.add_argument(opt.name, nargs="*", default=argparse.SUPPRESS, help=opt.help)
        return
    kw = dict(dest=opt.name, default=argparse.SUPPRESS, help=opt.help or None)
    if opt.type is bool:
        parser.add_argument(flag, action=argparse.BooleanOptionalAction, **kw)
    elif opt.many:
        parser.add_argument(flag, nargs="+", type=opt.type, **kw)
    else:
        parser.add_argument(flag, type=opt.type, choices=opt.choices, **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smellpeft", description="Code smell detection with PEFT-adapted transformers.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, opts in OPTIONS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--from-manifest", help="replay the config of a previous run")
        p.add_argument("-v", "--verbose", action="store_true")
        for opt in opts:
            _add_option(p, opt)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    config_path, manifest_path = args.pop("config"), args.pop("from_manifest")
    logging.basicConfig(level=logging.INFO if args.pop("verbose") else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        file_data = load_config_file(config_path) if config_path else {}
        if manifest_path:
            manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
            if manifest.get("subcommand") != command:
                raise ConfigError(f"manifest is for {manifest.get('subcommand')!r}, not {command!r}")
            _check_inputs(manifest)
            file_data = {command: manifest["config"]}
        cfg = resolve_config(command, file_data, args)
        return COMMANDS[command](cfg)
    except (ConfigError, ModelError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, SchemaError, ProviderError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (TrainingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
