"""Parameter-efficient fine-tuning attachments.

Each ``attach_*`` function freezes every base tensor of the model, adds the
method's adapter tensors and leaves the classification head trainable (the
head is new for the task and cannot stay at its random initialisation).
Only one attachment per model is supported.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from smellpeft.transformer import (
    ModelError,
    TransformerClassifier,
    _decode,
    _encode,
    base_digest,
    truncated_normal,
)

METHODS = ("full", "prompt", "prefix", "lora", "ia3")
LORA_TARGETS = ("q", "k", "v")
# LoRA rank grids: the two presets differ only in the smallest rank.
RANK_GRID_SMALL_FIRST = (8, 32, 64, 640, 1280, 2560)
RANK_GRID_LARGE_FIRST = (16, 32, 64, 640, 1280, 2560)


@dataclass(frozen=True)
class PeftConfig:
    method: str = "full"
    n_virtual_tokens: int = 0
    mlp_hidden: int = 0
    lora_rank: int = 8
    lora_alpha: float = 16.0
    lora_dropout: float = 0.1
    lora_targets: tuple[str, ...] = LORA_TARGETS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lora_targets", tuple(self.lora_targets))
        if self.method not in METHODS:
            raise ModelError(f"unknown PEFT method {self.method!r}")
        if self.method == "lora":
            if self.lora_rank < 1:
                raise ModelError("LoRA rank must be at least 1")
            if not self.lora_targets or set(self.lora_targets) - set(LORA_TARGETS):
                raise ModelError(f"LoRA targets must be a non-empty subset of {LORA_TARGETS}")
        if self.method in ("prompt", "prefix") and self.n_virtual_tokens < 1:
            raise ModelError("prompt and prefix tuning need at least one virtual token")
        if not 0.0 <= self.lora_dropout < 1.0:
            raise ModelError("LoRA dropout must lie in [0, 1)")


def _freeze_base(model: TransformerClassifier, peft: PeftConfig) -> None:
    if model.peft is not None and model.peft.method != "full":
        raise ModelError(f"model already carries a {model.peft.method} attachment")
    for p in model.params.values():
        p.trainable = p.role == "head"
        p.grad.fill(0.0)
    model.peft = peft


def attach_full(model: TransformerClassifier) -> TransformerClassifier:
    """Full fine-tuning: every tensor trainable."""
    for p in model.params.values():
        p.trainable = True
    model.peft = PeftConfig("full")
    return model


def attach_prompt_tuning(
    model: TransformerClassifier, n_virtual: int, *, max_input_len: int | None = None, seed: int = 0
) -> TransformerClassifier:
    """Prepend ``n_virtual`` trainable vectors to the input embeddings.

    The vectors start as copies of randomly chosen token embeddings.
    """
    cfg = model.config
    if n_virtual < 1:
        raise ModelError("n_virtual must be at least 1")
    room = cfg.max_seq_len - (max_input_len if max_input_len is not None else 1)
    if n_virtual > room:
        raise ModelError(f"{n_virtual} virtual tokens do not fit into max_seq_len={cfg.max_seq_len}")
    peft = PeftConfig("prompt", n_virtual_tokens=n_virtual, seed=seed)
    _freeze_base(model, peft)
    rng = np.random.default_rng(seed)
    rows = rng.choice(np.arange(1, cfg.vocab_size), size=n_virtual, replace=n_virtual >= cfg.vocab_size)
    model.add("prompt.embeddings", model["embed.tokens"][rows].copy(), role="adapter")
    return model


def attach_prefix_tuning(
    model: TransformerClassifier, n_virtual: int, mlp_hidden: int | None = None, *, seed: int = 0
) -> TransformerClassifier:
    """Trainable per-layer key/value prefixes generated by a two-layer tanh MLP."""
    cfg = model.config
    hidden = mlp_hidden or cfg.d_model
    peft = PeftConfig("prefix", n_virtual_tokens=n_virtual, mlp_hidden=hidden, seed=seed)
    _freeze_base(model, peft)
    rng = np.random.default_rng(seed)
    d, out = cfg.d_model, 2 * cfg.n_layers * cfg.d_model
    model.add("prefix.seed", truncated_normal(rng, (n_virtual, d), 1.0), role="adapter")
    model.add("prefix.mlp.W1", truncated_normal(rng, (d, hidden), 1.0 / np.sqrt(d)), role="adapter")
    model.add("prefix.mlp.b1", np.zeros(hidden), role="adapter")
    model.add("prefix.mlp.W2", truncated_normal(rng, (hidden, out), cfg.init_std), role="adapter")
    model.add("prefix.mlp.b2", np.zeros(out), role="adapter")
    return model


def attach_lora(
    model: TransformerClassifier,
    r: int,
    alpha: float = 16.0,
    dropout: float = 0.1,
    targets=LORA_TARGETS,
    *,
    seed: int = 0,
) -> TransformerClassifier:
    """Low-rank updates ``W0 x + (alpha / r) B A dropout(x)`` on the targets.

    ``A`` starts small and random, ``B`` at zero, so the attached model
    initially computes exactly what the frozen base computes.
    """
    cfg = model.config
    peft = PeftConfig("lora", lora_rank=r, lora_alpha=alpha, lora_dropout=dropout, lora_targets=tuple(targets), seed=seed)
    if r > cfg.d_model:
        raise ModelError(f"LoRA rank {r} exceeds the projection dimensions {cfg.d_model}x{cfg.d_model}")
    _freeze_base(model, peft)
    rng = np.random.default_rng(seed)
    for layer in range(cfg.n_layers):
        for proj in peft.lora_targets:
            pre = f"layers.{layer}.attn.lora_{proj}"
            bound = 1.0 / np.sqrt(cfg.d_model)
            model.add(f"{pre}.A", rng.uniform(-bound, bound, (r, cfg.d_model)), role="adapter")
            model.add(f"{pre}.B", np.zeros((cfg.d_model, r)), role="adapter")
    return model


def attach_ia3(model: TransformerClassifier) -> TransformerClassifier:
    """Learned rescaling of keys, values and FFN inner activations, all ones at start."""
    cfg = model.config
    _freeze_base(model, PeftConfig("ia3"))
    for layer in range(cfg.n_layers):
        model.add(f"layers.{layer}.attn.ia3.l_k", np.ones(cfg.d_model), role="adapter")
        model.add(f"layers.{layer}.attn.ia3.l_v", np.ones(cfg.d_model), role="adapter")
        model.add(f"layers.{layer}.ffn.ia3.l_ff", np.ones(cfg.d_ff), role="adapter")
    return model


def attach(model: TransformerClassifier, peft: PeftConfig, *, max_input_len: int | None = None) -> TransformerClassifier:
    """Apply the attachment described by ``peft``."""
    if peft.method == "full":
        return attach_full(model)
    if peft.method == "prompt":
        return attach_prompt_tuning(model, peft.n_virtual_tokens, max_input_len=max_input_len, seed=peft.seed)
    if peft.method == "prefix":
        return attach_prefix_tuning(model, peft.n_virtual_tokens, peft.mlp_hidden or None, seed=peft.seed)
    if peft.method == "lora":
        return attach_lora(model, peft.lora_rank, peft.lora_alpha, peft.lora_dropout, peft.lora_targets, seed=peft.seed)
    return attach_ia3(model)


# ---------------------------------------------------------------- accounting


def trainable_parameter_count(model: TransformerClassifier) -> int:
    return model.num_parameters(trainable_only=True)


def head_parameter_count(config) -> int:
    return config.d_model * config.n_classes + config.n_classes


def expected_trainable_count(config, peft: PeftConfig, total_base: int | None = None) -> int:
    """Closed-form trainable size of a method, head included."""
    d, n_layers, head = config.d_model, config.n_layers, head_parameter_count(config)
    if peft.method == "full":
        if total_base is None:
            raise ValueError("full fine-tuning needs the base parameter total")
        return total_base
    if peft.method == "prompt":
        return peft.n_virtual_tokens * d + head
    if peft.method == "prefix":
        h = peft.mlp_hidden or d
        out = 2 * n_layers * d
        return peft.n_virtual_tokens * d + (d * h + h) + (h * out + out) + head
    if peft.method == "lora":
        return n_layers * len(peft.lora_targets) * 2 * peft.lora_rank * d + head
    return n_layers * (2 * d + config.d_ff) + head


def base_parameter_count(config) -> int:
    d, f, L = config.d_model, config.d_ff, config.n_layers
    per_layer = 4 * d + 4 * (d * d + d) + (d * f + f) + (f * d + d)
    return config.vocab_size * d + config.max_seq_len * d + L * per_layer + 2 * d + head_parameter_count(config)


def freeze_report(model: TransformerClassifier) -> list[tuple[str, bool]]:
    return [(p.name, p.trainable) for p in model.params.values()]


# ---------------------------------------------------------------- adapter files


def save_adapter(model: TransformerClassifier, path: str | os.PathLike) -> None:
    """Write only the trained tensors (adapters and head) plus the base digest."""
    params = [p for p in model.params.values() if p.role in ("adapter", "head")]
    data = _encode(
        {}, None if model.peft is None else asdict(model.peft), params, {"base_digest": base_digest(model)}
    )
    Path(path).write_bytes(data)


def load_adapter(base: TransformerClassifier, path: str | os.PathLike) -> TransformerClassifier:
    """Re-attach saved adapter tensors to a copy of ``base``.

    Raises ModelError if ``base`` is not the model the adapter was trained on.
    """
    header, tensors = _decode(Path(path).read_bytes())
    if header["base_digest"] != base_digest(base):
        raise ModelError("adapter was trained on a different base model (digest mismatch)")
    model = base.copy()
    model.peft = None
    peft = PeftConfig(**header["peft"]) if header.get("peft") else PeftConfig("full")
    attach(model, peft)
    for entry in header["tensors"]:
        name = entry["name"]
        if name not in model:
            raise ModelError(f"adapter tensor {name!r} has no slot in the attached model")
        model.params[name].value[...] = tensors[name]
    return model


def describe(model: TransformerClassifier) -> str:
    peft = model.peft or PeftConfig("full")
    return json.dumps({"method": peft.method, **{k: v for k, v in asdict(peft).items() if k != "method"}}, sort_keys=True)
