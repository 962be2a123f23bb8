"""Training with AdamW, validation-loss epoch selection, prediction and
deterministic memory accounting."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from smellpeft.metrics import ConfusionMatrix, Metrics, compute_metrics
from smellpeft.transformer import TransformerClassifier, backward, forward, loss

log = logging.getLogger(__name__)

PEFT_LEARNING_RATE = 3e-4
FULL_FT_LEARNING_RATE = 1e-5


class TrainingError(RuntimeError):
    def __init__(self, message: str, epoch: int, batch: int):
        super().__init__(f"{message} (epoch {epoch}, batch {batch})")
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float | None = None  # None: 3e-4 under PEFT, 1e-5 for full fine-tuning
    epochs: int = 10
    batch_size: int = 8
    seed: int = 0
    weight_decay: float = 0.01
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    averaging: str = "macro"

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(self.betas))
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")

    def resolved_lr(self, method: str) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return FULL_FT_LEARNING_RATE if method == "full" else PEFT_LEARNING_RATE


# ---------------------------------------------------------------- AdamW


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adamw_step(tensors, gradients, state: AdamState, lr: float, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01, trainable=None):
    """One decoupled-weight-decay Adam update, in place.

    ``tensors`` and ``gradients`` map names to arrays; names outside
    ``trainable`` (default: all) are left untouched.
    """
    b1, b2 = betas
    state.step += 1
    t = state.step
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    names = list(tensors) if trainable is None else [n for n in tensors if n in trainable]
    for name in names:
        w, g = tensors[name], gradients[name]
        if w.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match tensor {name!r} of shape {w.shape}")
        m = state.m.setdefault(name, np.zeros_like(w))
        v = state.v.setdefault(name, np.zeros_like(w))
        if m.shape != w.shape:
            raise ValueError(f"optimizer state for {name!r} has shape {m.shape}, tensor has {w.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        if weight_decay:
            w -= lr * weight_decay * w
        w -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


class AdamW:
    def __init__(self, model: TransformerClassifier, lr: float, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01):
        self.model = model
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.state = AdamState()

    def step(self) -> None:
        params = self.model.params
        trainable = {n for n, p in params.items() if p.trainable}
        adamw_step(
            {n: params[n].value for n in trainable},
            {n: params[n].grad for n in trainable},
            self.state,
            self.lr,
            self.betas,
            self.eps,
            self.weight_decay,
        )


# ---------------------------------------------------------------- data


@dataclass
class EncodedSet:
    """Padded token ids (N, T) and binary labels (N,)."""

    ids: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)

    def batch(self, index) -> tuple[np.ndarray, np.ndarray]:
        ids = self.ids[index]
        width = max(1, int((ids != 0).sum(1).max())) if len(ids) else 1
        return ids[:, :width], self.labels[index]


def encode_samples(vocab, samples, max_len: int) -> EncodedSet:
    ids = vocab.encode_batch([s.method.source for s in samples], max_len)
    return EncodedSet(ids, np.array([s.y for s in samples], dtype=np.int64))


# ---------------------------------------------------------------- evaluation


def predict_logits(model: TransformerClassifier, data: EncodedSet, batch_size: int = 64) -> np.ndarray:
    out = []
    for start in range(0, len(data), batch_size):
        ids, _ = data.batch(np.arange(start, min(start + batch_size, len(data))))
        out.append(forward(model, ids))
    return np.concatenate(out) if out else np.zeros((0, 2))


def predict_labels(logits: np.ndarray) -> np.ndarray:
    """Argmax of the two logits; ties go to 0."""
    logits = np.asarray(logits)
    return (logits[:, 1] > logits[:, 0]).astype(np.int64)


def predict(model: TransformerClassifier, data: EncodedSet, batch_size: int = 64) -> np.ndarray:
    return predict_labels(predict_logits(model, data, batch_size))


@dataclass
class Evaluation:
    loss: float
    confusion: ConfusionMatrix
    metrics: Metrics


def evaluate(model: TransformerClassifier, data: EncodedSet, averaging: str = "macro") -> Evaluation:
    logits = predict_logits(model, data)
    cm = ConfusionMatrix.from_predictions(predict_labels(logits), data.labels)
    return Evaluation(loss(logits, data.labels), cm, compute_metrics(cm, averaging))


# ---------------------------------------------------------------- training


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_loss: float
    valid_metrics: Metrics


@dataclass
class TrainResult:
    model: TransformerClassifier
    records: list[EpochRecord]
    selected_epoch: int


def select_epoch(valid_losses) -> int:
    """1-based index of the smallest validation loss, earliest on ties."""
    losses = list(valid_losses)
    if not losses:
        raise ValueError("no epochs to select from")
    return min(range(len(losses)), key=lambda i: (losses[i], i)) + 1


def train(model: TransformerClassifier, train_set: EncodedSet, valid_set: EncodedSet, config: TrainConfig = TrainConfig()) -> TrainResult:
    """Run exactly ``config.epochs`` epochs and keep the weights of the epoch
    with the lowest validation loss. ``model`` ends in its final-epoch state;
    the returned model is an independent copy of the selected epoch."""
    if len(train_set) == 0 or len(valid_set) == 0:
        raise ValueError("training and validation sets must be non-empty")
    method = model.peft.method if model.peft is not None else "full"
    opt = AdamW(model, config.resolved_lr(method), config.betas, config.eps, config.weight_decay)
    seq = np.random.SeedSequence(config.seed)
    shuffle_rng, dropout_rng = (np.random.default_rng(s) for s in seq.spawn(2))

    records: list[EpochRecord] = []
    best = None
    best_loss = math.inf
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(train_set))
        total, seen = 0.0, 0
        for b, start in enumerate(range(0, len(order), config.batch_size), 1):
            index = order[start : start + config.batch_size]
            ids, labels = train_set.batch(index)
            model.zero_grad()
            logits, cache = forward(model, ids, training=True, rng=dropout_rng)
            value = loss(logits, labels)
            if not math.isfinite(value):
                raise TrainingError("non-finite training loss", epoch, b)
            backward(model, cache, labels)
            opt.step()
            total += value * len(index)
            seen += len(index)
        model.zero_grad()
        ev = evaluate(model, valid_set, config.averaging)
        records.append(EpochRecord(epoch, total / seen, ev.loss, ev.metrics))
        log.debug("epoch %d train %.4f valid %.4f mcc %.3f", epoch, total / seen, ev.loss, ev.metrics.mcc)
        if not math.isfinite(ev.loss):
            raise TrainingError("non-finite validation loss", epoch, 0)
        if ev.loss < best_loss:
            best_loss = ev.loss
            best = model.copy()
    return TrainResult(best, records, select_epoch(r.valid_loss for r in records))


# ---------------------------------------------------------------- memory


@dataclass(frozen=True)
class MemoryAccount:
    parameter_bytes: int
    gradient_bytes: int
    optimizer_state_bytes: int
    activation_estimate_bytes: int

    @property
    def peak_estimate_bytes(self) -> int:
        return self.parameter_bytes + self.gradient_bytes + self.optimizer_state_bytes + self.activation_estimate_bytes


def activation_bytes(
    config,
    batch_size: int,
    seq_len: int,
    n_virtual: int = 0,
    prefix_len: int = 0,
    *,
    method: str = "full",
    lora_rank: int = 0,
    lora_targets: int = 0,
) -> int:
    """Bytes of float64 activations kept for one backward pass.

    Per token and layer, gradients with respect to the inputs always need the
    two normalised layer-norm inputs, q, k and v (5 d), the FFN
    pre-activation (d_ff) and one attention row per head (heads x keys).
    Activations that only feed weight gradients are counted when those
    weights train: the attention and FFN inputs plus the FFN activation
    under full fine-tuning (3 d + d_ff), the adapter inputs and rank
    projections under LoRA (d + targets x r), the unscaled k, v and FFN
    activation under (IA)3 (2 d + d_ff). Add the final layer-norm input
    (d) per token and the pooled vector (d) per sequence.
    """
    s = seq_len + n_virtual
    keys = s + prefix_len
    d, f = config.d_model, config.d_ff
    per_layer = 5 * d + f + config.n_heads * keys
    if method == "full":
        per_layer += 3 * d + f
    elif method == "lora":
        per_layer += d + lora_targets * lora_rank
    elif method == "ia3":
        per_layer += 2 * d + f
    per_token = config.n_layers * per_layer + d
    return 8 * batch_size * (s * per_token + d)


def memory_account(model: TransformerClassifier, batch_size: int = 8, seq_len: int | None = None) -> MemoryAccount:
    """Deterministic byte accounting of one training step (float64 throughout).

    Gradients take 8 bytes and the two AdamW moments 16 bytes per trainable
    parameter; frozen tensors cost only their own storage.
    """
    cfg = model.config
    seq_len = seq_len if seq_len is not None else cfg.max_seq_len - model.n_virtual
    trainable = model.num_parameters(trainable_only=True)
    peft = model.peft
    method = peft.method if peft is not None else "full"
    lora = dict(lora_rank=peft.lora_rank, lora_targets=len(peft.lora_targets)) if method == "lora" else {}
    return MemoryAccount(
        parameter_bytes=8 * model.num_parameters(),
        gradient_bytes=8 * trainable,
        optimizer_state_bytes=16 * trainable,
        activation_estimate_bytes=activation_bytes(cfg, batch_size, seq_len, model.n_virtual, model.prefix_len, method=method, **lora),
    )
