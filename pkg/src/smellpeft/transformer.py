"""A small transformer sequence classifier with a handwritten backward pass.

Everything is float64 numpy. Blocks use pre-layer-norm ordering::

    x = x + MHA(LN1(x))
    x = x + FFN(LN2(x)),   FFN(x) = W_up act(W_down x)

followed by a final layer norm, pooling (first position for bidirectional
attention, last non-pad position for causal attention) and a linear head
with two logits. Token id 0 is padding and is masked out as a key.

Adapter tensors created by :mod:`smellpeft.peft` live in the same parameter
table and are picked up by :func:`forward` / :func:`backward` by name.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

PAD_ID = 0
_NEG = -1e30
_MAGIC = b"SMPTCKPT"


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int = 512
    d_model: int = 32
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 64
    max_seq_len: int = 128
    attention_mode: str = "bidirectional"
    n_classes: int = 2
    seed: int = 0
    activation: str = "gelu"
    init_std: float = 0.02
    ln_eps: float = 1e-5

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ModelError(f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}")
        if not 1 <= self.max_seq_len <= 1024:
            raise ModelError("max_seq_len must lie in [1, 1024]")
        if self.attention_mode not in ("bidirectional", "causal"):
            raise ModelError(f"unknown attention_mode {self.attention_mode!r}")
        if self.n_classes != 2:
            raise ModelError("only binary classification is supported")
        if self.activation not in ("gelu", "relu"):
            raise ModelError(f"unknown activation {self.activation!r}")
        if min(self.vocab_size, self.d_model, self.n_layers, self.d_ff) < 1:
            raise ModelError("sizes must be positive")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads


@dataclass
class Parameter:
    name: str
    value: np.ndarray
    trainable: bool = True
    role: str = "base"  # "base", "head" or "adapter"
    grad: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.value = np.ascontiguousarray(self.value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    @property
    def size(self) -> int:
        return self.value.size


class TransformerClassifier:
    """Parameter table plus the attachment settings of a PEFT method."""

    def __init__(self, config: ModelConfig):
        self.config = config
        self.params: dict[str, Parameter] = {}
        self.peft = None  # set by smellpeft.peft when an adapter is attached

    def add(self, name: str, value, *, trainable: bool = True, role: str = "base") -> Parameter:
        if name in self.params:
            raise ModelError(f"duplicate parameter name {name!r}")
        p = Parameter(name, value, trainable, role)
        self.params[name] = p
        return p

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name].value

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad.fill(0.0)

    def num_parameters(self, trainable_only: bool = False) -> int:
        return sum(p.size for p in self.params.values() if p.trainable or not trainable_only)

    @property
    def n_virtual(self) -> int:
        return self["prompt.embeddings"].shape[0] if "prompt.embeddings" in self else 0

    @property
    def prefix_len(self) -> int:
        return self["prefix.seed"].shape[0] if "prefix.seed" in self else 0

    def copy(self) -> "TransformerClassifier":
        other = TransformerClassifier(self.config)
        other.peft = self.peft
        for p in self.params.values():
            other.add(p.name, p.value.copy(), trainable=p.trainable, role=p.role)
        return other


def truncated_normal(rng: np.random.Generator, shape, std: float) -> np.ndarray:
    """Normal(0, std) redrawn outside two standard deviations."""
    out = rng.standard_normal(shape)
    bad = np.abs(out) > 2.0
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return out * std


def init_model(config: ModelConfig) -> TransformerClassifier:
    rng = np.random.default_rng(config.seed)
    d, f, std = config.d_model, config.d_ff, config.init_std
    m = TransformerClassifier(config)
    m.add("embed.tokens", truncated_normal(rng, (config.vocab_size, d), std))
    m.add("embed.positions", truncated_normal(rng, (config.max_seq_len, d), std))
    for layer in range(config.n_layers):
        pre = f"layers.{layer}"
        m.add(f"{pre}.ln1.gain", np.ones(d))
        m.add(f"{pre}.ln1.bias", np.zeros(d))
        for proj in ("q", "k", "v", "o"):
            m.add(f"{pre}.attn.W_{proj}", truncated_normal(rng, (d, d), std))
            m.add(f"{pre}.attn.b_{proj}", np.zeros(d))
        m.add(f"{pre}.ln2.gain", np.ones(d))
        m.add(f"{pre}.ln2.bias", np.zeros(d))
        m.add(f"{pre}.ffn.W_down", truncated_normal(rng, (d, f), std))
        m.add(f"{pre}.ffn.b_down", np.zeros(f))
        m.add(f"{pre}.ffn.W_up", truncated_normal(rng, (f, d), std))
        m.add(f"{pre}.ffn.b_up", np.zeros(d))
    m.add("final_ln.gain", np.ones(d))
    m.add("final_ln.bias", np.zeros(d))
    m.add("head.W", truncated_normal(rng, (d, config.n_classes), std), role="head")
    m.add("head.b", np.zeros(config.n_classes), role="head")
    return m


# ---------------------------------------------------------------- primitives

_GELU_C = math.sqrt(2.0 / math.pi)


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return 0.5 * z * (1.0 + np.tanh(_GELU_C * (z + 0.044715 * z**3)))


def _act_grad(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0).astype(np.float64)
    u = _GELU_C * (z + 0.044715 * z**3)
    t = np.tanh(u)
    du = _GELU_C * (1.0 + 3 * 0.044715 * z**2)
    return 0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * du


def _ln_forward(x, gain, bias, eps):
    mu = x.mean(-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(-1, keepdims=True) + eps)
    xhat = xc * inv
    return xhat * gain + bias, (xhat, inv)


def _ln_backward(dy, gain, cache):
    xhat, inv = cache
    dxhat = dy * gain
    dx = inv * (dxhat - dxhat.mean(-1, keepdims=True) - xhat * (dxhat * xhat).mean(-1, keepdims=True))
    flat = dy.reshape(-1, dy.shape[-1])
    return dx, (flat * xhat.reshape(flat.shape)).sum(0), flat.sum(0)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _split_heads(x, h):
    b, s, d = x.shape
    return x.reshape(b, s, h, d // h).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, s, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, s, h * dh)


def _accumulate(model: TransformerClassifier, name: str, grad_fn) -> None:
    p = model.params[name]
    if p.trainable:
        p.grad += grad_fn()


def _matmul_grad(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return x.reshape(-1, x.shape[-1]).T @ dy.reshape(-1, dy.shape[-1])


# ---------------------------------------------------------------- forward


def _prefix_tensors(model: TransformerClassifier):
    """Per-layer (key, value) prefixes produced by the prefix MLP."""
    cfg = model.config
    seed = model["prefix.seed"]
    pre = seed @ model["prefix.mlp.W1"] + model["prefix.mlp.b1"]
    hidden = np.tanh(pre)
    out = hidden @ model["prefix.mlp.W2"] + model["prefix.mlp.b2"]
    kv = out.reshape(seed.shape[0], cfg.n_layers, 2, cfg.d_model)
    return kv, (hidden,)


def _project(model, pre, proj, a, training, rng, cache):
    name = f"{pre}.attn.W_{proj}"
    y = a @ model[name] + model[f"{pre}.attn.b_{proj}"]
    lora_a = f"{pre}.attn.lora_{proj}.A"
    if lora_a in model:
        peft = model.peft
        scale = peft.lora_alpha / peft.lora_rank
        x = a
        mask = None
        if training and rng is not None and peft.lora_dropout > 0:
            keep = 1.0 - peft.lora_dropout
            mask = (rng.random(a.shape) < keep) / keep
            x = a * mask
        h = x @ model[lora_a].T
        y = y + scale * (h @ model[f"{pre}.attn.lora_{proj}.B"].T)
        cache[f"lora_{proj}"] = (x, h, mask, scale)
    return y


def _key_mask(valid: np.ndarray, prefix_len: int, causal: bool) -> np.ndarray:
    """Additive attention bias of shape (B, 1, S, prefix_len + S)."""
    b, s = valid.shape
    allowed = np.broadcast_to(valid[:, None, :], (b, s, s))
    if causal:
        allowed = allowed & np.tril(np.ones((s, s), dtype=bool))[None]
    if prefix_len:
        allowed = np.concatenate([np.ones((b, s, prefix_len), dtype=bool), allowed], axis=-1)
    return np.where(allowed, 0.0, _NEG)[:, None]


def pool_positions(model: TransformerClassifier, ids: np.ndarray) -> np.ndarray:
    """Index of the pooled position of every sequence (prompt offset included)."""
    nv = model.n_virtual
    if model.config.attention_mode == "bidirectional":
        return np.full(ids.shape[0], nv, dtype=np.int64)
    lengths = (ids != PAD_ID).sum(1)
    return nv + np.maximum(lengths - 1, 0)


def forward(model: TransformerClassifier, ids, training: bool = False, rng: np.random.Generator | None = None):
    """Logits of shape (batch, 2); with ``training`` also the backward cache.

    LoRA dropout is only applied when training and an ``rng`` is supplied.
    """
    cfg = model.config
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim == 1:
        ids = ids[None]
    if ids.size and (ids.min() < 0 or ids.max() >= cfg.vocab_size):
        raise ModelError(f"token id out of range [0, {cfg.vocab_size})")
    if np.any((ids != PAD_ID).sum(1) == 0):
        raise ModelError("every sequence needs at least one non-pad token")
    bsz, t = ids.shape
    nv = model.n_virtual
    s = nv + t
    if s > cfg.max_seq_len:
        raise ModelError(f"sequence length {s} (including {nv} virtual tokens) exceeds max_seq_len={cfg.max_seq_len}")

    x = model["embed.tokens"][ids]
    if nv:
        x = np.concatenate([np.broadcast_to(model["prompt.embeddings"], (bsz, nv, cfg.d_model)), x], axis=1)
    x = x + model["embed.positions"][:s]
    valid = np.concatenate([np.ones((bsz, nv), dtype=bool), ids != PAD_ID], axis=1)

    plen = model.prefix_len
    prefix_kv, prefix_cache = _prefix_tensors(model) if plen else (None, None)
    bias = _key_mask(valid, plen, cfg.attention_mode == "causal")
    nh, dh = cfg.n_heads, cfg.head_dim
    ia3 = "layers.0.attn.ia3.l_k" in model

    layers = []
    for layer in range(cfg.n_layers):
        pre = f"layers.{layer}"
        c: dict = {}
        a, c["ln1"] = _ln_forward(x, model[f"{pre}.ln1.gain"], model[f"{pre}.ln1.bias"], cfg.ln_eps)
        c["a"] = a
        q = _project(model, pre, "q", a, training, rng, c)
        k = _project(model, pre, "k", a, training, rng, c)
        v = _project(model, pre, "v", a, training, rng, c)
        if ia3:
            c["k_raw"], c["v_raw"] = k, v
            k = k * model[f"{pre}.attn.ia3.l_k"]
            v = v * model[f"{pre}.attn.ia3.l_v"]
        if plen:
            k = np.concatenate([np.broadcast_to(prefix_kv[:, layer, 0], (bsz, plen, cfg.d_model)), k], axis=1)
            v = np.concatenate([np.broadcast_to(prefix_kv[:, layer, 1], (bsz, plen, cfg.d_model)), v], axis=1)
        qh, kh, vh = _split_heads(q, nh), _split_heads(k, nh), _split_heads(v, nh)
        scores = qh @ kh.transpose(0, 1, 3, 2) / math.sqrt(dh) + bias
        probs = softmax(scores)
        ctx = _merge_heads(probs @ vh)
        x = x + ctx @ model[f"{pre}.attn.W_o"] + model[f"{pre}.attn.b_o"]
        c.update(qh=qh, kh=kh, vh=vh, probs=probs, ctx=ctx)

        f, c["ln2"] = _ln_forward(x, model[f"{pre}.ln2.gain"], model[f"{pre}.ln2.bias"], cfg.ln_eps)
        z = f @ model[f"{pre}.ffn.W_down"] + model[f"{pre}.ffn.b_down"]
        g = _act(z, cfg.activation)
        if ia3:
            c["g_raw"] = g
            g = g * model[f"{pre}.ffn.ia3.l_ff"]
        x = x + g @ model[f"{pre}.ffn.W_up"] + model[f"{pre}.ffn.b_up"]
        c.update(f=f, z=z, g=g)
        layers.append(c)

    hf, ln_f = _ln_forward(x, model["final_ln.gain"], model["final_ln.bias"], cfg.ln_eps)
    pos = pool_positions(model, ids)
    pooled = hf[np.arange(bsz), pos]
    logits = pooled @ model["head.W"] + model["head.b"]
    if not training:
        return logits
    cache = {
        "ids": ids, "layers": layers, "ln_f": ln_f, "pos": pos, "pooled": pooled,
        "seq_len": s, "prefix": prefix_cache, "logits": logits,
    }
    return logits, cache


def attention_probabilities(model: TransformerClassifier, ids) -> list[np.ndarray]:
    """Per-layer attention probabilities (B, H, S, prefix+S) for inspection."""
    _, cache = forward(model, ids, training=True)
    return [c["probs"] for c in cache["layers"]]


def hidden_states(model: TransformerClassifier, ids) -> np.ndarray:
    """Final layer-normalised hidden states (B, S, d)."""
    _, cache = forward(model, ids, training=True)
    xhat, _ = cache["ln_f"]
    return xhat * model["final_ln.gain"] + model["final_ln.bias"]


# ---------------------------------------------------------------- loss


def loss(logits: np.ndarray, labels) -> float:
    """Mean cross-entropy, stabilised with log-sum-exp."""
    labels = np.asarray(labels, dtype=np.int64)
    m = logits.max(-1, keepdims=True)
    lse = (m + np.log(np.exp(logits - m).sum(-1, keepdims=True)))[:, 0]
    return float(np.mean(lse - logits[np.arange(len(labels)), labels]))


def loss_grad(logits: np.ndarray, labels) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    p = softmax(logits)
    p[np.arange(len(labels)), labels] -= 1.0
    return p / len(labels)


# ---------------------------------------------------------------- backward


def backward(model: TransformerClassifier, cache, labels=None, *, dlogits=None, scale: float = 1.0) -> None:
    """Accumulate d(loss)/d(param) into the ``grad`` of every trainable tensor.

    Pass ``labels`` for the mean cross-entropy loss or ``dlogits`` for an
    arbitrary upstream gradient; ``scale`` multiplies the loss.
    """
    if cache is None:
        raise ModelError("backward needs the cache of a training-mode forward pass")
    cfg = model.config
    if dlogits is None:
        if labels is None:
            raise ModelError("backward needs labels or dlogits")
        dlogits = loss_grad(cache["logits"], labels)
    dlogits = dlogits * scale
    ids, pos, pooled = cache["ids"], cache["pos"], cache["pooled"]
    bsz = ids.shape[0]
    s = cache["seq_len"]
    nv = model.n_virtual
    plen = model.prefix_len
    nh, dh = cfg.n_heads, cfg.head_dim
    ia3 = "layers.0.attn.ia3.l_k" in model

    _accumulate(model, "head.W", lambda: pooled.T @ dlogits)
    _accumulate(model, "head.b", lambda: dlogits.sum(0))
    dhf = np.zeros((bsz, s, cfg.d_model))
    dhf[np.arange(bsz), pos] = dlogits @ model["head.W"].T
    dx, dg, db = _ln_backward(dhf, model["final_ln.gain"], cache["ln_f"])
    _accumulate(model, "final_ln.gain", lambda: dg)
    _accumulate(model, "final_ln.bias", lambda: db)

    dprefix = np.zeros((plen, cfg.n_layers, 2, cfg.d_model)) if plen else None
    for layer in reversed(range(cfg.n_layers)):
        pre = f"layers.{layer}"
        c = cache["layers"][layer]

        # feed-forward
        du = dx
        _accumulate(model, f"{pre}.ffn.W_up", lambda: _matmul_grad(c["g"], du))
        _accumulate(model, f"{pre}.ffn.b_up", lambda: du.reshape(-1, du.shape[-1]).sum(0))
        dgate = du @ model[f"{pre}.ffn.W_up"].T
        if ia3:
            _accumulate(model, f"{pre}.ffn.ia3.l_ff", lambda: (dgate * c["g_raw"]).reshape(-1, cfg.d_ff).sum(0))
            dgate = dgate * model[f"{pre}.ffn.ia3.l_ff"]
        dz = dgate * _act_grad(c["z"], cfg.activation)
        _accumulate(model, f"{pre}.ffn.W_down", lambda: _matmul_grad(c["f"], dz))
        _accumulate(model, f"{pre}.ffn.b_down", lambda: dz.reshape(-1, dz.shape[-1]).sum(0))
        df = dz @ model[f"{pre}.ffn.W_down"].T
        dln2, dg, db = _ln_backward(df, model[f"{pre}.ln2.gain"], c["ln2"])
        _accumulate(model, f"{pre}.ln2.gain", lambda: dg)
        _accumulate(model, f"{pre}.ln2.bias", lambda: db)
        dx = dx + dln2

        # attention
        do = dx
        _accumulate(model, f"{pre}.attn.W_o", lambda: _matmul_grad(c["ctx"], do))
        _accumulate(model, f"{pre}.attn.b_o", lambda: do.reshape(-1, do.shape[-1]).sum(0))
        dctx = _split_heads(do @ model[f"{pre}.attn.W_o"].T, nh)
        probs = c["probs"]
        dprobs = dctx @ c["vh"].transpose(0, 1, 3, 2)
        dvh = probs.transpose(0, 1, 3, 2) @ dctx
        dscores = probs * (dprobs - (dprobs * probs).sum(-1, keepdims=True)) / math.sqrt(dh)
        dq = _merge_heads(dscores @ c["kh"])
        dk = _merge_heads(dscores.transpose(0, 1, 3, 2) @ c["qh"])
        dv = _merge_heads(dvh)
        if plen:
            dprefix[:, layer, 0] = dk[:, :plen].sum(0)
            dprefix[:, layer, 1] = dv[:, :plen].sum(0)
            dk, dv = dk[:, plen:], dv[:, plen:]
        if ia3:
            _accumulate(model, f"{pre}.attn.ia3.l_k", lambda: (dk * c["k_raw"]).reshape(-1, cfg.d_model).sum(0))
            _accumulate(model, f"{pre}.attn.ia3.l_v", lambda: (dv * c["v_raw"]).reshape(-1, cfg.d_model).sum(0))
            dk = dk * model[f"{pre}.attn.ia3.l_k"]
            dv = dv * model[f"{pre}.attn.ia3.l_v"]

        a = c["a"]
        da = np.zeros_like(a)
        for proj, dy in (("q", dq), ("k", dk), ("v", dv)):
            _accumulate(model, f"{pre}.attn.W_{proj}", lambda: _matmul_grad(a, dy))
            _accumulate(model, f"{pre}.attn.b_{proj}", lambda: dy.reshape(-1, dy.shape[-1]).sum(0))
            da += dy @ model[f"{pre}.attn.W_{proj}"].T
            if f"lora_{proj}" in c:
                xin, h, mask, lscale = c[f"lora_{proj}"]
                B = model[f"{pre}.attn.lora_{proj}.B"]
                A = model[f"{pre}.attn.lora_{proj}.A"]
                _accumulate(model, f"{pre}.attn.lora_{proj}.B", lambda: lscale * _matmul_grad(dy, h))
                dh_ = lscale * (dy @ B)
                _accumulate(model, f"{pre}.attn.lora_{proj}.A", lambda: _matmul_grad(dh_, xin))
                dxin = dh_ @ A
                da += dxin * mask if mask is not None else dxin
        dln1, dg, db = _ln_backward(da, model[f"{pre}.ln1.gain"], c["ln1"])
        _accumulate(model, f"{pre}.ln1.gain", lambda: dg)
        _accumulate(model, f"{pre}.ln1.bias", lambda: db)
        dx = dx + dln1

    _accumulate(model, "embed.positions", lambda: np.pad(dx.sum(0), ((0, cfg.max_seq_len - s), (0, 0))))
    if nv:
        _accumulate(model, "prompt.embeddings", lambda: dx[:, :nv].sum(0))
    if model.params["embed.tokens"].trainable:
        demb = np.zeros_like(model["embed.tokens"])
        np.add.at(demb, ids.reshape(-1), dx[:, nv:].reshape(-1, cfg.d_model))
        model.params["embed.tokens"].grad += demb
    if plen:
        _prefix_backward(model, cache["prefix"], dprefix)


def _prefix_backward(model, prefix_cache, dprefix):
    (hidden,) = prefix_cache
    p = hidden.shape[0]
    dout = dprefix.reshape(p, -1)
    _accumulate(model, "prefix.mlp.W2", lambda: hidden.T @ dout)
    _accumulate(model, "prefix.mlp.b2", lambda: dout.sum(0))
    dpre = (dout @ model["prefix.mlp.W2"].T) * (1.0 - hidden**2)
    _accumulate(model, "prefix.mlp.W1", lambda: model["prefix.seed"].T @ dpre)
    _accumulate(model, "prefix.mlp.b1", lambda: dpre.sum(0))
    _accumulate(model, "prefix.seed", lambda: dpre @ model["prefix.mlp.W1"].T)


# ---------------------------------------------------------------- gradient check


@dataclass
class GradCheckEntry:
    name: str
    max_rel_error: float
    n_checked: int
    skipped: bool = False
    grad_all_zero: bool = True


def grad_check(
    model: TransformerClassifier,
    ids,
    labels,
    epsilon: float = 1e-5,
    n_coords: int = 32,
    seed: int = 0,
    abs_floor: float = 1e-6,
) -> list[GradCheckEntry]:
    """Compare analytic gradients with central differences.

    Up to ``n_coords`` random coordinates per trainable tensor are perturbed.
    Relative error is ``|a - n| / max(|a|, |n|, abs_floor)``. LoRA dropout
    masks are held fixed by reseeding the dropout stream for every pass.
    Frozen tensors are reported as skipped, together with whether their
    gradient buffer stayed all-zero.
    """
    ids = np.asarray(ids)

    def run(train_backward: bool):
        logits, cache = forward(model, ids, training=True, rng=np.random.default_rng(seed + 1))
        if train_backward:
            backward(model, cache, labels)
        return loss(logits, labels)

    model.zero_grad()
    run(True)
    analytic = {n: p.grad.copy() for n, p in model.params.items()}
    pick = np.random.default_rng(seed)
    report = []
    for name, p in model.params.items():
        if not p.trainable:
            report.append(GradCheckEntry(name, 0.0, 0, skipped=True, grad_all_zero=not analytic[name].any()))
            continue
        flat = p.value.reshape(-1)
        coords = np.arange(flat.size) if flat.size <= n_coords else pick.choice(flat.size, n_coords, replace=False)
        worst = 0.0
        for i in coords:
            old = flat[i]
            flat[i] = old + epsilon
            up = run(False)
            flat[i] = old - epsilon
            down = run(False)
            flat[i] = old
            num = (up - down) / (2 * epsilon)
            ana = analytic[name].reshape(-1)[i]
            worst = max(worst, abs(ana - num) / max(abs(ana), abs(num), abs_floor))
        report.append(GradCheckEntry(name, worst, len(coords), grad_all_zero=not analytic[name].any()))
    model.zero_grad()
    return report


# ---------------------------------------------------------------- checkpoints


def _peft_dict(model):
    return None if model.peft is None else asdict(model.peft)


def save_checkpoint(model: TransformerClassifier, path: str | os.PathLike) -> str:
    """Header (config + tensor directory) followed by little-endian float64 data.

    Returns the sha256 hex digest of the written bytes.
    """
    data = checkpoint_bytes(model)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
    return hashlib.sha256(data).hexdigest()


def _encode(config: dict, peft, params: list[Parameter], extra: dict | None = None) -> bytes:
    directory = [
        {"name": p.name, "shape": list(p.value.shape), "trainable": p.trainable, "role": p.role} for p in params
    ]
    header = {"config": config, "peft": peft, "tensors": directory}
    if extra:
        header.update(extra)
    raw = json.dumps(header, sort_keys=True).encode()
    body = b"".join(p.value.astype("<f8").tobytes() for p in params)
    return _MAGIC + struct.pack("<Q", len(raw)) + raw + body


def _decode(data: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if data[: len(_MAGIC)] != _MAGIC:
        raise ModelError("not a checkpoint file")
    (n,) = struct.unpack_from("<Q", data, len(_MAGIC))
    start = len(_MAGIC) + 8
    header = json.loads(data[start : start + n])
    offset = start + n
    tensors = {}
    for entry in header["tensors"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(entry["shape"])
        tensors[entry["name"]] = arr.astype(np.float64)
        offset += count * 8
    if offset != len(data):
        raise ModelError("checkpoint has trailing or missing bytes")
    return header, tensors


def checkpoint_bytes(model: TransformerClassifier) -> bytes:
    return _encode(asdict(model.config), _peft_dict(model), list(model.params.values()))


def load_checkpoint(path_or_bytes) -> TransformerClassifier:
    data = path_or_bytes if isinstance(path_or_bytes, bytes) else Path(path_or_bytes).read_bytes()
    header, tensors = _decode(data)
    model = TransformerClassifier(ModelConfig(**header["config"]))
    if header.get("peft") is not None:
        from smellpeft.peft import PeftConfig

        model.peft = PeftConfig(**header["peft"])
    for entry in header["tensors"]:
        model.add(entry["name"], tensors[entry["name"]], trainable=entry["trainable"], role=entry["role"])
    return model


def base_digest(model: TransformerClassifier) -> str:
    """sha256 over the config and every frozen-base tensor (head excluded)."""
    h = hashlib.sha256(json.dumps(asdict(model.config), sort_keys=True).encode())
    for p in model.params.values():
        if p.role == "base":
            h.update(p.name.encode())
            h.update(p.value.astype("<f8").tobytes())
    return h.hexdigest()
