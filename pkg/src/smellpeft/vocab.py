"""Token-id vocabulary over the pipeline tokenizer."""

from __future__ import annotations

import json
from collections import Counter

import numpy as np

from smellpeft.java.subtokens import TOKENIZER_ID, pipeline_tokens

PAD, UNK, CLS = "<pad>", "<unk>", "<cls>"
SPECIALS = (PAD, UNK, CLS)


class Vocabulary:
    def __init__(self, tokens):
        self.itos = list(tokens)
        if tuple(self.itos[:3]) != SPECIALS:
            raise ValueError(f"vocabulary must start with {SPECIALS}")
        self.stoi = {t: i for i, t in enumerate(self.itos)}

    def __len__(self) -> int:
        return len(self.itos)

    @classmethod
    def build(cls, sources, max_size: int = 512, min_freq: int = 1) -> "Vocabulary":
        """Most frequent tokens first, ties broken alphabetically."""
        counts = Counter()
        for src in sources:
            counts.update(pipeline_tokens(src))
        ranked = sorted((t for t, c in counts.items() if c >= min_freq and t not in SPECIALS), key=lambda t: (-counts[t], t))
        return cls(list(SPECIALS) + ranked[: max(0, max_size - len(SPECIALS))])

    def encode(self, source: str, max_len: int) -> list[int]:
        """``<cls>`` followed by token ids, truncated to ``max_len``."""
        unk = self.stoi[UNK]
        ids = [self.stoi[CLS]] + [self.stoi.get(t, unk) for t in pipeline_tokens(source)]
        return ids[:max_len]

    def encode_batch(self, sources, max_len: int) -> np.ndarray:
        rows = [self.encode(s, max_len) for s in sources]
        width = max((len(r) for r in rows), default=1)
        out = np.zeros((len(rows), width), dtype=np.int64)
        for i, r in enumerate(rows):
            out[i, : len(r)] = r
        return out

    def to_json(self) -> str:
        return json.dumps({"tokenizer": TOKENIZER_ID, "tokens": self.itos}, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        data = json.loads(text)
        if data.get("tokenizer") != TOKENIZER_ID:
            raise ValueError(f"vocabulary built for tokenizer {data.get('tokenizer')!r}, expected {TOKENIZER_ID!r}")
        return cls(data["tokens"])
