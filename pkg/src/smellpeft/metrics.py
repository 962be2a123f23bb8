"""Confusion-matrix metrics and inter-rater agreement."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ZERO_DIVISION_NOTE = "precision, recall, F1 and MCC are 0 wherever their denominator is 0"


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @classmethod
    def from_predictions(cls, predicted, gold) -> "ConfusionMatrix":
        p = np.asarray(predicted, dtype=bool)
        g = np.asarray(gold, dtype=bool)
        if p.shape != g.shape:
            raise ValueError("prediction and gold vectors differ in length")
        return cls(
            tp=int(np.sum(p & g)),
            tn=int(np.sum(~p & ~g)),
            fp=int(np.sum(p & ~g)),
            fn=int(np.sum(~p & g)),
        )

    def swapped(self) -> "ConfusionMatrix":
        """The same matrix read with the negative class as positive."""
        return ConfusionMatrix(tp=self.tn, tn=self.tp, fp=self.fn, fn=self.fp)


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    mcc: float
    averaging: str = "macro"

    def as_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1, "mcc": self.mcc}


def _ratio(num: float, den: float, zero: float) -> float:
    return num / den if den else zero


def _prf(cm: ConfusionMatrix, zero: float) -> tuple[float, float, float]:
    p = _ratio(cm.tp, cm.tp + cm.fp, zero)
    r = _ratio(cm.tp, cm.tp + cm.fn, zero)
    f = _ratio(2 * p * r, p + r, 0.0)
    return p, r, f


def matthews(cm: ConfusionMatrix) -> float:
    den = (cm.tp + cm.fp) * (cm.tp + cm.fn) * (cm.tn + cm.fp) * (cm.tn + cm.fn)
    if den == 0:
        return 0.0
    return (cm.tp * cm.tn - cm.fp * cm.fn) / math.sqrt(den)


def compute_metrics(cm: ConfusionMatrix, averaging: str = "macro", zero_division: float = 0.0) -> Metrics:
    """Precision, recall, F1 and MCC.

    ``positive_class`` scores the matrix as given; ``macro`` averages
    precision, recall and F1 over both classes. MCC is symmetric in the
    classes and computed once. A ratio with a zero denominator takes the
    value ``zero_division``.
    """
    if averaging == "positive_class":
        p, r, f = _prf(cm, zero_division)
    elif averaging == "macro":
        pos = _prf(cm, zero_division)
        neg = _prf(cm.swapped(), zero_division)
        p, r, f = ((a + b) / 2 for a, b in zip(pos, neg))
    else:
        raise ValueError(f"unknown averaging {averaging!r}")
    return Metrics(p, r, f, matthews(cm), averaging)


def cohens_kappa(labels_a, labels_b) -> float:
    """Chance-corrected agreement between two binary annotations."""
    a = np.asarray(labels_a).astype(int)
    b = np.asarray(labels_b).astype(int)
    if a.shape != b.shape:
        raise ValueError(f"annotation vectors differ in length: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("cannot compute agreement over zero items")
    p_o = float(np.mean(a == b))
    pa, pb = a.mean(), b.mean()
    p_e = float(pa * pb + (1 - pa) * (1 - pb))
    if p_e == 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)
