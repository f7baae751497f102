"""Binary classification metrics and error analysis.

The positive class is plausible (1) throughout. AUC is the rank statistic:
the fraction of (positive, negative) pairs in which the positive example has
the higher score, ties counting one half.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import UsageError


@dataclass(frozen=True)
class Prediction:
    label: int
    score: float
    truncated: bool = False

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")
        if self.label != int(self.score >= 0.5):
            raise ValueError(f"label {self.label} inconsistent with score {self.score}")

    @classmethod
    def from_score(cls, score: float, truncated: bool = False) -> "Prediction":
        score = float(min(1.0, max(0.0, score)))
        return cls(int(score >= 0.5), score, truncated)

    def to_record(self) -> dict:
        return {"label": self.label, "score": self.score, "truncated": self.truncated}


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int


@dataclass(frozen=True)
class MetricsReport:
    auc: float
    precision: float
    recall: float
    f1: float
    accuracy: float
    confusion: Confusion
    n: int
    # Names of quantities whose denominator was empty (reported as 0.0, AUC as 0.5).
    undefined: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["undefined"] = list(self.undefined)
        return d

    def table_row(self) -> dict[str, float]:
        return {"AUC": self.auc, "P": self.precision, "R": self.recall, "F1": self.f1, "Acc": self.accuracy}


def rank_auc(scores: Sequence[float], golds: Sequence[int]) -> float | None:
    """Mann-Whitney AUC via midranks; ``None`` when one class is absent."""
    scores = np.asarray(scores, dtype=float)
    golds = np.asarray(golds, dtype=int)
    n_pos = int(golds.sum())
    n_neg = len(golds) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    ranks = np.empty(len(scores), dtype=float)
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    u = ranks[golds == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def compute_metrics(predictions: Sequence[Prediction], golds: Sequence[int]) -> MetricsReport:
    if len(predictions) != len(golds):
        raise UsageError(f"{len(predictions)} predictions for {len(golds)} gold labels")
    if not predictions:
        raise UsageError("cannot compute metrics on an empty set")
    golds = [int(g) for g in golds]
    if any(g not in (0, 1) for g in golds):
        raise UsageError("gold labels must be 0 or 1")

    tp = fp = fn = tn = 0
    for p, g in zip(predictions, golds):
        if p.label == 1:
            tp, fp = (tp + 1, fp) if g == 1 else (tp, fp + 1)
        else:
            fn, tn = (fn + 1, tn) if g == 1 else (fn, tn + 1)
    n = len(golds)
    undefined = []
    if tp + fp:
        precision = tp / (tp + fp)
    else:
        precision = 0.0
        undefined.append("precision")
    if tp + fn:
        recall = tp / (tp + fn)
    else:
        recall = 0.0
        undefined.append("recall")
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    auc = rank_auc([p.score for p in predictions], golds)
    if auc is None:
        auc = 0.5
        undefined.append("auc")
    return MetricsReport(auc, precision, recall, f1, (tp + tn) / n, Confusion(tp, fp, fn, tn), n, tuple(undefined))


@dataclass(frozen=True)
class ErrorAnalysisReport:
    wrong_total: int
    wrong_with_unknown_event_type: int
    wrong_with_trivial_entity_type: int

    def to_dict(self) -> dict:
        return asdict(self)


def error_analysis(records: Iterable[tuple]) -> ErrorAnalysisReport:
    """Count wrong predictions, and among them those with an unknown verb type or a trivial entity type.

    ``records`` yields ``(PromptRecord, Prediction, gold)`` triples.
    """
    total = unk = trivial = 0
    for record, pred, gold in records:
        if pred.label == int(gold):
            continue
        total += 1
        unk += record.flags.verb_unknown
        trivial += record.flags.has_trivial_entity_type
    return ErrorAnalysisReport(total, unk, trivial)


def roc_points(scores: Sequence[float], golds: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """False- and true-positive rates at every distinct score threshold, for plotting."""
    scores = np.asarray(scores, dtype=float)
    golds = np.asarray(golds, dtype=int)
    pos, neg = max(golds.sum(), 1), max((1 - golds).sum(), 1)
    thresholds = np.unique(scores)[::-1]
    fpr = [0.0] + [float(((scores >= t) & (golds == 0)).sum() / neg) for t in thresholds]
    tpr = [0.0] + [float(((scores >= t) & (golds == 1)).sum() / pos) for t in thresholds]
    return np.array(fpr), np.array(tpr)
