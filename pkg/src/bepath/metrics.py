"""Confusion matrices and evaluation metrics.

Binary reports use the convention the published numbers force: recall and
precision are positive-class values, accuracy is overall fraction correct,
and the F scores are unweighted (macro) means over both classes. The
convention is recorded on every report so downstream consumers are never
ambushed. Multi-class reports are macro throughout except accuracy, which
is plain fraction correct by default. AUROC is the tie-aware rank
statistic (probability a positive outranks a negative, ties counted half).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


class LengthMismatch(ValueError):
    pass


class LabelOutOfRange(ValueError):
    pass


class DegenerateMatrix(ValueError):
    """Metrics requested on an empty confusion matrix."""


class MalformedProbabilities(ValueError):
    pass


class SingleClassPresent(ValueError):
    """AUROC needs at least one positive and one negative."""


class InvalidBeta(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    """k x k integer grid; rows are gold classes, columns predictions."""

    counts: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("confusion matrix must be square")
        if (arr < 0).any():
            raise ValueError("confusion matrix entries must be non-negative")
        object.__setattr__(self, "counts", arr)

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def binary(cls, tp: int, fp: int, fn: int, tn: int) -> "ConfusionMatrix":
        """2x2 matrix with class 1 positive: rows/cols ordered (0, 1)."""
        return cls(np.array([[tn, fp], [fn, tp]], dtype=np.int64))


@dataclass(frozen=True)
class ClassMetrics:
    label: int
    precision: float
    recall: float
    f1: float
    f2: float
    support: int


@dataclass(frozen=True)
class MetricsReport:
    recall: float
    precision: float
    accuracy: float
    f1: float
    f2_beta: float
    auroc: float | None
    per_class: tuple[ClassMetrics, ...]
    averaging: str  # binary_positive_class | macro
    convention: str = field(default="", compare=False)

    def rounded(self, places: int = 3) -> dict:
        out = {
            "recall": round(self.recall, places),
            "precision": round(self.precision, places),
            "accuracy": round(self.accuracy, places),
            "f1": round(self.f1, places),
            "f2_beta": round(self.f2_beta, places),
        }
        out["auroc"] = round(self.auroc, places) if self.auroc is not None else None
        return out

    def to_json(self) -> str:
        return json.dumps(
            {
                **self.rounded(),
                "averaging": self.averaging,
                "convention": self.convention,
                "per_class": [
                    {
                        "label": m.label,
                        "precision": round(m.precision, 6),
                        "recall": round(m.recall, 6),
                        "f1": round(m.f1, 6),
                        "f2": round(m.f2, 6),
                        "support": m.support,
                    }
                    for m in self.per_class
                ],
            },
            indent=2,
        )


def confusion(gold, pred, k: int) -> ConfusionMatrix:
    gold = list(gold)
    pred = list(pred)
    if len(gold) != len(pred):
        raise LengthMismatch(f"{len(gold)} gold labels vs {len(pred)} predictions")
    counts = np.zeros((k, k), dtype=np.int64)
    for g, p in zip(gold, pred):
        if not 0 <= int(g) < k:
            raise LabelOutOfRange(f"gold label {g} outside [0, {k})")
        if not 0 <= int(p) < k:
            raise LabelOutOfRange(f"predicted label {p} outside [0, {k})")
        counts[int(g), int(p)] += 1
    return ConfusionMatrix(counts)


def _safe_div(num: float, den: float, context: str) -> float:
    # Empty denominators yield 0 by convention; log so silent zeros are
    # traceable.
    if den == 0:
        logger.debug("zero denominator in %s; defining value as 0", context)
        return 0.0
    return num / den


def fbeta(precision: float, recall: float, beta: float) -> float:
    """F-measure: (1 + beta^2) P R / (beta^2 P + R); 0 when P = R = 0."""
    if beta <= 0:
        raise InvalidBeta(f"beta must be positive, got {beta}")
    b2 = beta * beta
    return _safe_div((1 + b2) * precision * recall, b2 * precision + recall, "fbeta")


def _per_class(cm: ConfusionMatrix) -> list[ClassMetrics]:
    counts = cm.counts
    out = []
    for c in range(cm.k):
        tp = int(counts[c, c])
        fn = int(counts[c, :].sum()) - tp
        fp = int(counts[:, c].sum()) - tp
        precision = _safe_div(tp, tp + fp, f"precision[class {c}]")
        recall = _safe_div(tp, tp + fn, f"recall[class {c}]")
        out.append(
            ClassMetrics(
                label=c,
                precision=precision,
                recall=recall,
                f1=fbeta(precision, recall, 1.0),
                f2=fbeta(precision, recall, 2.0),
                support=tp + fn,
            )
        )
    return out


def binary_report(cm: ConfusionMatrix, auroc: float | None = None) -> MetricsReport:
    """Metrics for the binary task (class 1 positive).

    Positive-class recall/precision, overall accuracy, macro F1/F2: the
    mixed convention consistent with the published binary result rows.
    """
    if cm.k != 2:
        raise ValueError("binary_report needs a 2x2 matrix")
    if cm.total == 0:
        raise DegenerateMatrix("confusion matrix is empty")
    per_class = _per_class(cm)
    positive = per_class[1]
    return MetricsReport(
        recall=positive.recall,
        precision=positive.precision,
        accuracy=np.trace(cm.counts) / cm.total,
        f1=(per_class[0].f1 + per_class[1].f1) / 2,
        f2_beta=(per_class[0].f2 + per_class[1].f2) / 2,
        auroc=auroc,
        per_class=tuple(per_class),
        averaging="binary_positive_class",
        convention=(
            "recall/precision: positive class; accuracy: overall fraction "
            "correct; f1/f2_beta: macro over both classes"
        ),
    )


def multiclass_report(
    cm: ConfusionMatrix,
    probs: np.ndarray | None = None,
    gold=None,
    macro_ovr_accuracy: bool = False,
) -> MetricsReport:
    """Macro-averaged metrics for the k-class task.

    Accuracy is plain fraction correct unless macro_ovr_accuracy is set,
    which averages one-vs-rest accuracies instead. AUROC (macro
    one-vs-rest) is computed when per-report probabilities and gold labels
    are supplied.
    """
    if cm.k < 2:
        raise ValueError("need at least 2 classes")
    if cm.total == 0:
        raise DegenerateMatrix("confusion matrix is empty")
    per_class = _per_class(cm)
    k = cm.k
    if macro_ovr_accuracy:
        # One-vs-rest accuracy for class c: (TP_c + TN_c) / N.
        accuracy = float(
            np.mean(
                [
                    (cm.total - cm.counts[c, :].sum() - cm.counts[:, c].sum()
                     + 2 * cm.counts[c, c]) / cm.total
                    for c in range(k)
                ]
            )
        )
    else:
        accuracy = np.trace(cm.counts) / cm.total
    auroc = None
    if probs is not None:
        if gold is None:
            raise MalformedProbabilities("gold labels required with probabilities")
        auroc = auroc_macro_ovr(probs, gold)
    return MetricsReport(
        recall=float(np.mean([m.recall for m in per_class])),
        precision=float(np.mean([m.precision for m in per_class])),
        accuracy=float(accuracy),
        f1=float(np.mean([m.f1 for m in per_class])),
        f2_beta=float(np.mean([m.f2 for m in per_class])),
        auroc=auroc,
        per_class=tuple(per_class),
        averaging="macro",
        convention="precision/recall/f1/f2_beta: macro one-vs-rest; accuracy: "
        + ("macro one-vs-rest" if macro_ovr_accuracy else "overall fraction correct"),
    )


def auroc_binary(scores, gold) -> float:
    """Tie-aware AUROC: U statistic over (positive, negative) pairs.

    Computed via midranks, equivalent to P(score+ > score-) + P(tie)/2.
    Invariant under any strictly increasing transform of the scores.
    """
    scores = np.asarray(scores, dtype=float)
    gold = np.asarray(gold, dtype=int)
    if scores.shape != gold.shape:
        raise LengthMismatch("scores and gold labels differ in length")
    if not np.isin(gold, (0, 1)).all():
        raise LabelOutOfRange("binary gold labels must be 0 or 1")
    n_pos = int((gold == 1).sum())
    n_neg = int((gold == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClassPresent("need at least one positive and one negative")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=float)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1  # midrank, 1-based
        i = j + 1
    rank_sum_pos = float(ranks[gold == 1].sum())
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2
    return u / (n_pos * n_neg)


def auroc_macro_ovr(probs, gold) -> float:
    """Unweighted mean of one-vs-rest AUROCs over classes present in gold.

    Classes with no gold examples are skipped (and logged); each present
    class scores its own probability column against membership.
    """
    probs = np.asarray(probs, dtype=float)
    gold = np.asarray(gold, dtype=int)
    if probs.ndim != 2 or probs.shape[0] != gold.shape[0]:
        raise MalformedProbabilities("probability matrix must be n x k aligned with gold")
    if probs.shape[0] == 0:
        raise MalformedProbabilities("no probability rows")
    if not np.allclose(probs.sum(axis=1), 1.0, atol=1e-6):
        raise MalformedProbabilities("probability rows must sum to 1")
    values = []
    for c in range(probs.shape[1]):
        members = (gold == c).astype(int)
        if members.sum() == 0:
            logger.info("class %d absent from gold labels; skipped in macro AUROC", c)
            continue
        values.append(auroc_binary(probs[:, c], members))
    if not values:
        raise SingleClassPresent("no class present in gold labels")
    return float(np.mean(values))
