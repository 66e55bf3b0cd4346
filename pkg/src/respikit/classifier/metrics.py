"""Confusion matrices and summary metrics (accuracy, macro F1, macro one-vs-rest AUC)."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .model import CLASSES

# Published confusion matrices, detected (rows) x actual (columns: cough, breath, voice).
REFERENCE_SHORT_SCALE = ((944, 75, 21), (15, 845, 9), (6, 45, 935))
REFERENCE_LONG_SCALE = ((948, 64, 17), (7, 873, 10), (10, 28, 938))
REFERENCE_MULTISCALE = ((949, 60, 24), (11, 881, 10), (5, 24, 931))
# Reference cough detector: rows are (cough, not cough).
REFERENCE_COUGH_DETECTOR = ((677, 163, 24), (288, 802, 941))


@dataclass(frozen=True)
class ConfusionMatrix:
    """Integer counts with detected classes on rows and actual classes on columns."""

    counts: np.ndarray
    detected: tuple = CLASSES
    actual: tuple = CLASSES

    def __post_init__(self):
        c = np.array(self.counts)
        if c.ndim != 2 or c.shape != (len(self.detected), len(self.actual)):
            raise ValueError(f"counts of shape {c.shape} do not match {len(self.detected)}x{len(self.actual)} labels")
        if not np.issubdtype(c.dtype, np.integer):
            if not np.all(c == np.round(c)):
                raise ValueError("confusion counts must be integers")
            c = c.astype(np.int64)
        if np.any(c < 0):
            raise ValueError("confusion counts must be non-negative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def one_vs_rest(self, positive: int = 0) -> "ConfusionMatrix":
        """Collapse the actual classes of a 2-row matrix into ``positive`` vs the rest."""
        c = self.counts
        if c.shape[0] != 2:
            raise ValueError("one-vs-rest reduction needs a 2-row (detected positive / negative) matrix")
        pos = c[:, positive]
        rest = c.sum(axis=1) - pos
        name = self.actual[positive]
        return ConfusionMatrix(np.stack([pos, rest], axis=1), self.detected, (name, f"not_{name}"))

    def to_table(self, sep: str = "\t") -> str:
        """Printable table, detected on rows and actual on columns."""
        lines = [sep.join(["detected\\actual", *self.actual])]
        for name, row in zip(self.detected, self.counts):
            lines.append(sep.join([name, *(str(int(v)) for v in row)]))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {"detected": list(self.detected), "actual": list(self.actual), "counts": self.counts.tolist()}


@dataclass(frozen=True)
class EvalMetrics:
    accuracy: float
    macro_f1: float
    c_statistic: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(predictions, labels, classes: Sequence[str] = CLASSES) -> ConfusionMatrix:
    """Tally predictions against labels.

    ``predictions`` holds class indices or probability rows (argmax is taken).
    """
    pred = np.asarray(predictions)
    labels = np.asarray(labels, dtype=int)
    if pred.size == 0 or labels.size == 0:
        raise ValueError("cannot evaluate an empty prediction set")
    if pred.ndim == 2:
        pred = np.argmax(pred, axis=1)
    pred = pred.astype(int)
    if pred.shape != labels.shape:
        raise ValueError(f"{len(pred)} predictions for {len(labels)} labels")
    n = len(classes)
    if pred.min() < 0 or pred.max() >= n or labels.min() < 0 or labels.max() >= n:
        raise ValueError(f"class indices must lie in [0, {n})")
    counts = np.zeros((n, n), dtype=np.int64)
    np.add.at(counts, (pred, labels), 1)
    return ConfusionMatrix(counts, tuple(classes), tuple(classes))


def accuracy(cm: ConfusionMatrix) -> float:
    c = _square(cm)
    if c.sum() == 0:
        raise ValueError("empty confusion matrix")
    return float(np.trace(c) / c.sum())


def macro_f1(cm: ConfusionMatrix) -> float:
    """Unweighted mean of per-class F1; a class with no support and no predictions scores 0."""
    c = _square(cm)
    tp = np.diag(c).astype(float)
    fp = c.sum(axis=1) - tp
    fn = c.sum(axis=0) - tp
    denom = 2 * tp + fp + fn
    f1 = np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)
    return float(f1.mean())


def binary_auc(scores, positive) -> float:
    """Probability that a random positive outscores a random negative (ties count half)."""
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = len(positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    ranks = rankdata(scores)
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def c_statistic(probs, labels) -> float:
    """Macro average of one-vs-rest ROC areas over classes present in ``labels``.

    Classes with no positive (or no negative) example are left out of the mean.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    areas = []
    for c in range(probs.shape[1]):
        pos = labels == c
        if pos.any() and not pos.all():
            areas.append(binary_auc(probs[:, c], pos))
    if not areas:
        raise ValueError("c-statistic needs at least two classes in labels")
    return float(np.mean(areas))


def metrics(cm: ConfusionMatrix, probs=None, labels=None) -> EvalMetrics:
    """Accuracy and macro F1 from counts, plus the c-statistic when probabilities are given.

    A 2x3 matrix (binary detector scored against three actual classes) is
    first reduced to its positive-vs-rest 2x2 form.
    """
    if not isinstance(cm, ConfusionMatrix):
        cm = ConfusionMatrix(np.asarray(cm), *_default_labels(np.asarray(cm)))
    if cm.counts.shape[0] == 2 and cm.counts.shape[1] > 2:
        cm = cm.one_vs_rest(0)
    c_stat = None
    if probs is not None:
        if labels is None:
            raise ValueError("labels are required alongside probabilities")
        c_stat = c_statistic(probs, labels)
    return EvalMetrics(accuracy(cm), macro_f1(cm), c_stat)


def _square(cm: ConfusionMatrix) -> np.ndarray:
    c = cm.counts
    if c.shape[0] != c.shape[1]:
        raise ValueError(f"metric needs a square matrix, got {c.shape}; reduce it with one_vs_rest first")
    return c


def _default_labels(c: np.ndarray):
    if c.ndim != 2:
        raise ValueError("confusion matrix must be 2-d")
    rows, cols = c.shape
    actual = CLASSES if cols == len(CLASSES) else tuple(f"class{i}" for i in range(cols))
    if rows == cols:
        return actual, actual
    if rows == 2:
        return (actual[0], f"not_{actual[0]}"), actual
    raise ValueError(f"unsupported confusion shape {c.shape}")
