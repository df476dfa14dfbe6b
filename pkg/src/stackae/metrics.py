"""Confusion-matrix criteria, ROC/AUC and fold aggregation."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

from .errors import DataError, EmptyList, LengthMismatch, SingleClass

METRIC_FIELDS = ("accuracy", "error_rate", "rmse_prob", "sensitivity", "specificity",
                 "precision", "mcc", "f1", "auc")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise DataError(f"{name} must be a nonnegative integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def swapped(self) -> "ConfusionMatrix":
        """The same counts seen from the other class."""
        return ConfusionMatrix(tp=self.tn, fp=self.fn, tn=self.tp, fn=self.fp)


@dataclass(frozen=True)
class MetricsReport:
    """Evaluation metrics; ``None`` marks a metric as undefined.

    ``undefined_counts`` is only populated by :func:`aggregate_folds` and
    records, per metric, how many folds had it undefined.
    """
    accuracy: float
    error_rate: float
    rmse_prob: Optional[float] = None
    sensitivity: Optional[float] = None
    specificity: Optional[float] = None
    precision: Optional[float] = None
    mcc: Optional[float] = None
    f1: Optional[float] = None
    auc: Optional[float] = None
    undefined_counts: dict = field(default_factory=dict, compare=True)

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def confusion(labels, preds, positive_class=1) -> ConfusionMatrix:
    """Counts relative to ``positive_class``; other classes count as negative."""
    labels = np.asarray(labels)
    preds = np.asarray(preds)
    if labels.ndim != 1 or labels.shape != preds.shape:
        raise LengthMismatch(f"labels {labels.shape} and predictions {preds.shape} differ")
    if labels.size == 0:
        raise LengthMismatch("cannot build a confusion matrix from empty inputs")
    t = labels == positive_class
    p = preds == positive_class
    return ConfusionMatrix(tp=int(np.sum(t & p)), fp=int(np.sum(~t & p)),
                           tn=int(np.sum(~t & ~p)), fn=int(np.sum(t & ~p)))


def _ratio(num, den):
    return num / den if den else None


def rmse_prob(probs, labels) -> float:
    P = np.asarray(probs, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    if P.ndim != 2 or P.shape[0] != y.shape[0]:
        raise LengthMismatch(f"probabilities {P.shape} do not match {y.shape[0]} labels")
    onehot = np.zeros_like(P)
    onehot[np.arange(y.size), y] = 1.0
    return math.sqrt(float(np.mean(np.sum((P - onehot) ** 2, axis=1))))


def metrics_report(cm: ConfusionMatrix, probs=None, labels=None, positive_class=1) -> MetricsReport:
    """The seven table criteria plus optional probability RMSE and AUC.

    ``probs`` is N x C and requires ``labels``. AUC uses the column of
    ``positive_class`` and is left undefined when only one class is present.
    """
    total = cm.total
    if total == 0:
        raise DataError("confusion matrix is empty")
    accuracy = (cm.tp + cm.tn) / total
    sens = _ratio(cm.tp, cm.tp + cm.fn)
    spec = _ratio(cm.tn, cm.tn + cm.fp)
    prec = _ratio(cm.tp, cm.tp + cm.fp)
    if sens is None or prec is None or prec + sens == 0:
        f1 = 0.0
    else:
        f1 = 2 * prec * sens / (prec + sens)
    den = (cm.tp + cm.fp) * (cm.tp + cm.fn) * (cm.tn + cm.fp) * (cm.tn + cm.fn)
    mcc = (cm.tp * cm.tn - cm.fp * cm.fn) / math.sqrt(den) if den else 0.0
    rp = auc = None
    if probs is not None:
        if labels is None:
            raise DataError("probability scores need labels")
        rp = rmse_prob(probs, labels)
        y = np.asarray(labels)
        if np.any(y == positive_class) and np.any(y != positive_class):
            _, auc = roc_auc(np.asarray(probs, dtype=float)[:, positive_class], y == positive_class)
    return MetricsReport(accuracy=accuracy, error_rate=1.0 - accuracy, rmse_prob=rp,
                         sensitivity=sens, specificity=spec, precision=prec,
                         mcc=mcc, f1=f1, auc=auc)


def roc_auc(scores, labels):
    """ROC curve over all distinct thresholds and its trapezoid area.

    ``labels`` are truthy for positives. Tied scores move the curve
    diagonally, so the area equals the Mann-Whitney statistic with ties
    counted as one half.
    """
    s = np.asarray(scores, dtype=float)
    pos = np.asarray(labels).astype(bool)
    if s.ndim != 1 or s.shape != pos.shape:
        raise LengthMismatch(f"scores {s.shape} and labels {pos.shape} differ")
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC needs both positive and negative samples")
    order = np.argsort(-s, kind="stable")
    s, pos = s[order], pos[order]
    last = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tps = np.cumsum(pos)[last]
    fps = (last + 1) - tps
    tpr = np.r_[0, tps] / n_pos
    fpr = np.r_[0, fps] / n_neg
    # integer numerator keeps the area exact up to one division
    area = float(np.sum(np.diff(np.r_[0, fps]) * (np.r_[0, tps][:-1] + tps))) / (2.0 * n_pos * n_neg)
    return list(zip(fpr.tolist(), tpr.tolist())), area


def aggregate_folds(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Per-metric mean over the folds where that metric is defined."""
    reports = list(reports)
    if not reports:
        raise EmptyList("no fold reports to aggregate")
    values, undefined = {}, {}
    for name in METRIC_FIELDS:
        defined = [getattr(r, name) for r in reports if getattr(r, name) is not None]
        missing = len(reports) - len(defined)
        if missing:
            undefined[name] = missing
        if not defined:
            values[name] = None
        elif all(v == defined[0] for v in defined):
            values[name] = defined[0]
        else:
            values[name] = math.fsum(defined) / len(defined)
    values["error_rate"] = 1.0 - values["accuracy"]
    return MetricsReport(**values, undefined_counts=undefined)
