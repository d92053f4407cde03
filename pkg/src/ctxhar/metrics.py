"""Classification metrics and discrete information measures (in bits)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _pair(truth, pred) -> tuple[np.ndarray, np.ndarray]:
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if truth.shape != pred.shape:
        raise ValueError(f"length mismatch: {truth.shape} vs {pred.shape}")
    if truth.size == 0:
        raise ValueError("cannot score empty label sequences")
    return truth, pred


def confusion_matrix(truth, pred, n_classes: int | None = None) -> np.ndarray:
    """``counts[true, predicted]``."""
    truth, pred = _pair(truth, pred)
    if n_classes is None:
        n_classes = int(max(truth.max(), pred.max())) + 1
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (truth, pred), 1)
    return cm


def accuracy(truth, pred) -> float:
    truth, pred = _pair(truth, pred)
    return float(np.mean(truth == pred))


@dataclass(frozen=True)
class F1Report:
    macro: float
    per_class: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    support: np.ndarray
    absent: tuple[int, ...]  # classes missing from both truth and prediction


def f1_report(truth, pred, n_classes: int) -> F1Report:
    cm = confusion_matrix(truth, pred, n_classes)
    tp = np.diag(cm).astype(np.float64)
    pred_tot = cm.sum(axis=0).astype(np.float64)
    true_tot = cm.sum(axis=1).astype(np.float64)
    precision = np.divide(tp, pred_tot, out=np.zeros_like(tp), where=pred_tot > 0)
    recall = np.divide(tp, true_tot, out=np.zeros_like(tp), where=true_tot > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    absent = tuple(int(c) for c in np.flatnonzero((pred_tot == 0) & (true_tot == 0)))
    return F1Report(float(f1.mean()), f1, precision, recall, true_tot.astype(np.int64), absent)


def macro_f1(truth, pred, n_classes: int, weighted: bool = False) -> float:
    """Unweighted mean per-class F1; ``weighted`` averages by class support.

    Classes absent from both sequences count as F1 = 0 (see ``f1_report``).
    """
    rep = f1_report(truth, pred, n_classes)
    if weighted:
        return float(np.sum(rep.per_class * rep.support) / rep.support.sum())
    return rep.macro


def entropy(dist=None, labels=None) -> float:
    """Shannon entropy in bits of a distribution or of a label sequence."""
    if (dist is None) == (labels is None):
        raise ValueError("pass exactly one of dist= or labels=")
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size == 0:
            raise ValueError("empty label sequence")
        _, counts = np.unique(labels, return_counts=True)
        p = counts / labels.size
    else:
        p = np.asarray(dist, dtype=np.float64)
        if p.size == 0:
            raise ValueError("empty distribution")
        if np.any(p < 0):
            raise ValueError("distribution has negative mass")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"distribution sums to {p.sum()}, not 1")
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def conditional_entropy(classes, steps) -> float:
    """``H(C | S) = sum_s p(s) H(C | S = s)`` from empirical frequencies."""
    classes, steps = _pair(classes, steps)
    total = 0.0
    for s in np.unique(steps):
        sel = steps == s
        total += sel.mean() * entropy(labels=classes[sel])
    return float(total)


def mutual_information(classes, steps) -> tuple[float, float, float]:
    """``(H(C), H(C|S), I(C;S))`` in bits."""
    classes, steps = _pair(classes, steps)
    h_c = entropy(labels=classes)
    h_cs = conditional_entropy(classes, steps)
    mi = h_c - h_cs
    # rounding can leave a tiny negative residue for independent variables
    return h_c, h_cs, max(mi, 0.0) if mi > -1e-12 else mi


def per_class_csv(report: F1Report, class_names=()) -> str:
    names = list(class_names) or [str(c) for c in range(len(report.per_class))]
    lines = ["class,precision,recall,f1,support,absent"]
    for c, name in enumerate(names):
        lines.append(f"{name},{float(report.precision[c])!r},{float(report.recall[c])!r},{float(report.per_class[c])!r},"
                     f"{int(report.support[c])},{int(c in report.absent)}")
    return "\n".join(lines) + "\n"


def confusion_csv(cm: np.ndarray, class_names=()) -> str:
    """Rows are true classes, columns predicted classes."""
    names = list(class_names) or [str(c) for c in range(cm.shape[0])]
    lines = ["true\\pred," + ",".join(names)]
    for name, row in zip(names, cm):
        lines.append(name + "," + ",".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"
