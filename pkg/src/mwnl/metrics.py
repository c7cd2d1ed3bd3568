"""Balanced accuracy, one-vs-rest sensitivity/specificity, AUC, crop averaging."""

import csv
import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DataError


class UndefinedClassError(ValueError):
    def __init__(self, classes):
        self.classes = tuple(classes)
        super().__init__(f"class(es) {list(self.classes)} have no true samples; recall is undefined")


def confusion_matrix(y_true, y_pred, num_classes):
    """Rows are true classes, columns predicted classes."""
    y_true = np.asarray(y_true, dtype=np.intp)
    y_pred = np.asarray(y_pred, dtype=np.intp)
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def merge(*cms):
    """Confusion matrices from separate shards simply add."""
    return np.sum(cms, axis=0)


def balanced_accuracy(cm):
    cm = np.asarray(cm)
    support = cm.sum(axis=1)
    empty = np.flatnonzero(support == 0)
    if empty.size:
        raise UndefinedClassError(empty.tolist())
    return float(np.mean(np.diag(cm) / support))


@dataclass
class ClassReport:
    sensitivity: np.ndarray  # nan where undefined
    specificity: np.ndarray
    avg_specificity: float
    undefined_sensitivity: tuple
    undefined_specificity: tuple


def class_report(cm):
    cm = np.asarray(cm, dtype=np.float64)
    total = cm.sum()
    tp = np.diag(cm)
    fn = cm.sum(axis=1) - tp
    fp = cm.sum(axis=0) - tp
    tn = total - tp - fn - fp
    with np.errstate(invalid="ignore", divide="ignore"):
        sens = np.where(tp + fn > 0, tp / (tp + fn), np.nan)
        spec = np.where(tn + fp > 0, tn / (tn + fp), np.nan)
    defined = spec[~np.isnan(spec)]
    return ClassReport(
        sensitivity=sens,
        specificity=spec,
        avg_specificity=float(defined.mean()) if defined.size else math.nan,
        undefined_sensitivity=tuple(np.flatnonzero(np.isnan(sens)).tolist()),
        undefined_specificity=tuple(np.flatnonzero(np.isnan(spec)).tolist()),
    )


def binary_auc(positive, scores):
    """Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 P(tie)."""
    positive = np.asarray(positive, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return math.nan
    ranks = rankdata(scores)
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass
class AucResult:
    per_class: np.ndarray  # nan for excluded classes
    mean: float
    excluded: tuple


def avg_auc(y_true, scores):
    """One-vs-rest AUC per class, averaged over classes that have both positives and negatives."""
    y_true = np.asarray(y_true, dtype=np.intp)
    scores = np.asarray(scores, dtype=np.float64)
    per_class = np.array([binary_auc(y_true == c, scores[:, c]) for c in range(scores.shape[1])])
    excluded = tuple(np.flatnonzero(np.isnan(per_class)).tolist())
    kept = per_class[~np.isnan(per_class)]
    return AucResult(per_class, float(kept.mean()) if kept.size else math.nan, excluded)


def aggregate_crops(crop_scores):
    """Elementwise mean of the per-crop score vectors (correctly rounded sums)."""
    arr = np.asarray(crop_scores, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("need a non-empty list of equal-length score vectors")
    return np.array([math.fsum(col) for col in arr.T]) / arr.shape[0]


def predicted_class(scores):
    return np.argmax(np.asarray(scores), axis=-1)


def report(y_true, scores):
    """Full metric block as an ordered ``key -> float`` mapping."""
    scores = np.asarray(scores, dtype=np.float64)
    c = scores.shape[1]
    cm = confusion_matrix(y_true, predicted_class(scores), c)
    out = OrderedDict()
    try:
        out["bacc"] = balanced_accuracy(cm)
    except UndefinedClassError:
        out["bacc"] = math.nan
    rep = class_report(cm)
    for i in range(c):
        out[f"sens_{i}"] = float(rep.sensitivity[i])
    for i in range(c):
        out[f"spec_{i}"] = float(rep.specificity[i])
    out["avg_spec"] = rep.avg_specificity
    auc = avg_auc(y_true, scores)
    for i in range(c):
        out[f"auc_{i}"] = float(auc.per_class[i])
    out["avg_auc"] = auc.mean
    return out


def format_report(values):
    return "".join(f"{k}={v:.9g}\n" for k, v in values.items())


def read_predictions(fh):
    """Rows ``sample_id, true_class, score_0..score_{C-1}``; optional header.

    Returns ``(ids, y_true, scores)`` in file order; ids may repeat (one row
    per crop).
    """
    ids, ys, rows = [], [], []
    width = None
    for lineno, row in enumerate(csv.reader(fh), start=1):
        row = [f.strip() for f in row]
        if not row or not any(row) or row[0].startswith("#"):
            continue
        if lineno == 1 and row[1:2] and not row[1].lstrip("-").isdigit():
            continue
        if len(row) < 3:
            raise DataError("expected sample_id, true_class and scores", line=lineno)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DataError(f"expected {width} fields, got {len(row)}", line=lineno)
        try:
            y = int(row[1])
            s = [float(v) for v in row[2:]]
        except ValueError as exc:
            raise DataError(f"malformed number ({exc})", line=lineno) from None
        if not 0 <= y < len(s):
            raise DataError(f"class {y} outside [0, {len(s)})", line=lineno)
        if not all(math.isfinite(v) for v in s):
            raise DataError("non-finite score", line=lineno)
        ids.append(row[0])
        ys.append(y)
        rows.append(s)
    if not ids:
        raise DataError("no prediction rows found")
    return ids, np.array(ys, dtype=np.intp), np.array(rows)


def group_crops(ids, y_true, scores, k_crops=None, average="probs"):
    """Collapse repeated sample ids into one averaged score vector each.

    ``average="logits"`` treats the scores as logits: they are averaged
    first and passed through a sigmoid afterwards. With ``"probs"`` the
    scores are averaged as given.
    """
    order, groups = [], {}
    for i, sid in enumerate(ids):
        if sid not in groups:
            groups[sid] = []
            order.append(sid)
        groups[sid].append(i)
    out_y, out_s = [], []
    for sid in order:
        idx = groups[sid]
        if k_crops is not None and len(idx) != k_crops:
            raise DataError(f"sample {sid!r} has {len(idx)} rows, expected {k_crops} crops")
        labels = set(y_true[idx].tolist())
        if len(labels) != 1:
            raise DataError(f"sample {sid!r} has conflicting true classes {sorted(labels)}")
        mean = aggregate_crops(scores[idx])
        if average == "logits":
            mean = 1.0 / (1.0 + np.exp(-mean))
        out_y.append(y_true[idx[0]])
        out_s.append(mean)
    return order, np.array(out_y, dtype=np.intp), np.array(out_s)
