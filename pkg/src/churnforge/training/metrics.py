"""ROC and precision-recall curves.

Conventions: a sample is predicted positive when ``score >= threshold``.
Curves collapse tied scores to one operating point and carry a leading
(0, 0) / threshold +inf anchor. The trapezoidal ROC area is then exactly
the Mann-Whitney U statistic scaled to [0, 1] with ties counted half.
PR area uses step interpolation (the average-precision sum), so a constant
scorer earns exactly the positive rate.
"""

import numpy as np

from churnforge.errors import (
    DegenerateLabelsError,
    ShapeError,
    UndefinedCurveError,
)


def _validate(y_true, scores):
    y = np.asarray(y_true, dtype=np.float64).ravel()
    s = np.asarray(scores, dtype=np.float64).ravel()
    if y.size != s.size:
        raise ShapeError(f"labels ({y.size}) and scores ({s.size}) differ in length")
    if y.size == 0:
        raise UndefinedCurveError("cannot build a curve from zero samples")
    if not np.isfinite(s).all():
        raise UndefinedCurveError("scores contain non-finite values")
    if np.any((y != 0.0) & (y != 1.0)):
        raise DegenerateLabelsError("labels must be binary 0/1")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == y.size:
        raise DegenerateLabelsError(
            f"need both classes, got {n_pos} positives of {y.size}"
        )
    return y, s, n_pos


def _cut_points(y, s):
    """Cumulative TP/FP counts at each distinct-score cut, scores descending."""
    order = np.argsort(-s, kind="stable")
    ys = y[order]
    ss = s[order]
    tps = np.cumsum(ys)
    fps = np.cumsum(1.0 - ys)
    last_of_score = np.r_[np.nonzero(np.diff(ss))[0], ys.size - 1]
    return tps[last_of_score], fps[last_of_score], ss[last_of_score]


def roc_curve(y_true, scores):
    """Returns (fpr, tpr, thresholds), thresholds descending from +inf."""
    y, s, n_pos = _validate(y_true, scores)
    n_neg = y.size - n_pos
    tps, fps, cuts = _cut_points(y, s)
    fpr = np.r_[0.0, fps / n_neg]
    tpr = np.r_[0.0, tps / n_pos]
    thresholds = np.r_[np.inf, cuts]
    return fpr, tpr, thresholds


def auc(fpr, tpr):
    """Trapezoidal area under a curve given as x, y arrays."""
    fpr = np.asarray(fpr, dtype=np.float64)
    tpr = np.asarray(tpr, dtype=np.float64)
    if fpr.shape != tpr.shape or fpr.ndim != 1 or fpr.size < 2:
        raise ShapeError("auc expects two equal-length 1-D arrays of >= 2 points")
    return float(np.trapezoid(tpr, fpr))


def roc_auc(y_true, scores):
    fpr, tpr, _ = roc_curve(y_true, scores)
    return auc(fpr, tpr)


def pr_curve(y_true, scores):
    """Returns (precision, recall, thresholds).

    Points run from the (recall 0, precision 1) anchor toward recall 1,
    one point per distinct score, thresholds descending.
    """
    y, s, n_pos = _validate(y_true, scores)
    tps, fps, cuts = _cut_points(y, s)
    precision = np.r_[1.0, tps / (tps + fps)]
    recall = np.r_[0.0, tps / n_pos]
    thresholds = np.r_[np.inf, cuts]
    return precision, recall, thresholds


def pr_auc(precision, recall):
    """Step-interpolated area: sum of delta-recall times right precision."""
    precision = np.asarray(precision, dtype=np.float64)
    recall = np.asarray(recall, dtype=np.float64)
    if precision.shape != recall.shape or precision.ndim != 1 or precision.size < 2:
        raise ShapeError("pr_auc expects two equal-length 1-D arrays of >= 2 points")
    return float(np.sum(np.diff(recall) * precision[1:]))


def average_precision(y_true, scores):
    precision, recall, _ = pr_curve(y_true, scores)
    return pr_auc(precision, recall)
