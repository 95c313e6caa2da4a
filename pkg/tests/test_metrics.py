"""Curve metrics against independent oracles.

The oracle for both curves is a literal confusion-matrix sweep: for every
threshold, classify ``score >= threshold`` as positive and count TP/FP/FN
directly. The AUC oracle is the O(n^2) Mann-Whitney pairwise statistic.
"""

import numpy as np
import pytest

from churnforge.errors import DegenerateLabelsError, ShapeError, UndefinedCurveError
from churnforge.training.metrics import (
    auc,
    average_precision,
    pr_auc,
    pr_curve,
    roc_auc,
    roc_curve,
)


def mann_whitney_auc(y, s):
    """P(score_pos > score_neg) + 0.5 * P(tie), by explicit pairing."""
    pos = s[y == 1]
    neg = s[y == 0]
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (pos.size * neg.size)


def confusion_at(y, s, threshold):
    pred = s >= threshold
    tp = np.sum(pred & (y == 1))
    fp = np.sum(pred & (y == 0))
    fn = np.sum(~pred & (y == 1))
    tn = np.sum(~pred & (y == 0))
    return tp, fp, fn, tn


class TestRocCurve:
    """Every ROC point must be a real confusion-matrix operating point."""

    def test_points_match_confusion_sweep(self):
        rng = np.random.default_rng(0)
        y = (rng.random(300) < 0.35).astype(np.float64)
        s = np.round(rng.normal(size=300), 1)  # coarse scores force ties
        fpr, tpr, thr = roc_curve(y, s)
        assert thr[0] == np.inf and fpr[0] == 0 and tpr[0] == 0
        for f, t, c in zip(fpr[1:], tpr[1:], thr[1:]):
            tp, fp, fn, tn = confusion_at(y, s, c)
            np.testing.assert_allclose(t, tp / (tp + fn), atol=1e-12)
            np.testing.assert_allclose(f, fp / (fp + tn), atol=1e-12)

    def test_curve_is_monotone_and_ends_at_one(self):
        rng = np.random.default_rng(1)
        y = (rng.random(200) < 0.5).astype(np.float64)
        s = rng.normal(size=200)
        fpr, tpr, _ = roc_curve(y, s)
        assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)
        assert fpr[-1] == 1.0 and tpr[-1] == 1.0

    def test_one_point_per_distinct_score(self):
        y = np.array([0, 1, 0, 1, 1, 0], dtype=np.float64)
        s = np.array([0.3, 0.3, 0.3, 0.7, 0.7, 0.1])
        fpr, tpr, thr = roc_curve(y, s)
        assert len(thr) == 4  # +inf anchor plus 3 distinct scores


class TestAucEqualsMannWhitney:
    """Trapezoidal ROC area is the tie-aware pairwise-win probability."""

    def test_random_instances(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            n = int(rng.integers(5, 200))
            y = np.zeros(n)
            y[: int(rng.integers(1, n))] = 1.0
            rng.shuffle(y)
            s = np.round(rng.normal(size=n), int(rng.integers(0, 3)))
            np.testing.assert_allclose(
                roc_auc(y, s), mann_whitney_auc(y, s), atol=1e-9
            )

    def test_perfect_and_reversed_ranking(self):
        y = np.array([0.0, 0, 0, 1, 1])
        s = np.array([0.1, 0.2, 0.3, 0.8, 0.9])
        assert roc_auc(y, s) == 1.0
        assert roc_auc(y, -s) == 0.0

    def test_constant_scores_give_half(self):
        y = np.array([0.0, 1, 0, 1, 1, 0])
        s = np.full(6, 0.42)
        np.testing.assert_allclose(roc_auc(y, s), 0.5, atol=1e-12)


class TestPrCurve:
    """PR points, step-area convention, and the constant-score identity."""

    def test_points_match_confusion_sweep(self):
        rng = np.random.default_rng(2)
        y = (rng.random(250) < 0.2).astype(np.float64)
        s = np.round(rng.normal(size=250), 1)
        precision, recall, thr = pr_curve(y, s)
        assert precision[0] == 1.0 and recall[0] == 0.0
        for p, r, c in zip(precision[1:], recall[1:], thr[1:]):
            tp, fp, fn, _ = confusion_at(y, s, c)
            np.testing.assert_allclose(p, tp / (tp + fp), atol=1e-12)
            np.testing.assert_allclose(r, tp / (tp + fn), atol=1e-12)

    def test_recall_reaches_one(self):
        rng = np.random.default_rng(3)
        y = (rng.random(100) < 0.4).astype(np.float64)
        s = rng.normal(size=100)
        _, recall, _ = pr_curve(y, s)
        assert recall[-1] == 1.0

    def test_constant_scorer_area_is_positive_rate(self):
        """One operating point at (recall 1, precision = base rate)."""
        rng = np.random.default_rng(4)
        y = (rng.random(400) < 0.15).astype(np.float64)
        s = np.zeros(400)
        np.testing.assert_allclose(average_precision(y, s), y.mean(), atol=1e-12)

    def test_perfect_scorer_area_is_one(self):
        y = np.r_[np.zeros(10), np.ones(5)]
        s = np.r_[np.zeros(10), np.ones(5)]
        np.testing.assert_allclose(average_precision(y, s), 1.0, atol=1e-12)

    def test_step_area_equals_ap_sum(self):
        """pr_auc reproduces sum over positives of precision-at-that-recall."""
        rng = np.random.default_rng(5)
        y = (rng.random(120) < 0.3).astype(np.float64)
        s = rng.normal(size=120)  # distinct scores: classic AP formula applies
        order = np.argsort(-s)
        ys = y[order]
        n_pos = ys.sum()
        ap = 0.0
        tp = 0
        for k, label in enumerate(ys, start=1):
            if label == 1:
                tp += 1
                ap += tp / k
        ap /= n_pos
        np.testing.assert_allclose(average_precision(y, s), ap, atol=1e-12)


class TestValidation:
    """Degenerate inputs fail loudly, not silently."""

    def test_single_class_raises(self):
        with pytest.raises(DegenerateLabelsError):
            roc_auc(np.ones(5), np.arange(5.0))
        with pytest.raises(DegenerateLabelsError):
            roc_auc(np.zeros(5), np.arange(5.0))

    def test_non_binary_labels_raise(self):
        with pytest.raises(DegenerateLabelsError):
            roc_auc(np.array([0.0, 0.5, 1.0]), np.arange(3.0))

    def test_empty_and_mismatched_raise(self):
        with pytest.raises(UndefinedCurveError):
            roc_curve(np.array([]), np.array([]))
        with pytest.raises(ShapeError):
            roc_curve(np.array([0.0, 1.0]), np.array([0.5]))

    def test_non_finite_scores_raise(self):
        with pytest.raises(UndefinedCurveError):
            roc_curve(np.array([0.0, 1.0]), np.array([0.5, np.nan]))

    def test_auc_needs_two_points(self):
        with pytest.raises(ShapeError):
            auc(np.array([0.0]), np.array([0.0]))
        with pytest.raises(ShapeError):
            pr_auc(np.array([1.0]), np.array([0.0]))
