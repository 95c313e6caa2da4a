"""Per-week ROC/PR evaluation reports, with JSON/CSV/SVG writers."""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from churnforge.errors import DataError, ShapeError
from churnforge.fileio import atomic_write_text
from churnforge.training.loop import predict_logits
from churnforge.training.metrics import auc, pr_auc, pr_curve, roc_curve

_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728")


def _sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class WeekEval:
    """Curves and summary statistics for one label week (1-based)."""

    week: int
    n: int
    n_positive: int
    positive_rate: float
    auc: float = None
    pr_area: float = None
    roc: tuple = None  # (fpr, tpr, thresholds)
    pr: tuple = None  # (precision, recall, thresholds)
    skipped: bool = False
    reason: str = ""


@dataclass
class EvalReport:
    n_samples: int
    weeks: list = field(default_factory=list)

    def aucs(self):
        return tuple(w.auc for w in self.weeks)

    def to_dict(self):
        return {
            "n_samples": self.n_samples,
            "weeks": [
                {
                    "week": w.week,
                    "n": w.n,
                    "n_positive": w.n_positive,
                    "positive_rate": w.positive_rate,
                    "auc": w.auc,
                    "pr_area": w.pr_area,
                    "skipped": w.skipped,
                    "reason": w.reason,
                }
                for w in self.weeks
            ],
        }


def evaluate_scores(y_true, scores):
    """Build an EvalReport from (n, W) label and score matrices.

    Weeks where only one class is present are flagged as skipped rather
    than given a default AUC.
    """
    y = np.asarray(y_true, dtype=np.float64)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 2:
        raise ShapeError(f"labels {y.shape} and scores {s.shape} must match, 2-D")
    if y.shape[0] == 0:
        raise DataError("cannot evaluate an empty sample set")
    report = EvalReport(n_samples=y.shape[0])
    for w in range(y.shape[1]):
        col = y[:, w]
        n_pos = int(col.sum())
        week = WeekEval(
            week=w + 1,
            n=col.size,
            n_positive=n_pos,
            positive_rate=n_pos / col.size,
        )
        if col.min() == col.max():
            week.skipped = True
            week.reason = "single-class labels"
        else:
            fpr, tpr, roc_thr = roc_curve(col, s[:, w])
            precision, recall, pr_thr = pr_curve(col, s[:, w])
            week.auc = auc(fpr, tpr)
            week.pr_area = pr_auc(precision, recall)
            week.roc = (fpr, tpr, roc_thr)
            week.pr = (precision, recall, pr_thr)
        report.weeks.append(week)
    return report


def evaluate(model, samples, batch_size=512):
    """Infer-mode evaluation of a deep model on WindowSamples."""
    if not samples:
        raise DataError("cannot evaluate an empty sample set")
    X = np.stack([smp.X for smp in samples]).astype(np.float64)
    Y = np.stack([smp.Y for smp in samples]).astype(np.float64)
    probs = _sigmoid(predict_logits(model, X, batch_size=batch_size))
    return evaluate_scores(Y, probs)


def _curve_csv(header, columns):
    lines = [header]
    for row in zip(*columns):
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def _decimate(x, y, max_points=512):
    if x.size <= max_points:
        return x, y
    idx = np.unique(np.linspace(0, x.size - 1, max_points).round().astype(int))
    return x[idx], y[idx]


def render_curves_svg(curves, title, xlabel, ylabel, diagonal=False):
    """Render unit-square curves as a standalone SVG string.

    ``curves`` is a list of (label, x, y) with x, y in [0, 1].
    """
    width, height = 480, 400
    left, top = 56.0, 34.0
    plot_w, plot_h = 380.0, 300.0

    def px(v):
        return left + v * plot_w

    def py(v):
        return top + (1.0 - v) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left + plot_w / 2:.1f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        x, y = px(tick), py(tick)
        parts.append(
            f'<line x1="{x:.1f}" y1="{py(0):.1f}" x2="{x:.1f}" y2="{py(1):.1f}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<line x1="{px(0):.1f}" y1="{y:.1f}" x2="{px(1):.1f}" y2="{y:.1f}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x:.1f}" y="{py(0) + 16:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{tick:g}</text>'
        )
        parts.append(
            f'<text x="{px(0) - 6:.1f}" y="{y + 3:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{tick:g}</text>'
        )
    parts.append(
        f'<rect x="{px(0):.1f}" y="{py(1):.1f}" width="{plot_w:.1f}" '
        f'height="{plot_h:.1f}" fill="none" stroke="black" stroke-width="1"/>'
    )
    if diagonal:
        parts.append(
            f'<line x1="{px(0):.1f}" y1="{py(0):.1f}" x2="{px(1):.1f}" '
            f'y2="{py(1):.1f}" stroke="#999999" stroke-width="1" '
            f'stroke-dasharray="4 3"/>'
        )
    for i, (label, x, y) in enumerate(curves):
        x, y = _decimate(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        ly = top + 14 * i
        parts.append(
            f'<line x1="{left + plot_w - 108:.1f}" y1="{ly + 8:.1f}" '
            f'x2="{left + plot_w - 88:.1f}" y2="{ly + 8:.1f}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{left + plot_w - 84:.1f}" y="{ly + 11:.1f}" '
            f'font-family="sans-serif" font-size="10">{label}</text>'
        )
    parts.append(
        f'<text x="{left + plot_w / 2:.1f}" y="{height - 8}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xlabel}</text>'
    )
    parts.append(
        f'<text x="16" y="{top + plot_h / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {top + plot_h / 2:.1f})">{ylabel}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def save_report(report, out_dir, svg=True):
    """Write report.json, per-week curve CSVs, and optional SVG plots.

    Returns the list of paths written. All writes are atomic; weeks that
    were skipped produce no curve files.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    path = os.path.join(out_dir, "report.json")
    atomic_write_text(path, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    written.append(path)

    roc_curves, pr_curves = [], []
    for week in report.weeks:
        if week.skipped:
            continue
        fpr, tpr, roc_thr = week.roc
        path = os.path.join(out_dir, f"roc_w{week.week}.csv")
        atomic_write_text(path, _curve_csv("threshold,fpr,tpr", (roc_thr, fpr, tpr)))
        written.append(path)
        precision, recall, pr_thr = week.pr
        path = os.path.join(out_dir, f"pr_w{week.week}.csv")
        atomic_write_text(
            path, _curve_csv("threshold,recall,precision", (pr_thr, recall, precision))
        )
        written.append(path)
        roc_curves.append((f"week {week.week} (AUC {week.auc:.3f})", fpr, tpr))
        pr_curves.append((f"week {week.week} (area {week.pr_area:.3f})", recall, precision))

    if svg and roc_curves:
        path = os.path.join(out_dir, "roc.svg")
        atomic_write_text(
            path,
            render_curves_svg(
                roc_curves, "ROC by label week", "false positive rate",
                "true positive rate", diagonal=True,
            ),
        )
        written.append(path)
        path = os.path.join(out_dir, "pr.svg")
        atomic_write_text(
            path,
            render_curves_svg(pr_curves, "Precision-recall by label week",
                              "recall", "precision"),
        )
        written.append(path)
    return written
