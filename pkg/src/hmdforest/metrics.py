"""Evaluation quantities: macro-AUC from ordered pairs, precision/recall/F1,
subset and label-wise accuracy, ROC point export.

The per-label AUC counts a (positive, negative) pair as correctly ordered
when score(pos) >= score(neg), ties included.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScoredLabelSet:
    """Real scores and boolean truths, both n x l."""

    scores: np.ndarray
    truths: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores)
        t = np.asarray(self.truths)
        if s.shape != t.shape:
            raise ValueError(f"shape mismatch: scores {s.shape} vs truths {t.shape}")
        if s.size and not np.isfinite(s).all():
            raise ValueError("scores contain non-finite values")


def _as_2d(a) -> np.ndarray:
    a = np.asarray(a)
    return a[:, None] if a.ndim == 1 else a


def label_auc(scores, truths) -> float:
    """Single-label AUC: fraction of (pos, neg) pairs with score_pos >= score_neg."""
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(truths, dtype=bool)
    pos = s[t]
    neg = s[~t]
    if pos.size == 0 or neg.size == 0:
        raise ValueError("label has a single class; AUC undefined")
    neg_sorted = np.sort(neg)
    # pairs with s_neg <= s_pos, ties counted as ordered
    good = np.searchsorted(neg_sorted, pos, side="right").sum()
    return float(good) / (pos.size * neg.size)


def macro_auc(scored: ScoredLabelSet, return_per_label: bool = False):
    """Unweighted mean of per-label AUC; degenerate labels are excluded with
    a warning, and all-degenerate input raises."""
    s = _as_2d(scored.scores).astype(np.float64)
    t = _as_2d(scored.truths).astype(bool)
    per_label: list[float] = []
    excluded: list[int] = []
    for j in range(s.shape[1]):
        col = t[:, j]
        if col.all() or not col.any():
            excluded.append(j)
            per_label.append(float("nan"))
            continue
        per_label.append(label_auc(s[:, j], col))
    if excluded:
        warnings.warn(
            f"labels {excluded} are degenerate (single class) and were "
            "excluded from macro-AUC",
            stacklevel=2,
        )
    valid = [v for v in per_label if not np.isnan(v)]
    if not valid:
        raise ValueError("no label has both positive and negative instances")
    value = float(np.mean(valid))
    if return_per_label:
        return value, per_label, excluded
    return value


@dataclass(frozen=True)
class MetricsReport:
    subset_accuracy: float
    labelwise_accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    macro_auc: float | None
    per_label_precision: tuple[float, ...]
    per_label_recall: tuple[float, ...]
    per_label_auc: tuple[float, ...] | None
    support: tuple[int, ...]
    excluded_labels: tuple[int, ...] = ()

    def scalars(self) -> dict[str, float]:
        out = {
            "subset_accuracy": self.subset_accuracy,
            "labelwise_accuracy": self.labelwise_accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
        }
        if self.macro_auc is not None:
            out["macro_auc"] = self.macro_auc
        return out


def classification_report(predictions, truths, scores=None) -> MetricsReport:
    """Build a MetricsReport from boolean predictions (and optional scores).

    Per-label precision = TP/(TP+FP) with 0/0 -> 0, recall analogous; macro
    values are unweighted label means; subset accuracy requires the whole
    row to match; label-wise accuracy averages per-cell correctness. AUC
    fields are filled only when scores are given.
    """
    p = _as_2d(predictions).astype(bool)
    t = _as_2d(truths).astype(bool)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: predictions {p.shape} vs truths {t.shape}")
    n, l = p.shape
    tp = (p & t).sum(axis=0).astype(np.float64)
    fp = (p & ~t).sum(axis=0).astype(np.float64)
    fn = (~p & t).sum(axis=0).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        prec = np.where(tp + fp > 0, tp / (tp + fp), 0.0)
        rec = np.where(tp + fn > 0, tp / (tp + fn), 0.0)
        f1 = np.where(prec + rec > 0, 2 * prec * rec / (prec + rec), 0.0)
    subset = float((p == t).all(axis=1).mean()) if n else 0.0
    labelwise = float((p == t).mean()) if n else 0.0

    auc_value = None
    per_auc = None
    excluded: tuple[int, ...] = ()
    if scores is not None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                auc_value, per_label, exc = macro_auc(
                    ScoredLabelSet(_as_2d(scores), t), return_per_label=True
                )
                per_auc = tuple(per_label)
                excluded = tuple(exc)
            except ValueError:
                auc_value, per_auc = None, None
                excluded = tuple(range(l))
    return MetricsReport(
        subset_accuracy=subset,
        labelwise_accuracy=labelwise,
        macro_precision=float(prec.mean()) if l else 0.0,
        macro_recall=float(rec.mean()) if l else 0.0,
        macro_f1=float(f1.mean()) if l else 0.0,
        macro_auc=auc_value,
        per_label_precision=tuple(float(x) for x in prec),
        per_label_recall=tuple(float(x) for x in rec),
        per_label_auc=per_auc,
        support=tuple(int(x) for x in t.sum(axis=0)),
        excluded_labels=excluded,
    )


def roc_points(scores, truths) -> list[tuple[float, float]]:
    """(fpr, tpr) points over descending distinct thresholds, from (0,0) to (1,1)."""
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(truths, dtype=bool)
    n_pos = int(t.sum())
    n_neg = t.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes present")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    t_sorted = t[order]
    tps = np.cumsum(t_sorted)
    fps = np.cumsum(~t_sorted)
    # last index of each distinct-threshold block
    last = np.flatnonzero(np.append(s_sorted[1:] != s_sorted[:-1], True))
    points = [(0.0, 0.0)]
    for i in last:
        points.append((float(fps[i]) / n_neg, float(tps[i]) / n_pos))
    return points


def trapezoid_area(points) -> float:
    """Area under a piecewise-linear (fpr, tpr) curve."""
    xs = np.array([p[0] for p in points])
    ys = np.array([p[1] for p in points])
    trapezoid = getattr(np, "trapezoid", None) or np.trapz  # numpy < 2.0
    return float(trapezoid(ys, xs))


def report_tsv(report: MetricsReport, label_names=None) -> str:
    """Render a report as TSV: scalar block then per-label block."""
    lines = ["metric\tvalue"]
    for k, v in report.scalars().items():
        lines.append(f"{k}\t{v!r}")
    names = label_names or [str(j) for j in range(len(report.per_label_precision))]
    lines.append("label\tprecision\trecall\tauc\tsupport")
    for j, name in enumerate(names):
        auc = ""
        if report.per_label_auc is not None:
            a = report.per_label_auc[j]
            auc = "" if np.isnan(a) else repr(a)
        lines.append(
            f"{name}\t{report.per_label_precision[j]!r}"
            f"\t{report.per_label_recall[j]!r}\t{auc}\t{report.support[j]}"
        )
    if report.excluded_labels:
        lines.append("excluded\t" + ",".join(str(j) for j in report.excluded_labels))
    return "\n".join(lines) + "\n"


def report_table(report: MetricsReport, label_names=None) -> str:
    """Column-aligned plain-text rendering for terminal output."""
    names = list(label_names or (str(j) for j in range(len(report.per_label_precision))))
    rows = [("label", "precision", "recall", "auc", "support")]
    for j, name in enumerate(names):
        auc = "-"
        if report.per_label_auc is not None and not np.isnan(report.per_label_auc[j]):
            auc = f"{report.per_label_auc[j]:.4f}"
        rows.append((
            name,
            f"{report.per_label_precision[j]:.4f}",
            f"{report.per_label_recall[j]:.4f}",
            auc,
            str(report.support[j]),
        ))
    widths = [max(len(r[c]) for r in rows) for c in range(5)]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in rows]
    lines.append("")
    for key, value in report.scalars().items():
        lines.append(f"{key}: {value:.4f}")
    return "\n".join(lines) + "\n"


def roc_tsv(points) -> str:
    lines = ["fpr\ttpr"]
    for fpr, tpr in points:
        lines.append(f"{fpr!r}\t{tpr!r}")
    return "\n".join(lines) + "\n"
