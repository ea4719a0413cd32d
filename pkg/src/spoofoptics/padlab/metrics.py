"""Presentation-attack metrics: APCER, BPCER, ACER and ROC operating points.

Convention: label 1 = live (bona fide), 0 = spoof (attack). Scores are
liveness scores, higher meaning more live. A sample is accepted as live when
its score is >= the decision threshold.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError

DEFAULT_FPRS = (1e-2, 1e-3, 1e-4)


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray  # descending, from +inf to -inf
    fpr: np.ndarray  # non-decreasing
    tpr: np.ndarray  # non-decreasing


@dataclass(frozen=True)
class Metrics:
    apcer: float
    bpcer: float
    acer: float
    tpr_at_fpr: dict = field(default_factory=dict)
    roc: RocCurve = None
    threshold: float = 0.5

    def report(self):
        lines = [
            f"threshold\t{self.threshold:.6g}",
            f"APCER\t{self.apcer:.6f}",
            f"BPCER\t{self.bpcer:.6f}",
            f"ACER\t{self.acer:.6f}",
        ]
        for fpr, tpr in sorted(self.tpr_at_fpr.items(), reverse=True):
            lines.append(f"TPR@FPR={fpr:g}\t{tpr:.6f}")
        return "\n".join(lines)


def roc_curve(positive, negative):
    """ROC of scores where ``positive`` should score high.

    Thresholds are +inf, the midpoints between consecutive distinct scores
    (descending) and -inf; at threshold t a sample is flagged positive when
    its score is strictly greater than t. Ties therefore never straddle a
    threshold.
    """
    pos = np.asarray(positive, dtype=np.float64)
    neg = np.asarray(negative, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ValidationError("ROC needs both positive and negative scores")
    distinct = np.unique(np.concatenate([pos, neg]))[::-1]
    mids = 0.5 * (distinct[:-1] + distinct[1:])
    thresholds = np.concatenate([[np.inf], mids, [-np.inf]])
    pos_sorted = np.sort(pos)
    neg_sorted = np.sort(neg)
    # count of scores > t via searchsorted on the ascending arrays
    tpr = (pos.size - np.searchsorted(pos_sorted, thresholds, side="right")) / pos.size
    fpr = (neg.size - np.searchsorted(neg_sorted, thresholds, side="right")) / neg.size
    return RocCurve(thresholds, fpr, tpr)


def tpr_at_fpr(positive, negative, target_fpr):
    """Largest TPR over thresholds whose FPR does not exceed ``target_fpr``."""
    roc = roc_curve(positive, negative)
    ok = roc.fpr <= target_fpr
    return float(roc.tpr[ok].max())


def error_rates(scores, labels, threshold):
    """(APCER, BPCER) at ``threshold`` for liveness scores."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    live = labels == 1
    spoof = labels == 0
    if not live.any() or not spoof.any():
        raise ValidationError("evaluation needs both live and spoof samples")
    accepted = scores >= threshold
    apcer = float(np.mean(accepted[spoof]))
    bpcer = float(np.mean(~accepted[live]))
    return apcer, bpcer


def evaluate_scores(scores, labels, threshold=0.5, fprs=DEFAULT_FPRS):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    apcer, bpcer = error_rates(scores, labels, threshold)
    live, spoof = scores[labels == 1], scores[labels == 0]
    roc = roc_curve(live, spoof)
    tprs = {f: float(roc.tpr[roc.fpr <= f].max()) for f in fprs}
    return Metrics(apcer, bpcer, 0.5 * (apcer + bpcer), tprs, roc, threshold)


def evaluate(model, inputs, labels, fprs=DEFAULT_FPRS):
    """Metrics of ``model`` (anything with ``score`` and ``threshold``)."""
    return evaluate_scores(model.score(inputs), labels, model.threshold, fprs)


def roc_table(roc):
    """gnuplot-friendly text: one 'fpr tpr threshold' row per operating point."""
    rows = ["# fpr\ttpr\tthreshold"]
    for f, t, th in zip(roc.fpr, roc.tpr, roc.thresholds):
        rows.append(f"{f:.9g}\t{t:.9g}\t{th:.9g}")
    return "\n".join(rows) + "\n"
