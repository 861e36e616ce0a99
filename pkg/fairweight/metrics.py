"""Group fairness gaps and utility scores for binary classifiers.

Signed gaps (DP, FPR) are privileged minus unprivileged. A conditional rate
over an empty cell evaluates to 0 and appends a warning instead of raising.
"""

import logging

import numpy as np

from fairweight.classifier import predict_proba
from fairweight.errors import Empty, SingleClass, SingleGroup
from fairweight.models import Confusion, ConfusionByGroup, EncodedDataset, MetricReport, ModelParams

logger = logging.getLogger(__name__)


def _arrays(*values) -> list[np.ndarray]:
    arrays = [np.asarray(v).astype(int) for v in values]
    if len({len(v) for v in arrays}) != 1:
        raise ValueError("Prediction, label and group vectors must have equal length")
    return arrays


def _require_groups(a: np.ndarray) -> None:
    if not (np.any(a == 0) and np.any(a == 1)):
        raise SingleGroup("Both sensitive groups must be present", stage="evaluate")


def _rate(numerator: int, denominator: int, what: str, warnings: list[str] | None) -> float:
    if denominator == 0:
        message = f"{what} undefined (empty cell), counted as 0"
        logger.warning(message)
        if warnings is not None:
            warnings.append(message)
        return 0.0
    return numerator / denominator


def confusion_by_group(y_pred, y_true, a) -> ConfusionByGroup:
    y_pred, y_true, a = _arrays(y_pred, y_true, a)
    tables = []
    for group in (0, 1):
        p, t = y_pred[a == group], y_true[a == group]
        tables.append(
            Confusion(
                tp=int(np.sum((p == 1) & (t == 1))),
                fp=int(np.sum((p == 1) & (t == 0))),
                tn=int(np.sum((p == 0) & (t == 0))),
                fn=int(np.sum((p == 0) & (t == 1))),
            )
        )
    return ConfusionByGroup(group_0=tables[0], group_1=tables[1])


def delta_dp(y_pred, a) -> float:
    """P(Y^=1 | A=1) - P(Y^=1 | A=0)."""
    y_pred, a = _arrays(y_pred, a)
    _require_groups(a)
    return float(np.mean(y_pred[a == 1]) - np.mean(y_pred[a == 0]))


def _fpr(c: Confusion, group: int, warnings) -> float:
    return _rate(c.fp, c.fp + c.tn, f"FPR of group {group}", warnings)


def _tpr(c: Confusion, group: int, warnings) -> float:
    return _rate(c.tp, c.tp + c.fn, f"TPR of group {group}", warnings)


def delta_fpr(y_pred, y_true, a, warnings: list[str] | None = None) -> float:
    """P(Y^=1 | A=1, Y=0) - P(Y^=1 | A=0, Y=0)."""
    cm = confusion_by_group(y_pred, y_true, a)
    return _fpr(cm.group_1, 1, warnings) - _fpr(cm.group_0, 0, warnings)


def delta_tpr(y_pred, y_true, a, warnings: list[str] | None = None) -> float:
    cm = confusion_by_group(y_pred, y_true, a)
    return _tpr(cm.group_1, 1, warnings) - _tpr(cm.group_0, 0, warnings)


def delta_eodds(y_pred, y_true, a, warnings: list[str] | None = None) -> float:
    """Mean of the absolute FPR and TPR gaps."""
    return 0.5 * (abs(delta_fpr(y_pred, y_true, a, warnings)) + abs(delta_tpr(y_pred, y_true, a, warnings)))


def delta_err(y_pred, y_true, a) -> float:
    """|P(Y^ != Y | A=1) - P(Y^ != Y | A=0)|."""
    y_pred, y_true, a = _arrays(y_pred, y_true, a)
    _require_groups(a)
    wrong = y_pred != y_true
    return float(abs(np.mean(wrong[a == 1]) - np.mean(wrong[a == 0])))


def accuracy(y_pred, y_true) -> float:
    y_pred, y_true = _arrays(y_pred, y_true)
    if len(y_true) == 0:
        raise Empty("Accuracy of an empty prediction vector", stage="evaluate")
    return float(np.mean(y_pred == y_true))


def f1(y_pred, y_true, warnings: list[str] | None = None) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0 or undefined."""
    y_pred, y_true = _arrays(y_pred, y_true)
    if len(y_true) == 0:
        raise Empty("F1 of an empty prediction vector", stage="evaluate")
    tp = int(np.sum((y_pred == 1) & (y_true == 1)))
    precision = _rate(tp, int(np.sum(y_pred == 1)), "precision", warnings)
    recall = _rate(tp, int(np.sum(y_true == 1)), "recall", warnings)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def roc_curve(scores, y_true) -> tuple[np.ndarray, np.ndarray]:
    """FPR and TPR at every distinct threshold, from (0, 0) to (1, 1)."""
    scores = np.asarray(scores, dtype=float)
    y_true = np.asarray(y_true).astype(int)
    positives = int(np.sum(y_true == 1))
    negatives = len(y_true) - positives
    if positives == 0 or negatives == 0:
        raise SingleClass("ROC needs both classes", stage="evaluate")

    order = np.argsort(-scores, kind="mergesort")
    s, t = scores[order], y_true[order]
    # last index of each run of tied scores
    cut = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tp = np.cumsum(t)[cut]
    fp = (cut + 1) - tp
    tpr = np.r_[0.0, tp / positives]
    fpr = np.r_[0.0, fp / negatives]
    return fpr, tpr


def roc_auc(scores, y_true) -> float:
    """Trapezoidal area under the threshold-swept ROC."""
    fpr, tpr = roc_curve(scores, y_true)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def metric_report(y_pred, y_true, scores, a) -> MetricReport:
    warnings: list[str] = []
    return MetricReport(
        delta_dp=delta_dp(y_pred, a),
        delta_fpr=delta_fpr(y_pred, y_true, a, warnings),
        delta_eodds=delta_eodds(y_pred, y_true, a, warnings),
        delta_err=delta_err(y_pred, y_true, a),
        acc=accuracy(y_pred, y_true),
        f1=f1(y_pred, y_true, warnings),
        auc=roc_auc(scores, y_true),
        warnings=list(dict.fromkeys(warnings)),
    )


def evaluate(m: ModelParams, ds: EncodedDataset) -> MetricReport:
    batch = predict_proba(m, ds.X)
    return metric_report(batch.labels, ds.y, batch.probs, ds.a)


def improvement(before: MetricReport, after: MetricReport) -> dict[str, float]:
    """Relative reduction of each |fairness gap| and absolute change of each utility score."""
    result = {}
    for name in ("dp", "fpr", "eodds", "err"):
        base = abs(before.fairness(name))
        result[f"delta_{name}"] = (base - abs(after.fairness(name))) / base if base > 0 else 0.0
    for name in ("acc", "f1", "auc"):
        result[name] = after.utility(name) - before.utility(name)
    return result
