"""Threshold and ranking metrics for binary link prediction."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata


@dataclass
class MetricsReport:
    f1: float
    precision: float
    recall: float
    auc: float
    tp: int
    fp: int
    tn: int
    fn: int
    fingerprint: dict = field(default_factory=dict)

    def __post_init__(self):
        check_f1_consistency(self.f1, self.precision, self.recall)

    def to_dict(self) -> dict:
        return asdict(self)


def _validate(probs, labels) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(probs, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if p.size == 0:
        raise ValueError("metrics need at least one prediction")
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: {p.size} predictions vs {y.size} labels")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be binary")
    return p, y.astype(np.int64)


def f1_from(precision: float, recall: float) -> float:
    s = precision + recall
    return 2.0 * precision * recall / s if s > 0 else 0.0


def check_f1_consistency(f1: float, precision: float, recall: float, tol: float = 1e-12) -> None:
    if abs(f1 - f1_from(precision, recall)) > tol:
        raise AssertionError(f"inconsistent F1 {f1} for precision {precision}, recall {recall}")


def compute_threshold_metrics(probs, labels, threshold: float = 0.5) -> tuple[float, float, float, dict]:
    """(f1, precision, recall, counts) with predictions ``prob >= threshold``."""
    p, y = _validate(probs, labels)
    pred = p >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    tn = int(np.sum(~pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return f1_from(precision, recall), precision, recall, {"tp": tp, "fp": fp, "tn": tn, "fn": fn}


def compute_auc(probs, labels) -> float:
    """Mann-Whitney ROC-AUC from mid-ranks; ties count one half."""
    p, y = _validate(probs, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative labels")
    ranks = rankdata(p, method="average")
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def evaluate_scores(probs, labels, threshold: float = 0.5, fingerprint: dict | None = None) -> MetricsReport:
    f1, pre, rec, c = compute_threshold_metrics(probs, labels, threshold)
    return MetricsReport(f1, pre, rec, compute_auc(probs, labels), c["tp"], c["fp"], c["tn"], c["fn"],
                         dict(fingerprint or {}))
