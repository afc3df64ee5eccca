import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rdf2rec.metrics import (MetricsReport, check_f1_consistency, compute_auc,
                             compute_threshold_metrics, evaluate_scores, f1_from)


def auc_oracle(probs, labels):
    pos = [p for p, y in zip(probs, labels) if y == 1]
    neg = [p for p, y in zip(probs, labels) if y == 0]
    wins = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in pos for b in neg)
    return wins / (len(pos) * len(neg))


def random_instance(rng):
    n = int(rng.integers(2, 201))
    labels = rng.integers(0, 2, size=n)
    labels[0], labels[1] = 0, 1
    # coarse grid so that ties are common
    probs = rng.integers(0, int(rng.integers(2, 30)), size=n) / 30.0
    return probs, labels


def test_auc_examples():
    assert compute_auc([0.9, 0.8, 0.3, 0.1], [1, 1, 0, 0]) == 1.0
    assert compute_auc([0.1, 0.2, 0.3, 0.4], [0, 1, 0, 1]) == 0.75
    assert compute_auc([0.4] * 6, [0, 1, 0, 1, 1, 0]) == 0.5


def test_auc_oracle_100_instances():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        p, y = random_instance(rng)
        assert compute_auc(p, y) == auc_oracle(p, y)


def test_auc_single_class_error():
    with pytest.raises(ValueError):
        compute_auc([0.1, 0.2], [1, 1])
    with pytest.raises(ValueError):
        compute_auc([], [])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_auc_monotone_invariance(seed):
    rng = np.random.default_rng(seed)
    p, y = random_instance(rng)
    a, b = rng.uniform(0.1, 3.0), rng.uniform(-2, 2)
    for f in (lambda x: a * x + b, lambda x: np.exp(3 * x), lambda x: x ** 3 + x, np.arctan):
        assert compute_auc(f(p), y) == compute_auc(p, y)


def test_perfect_threshold_metrics():
    f1, pre, rec, c = compute_threshold_metrics([0.9, 0.7, 0.2, 0.1], [1, 1, 0, 0])
    assert f1 == pre == rec == 1.0
    assert c == {"tp": 2, "fp": 0, "tn": 2, "fn": 0}


def test_no_positive_predictions():
    f1, pre, rec, _ = compute_threshold_metrics([0.1, 0.2], [1, 0])
    assert (f1, pre, rec) == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("pre,rec,f1", [(0.899, 0.731, 0.806), (0.932, 0.823, 0.874),
                                        (0.927, 0.901, 0.914)])
def test_f1_formula_reproduces_table(pre, rec, f1):
    assert abs(f1_from(pre, rec) - f1) <= 0.0005


def test_confusion_oracle_100_instances():
    rng = np.random.default_rng(7)
    for _ in range(100):
        p, y = random_instance(rng)
        thr = float(rng.choice([0.5, rng.uniform(0.05, 0.95)]))
        f1, pre, rec, c = compute_threshold_metrics(p, y, thr)
        tp = fp = tn = fn = 0
        for prob, label in zip(p, y):
            if prob >= thr:
                tp, fp = tp + (label == 1), fp + (label == 0)
            else:
                fn, tn = fn + (label == 1), tn + (label == 0)
        assert c == {"tp": tp, "fp": fp, "tn": tn, "fn": fn}
        assert pre == (tp / (tp + fp) if tp + fp else 0.0)
        assert rec == (tp / (tp + fn) if tp + fn else 0.0)


def test_report_enforces_f1_consistency():
    with pytest.raises(AssertionError):
        MetricsReport(0.9, 0.5, 0.5, 0.7, 1, 1, 1, 1)
    check_f1_consistency(0.0, 0.0, 0.0)


def test_evaluate_scores_fingerprint():
    r = evaluate_scores([0.9, 0.1, 0.6, 0.4], [1, 0, 0, 1], fingerprint={"seed": 3})
    assert r.fingerprint == {"seed": 3} and r.auc == 0.75
    assert r.to_dict()["tp"] == 1


def test_label_validation():
    with pytest.raises(ValueError):
        compute_threshold_metrics([0.1, 0.2], [0, 2])
    with pytest.raises(ValueError):
        compute_threshold_metrics([0.1], [0, 1])
