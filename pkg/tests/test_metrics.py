import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _oracles import pairwise_auc
from stackae.errors import DataError, EmptyList, LengthMismatch, SingleClass
from stackae.metrics import (
    METRIC_FIELDS,
    ConfusionMatrix,
    MetricsReport,
    aggregate_folds,
    confusion,
    metrics_report,
    rmse_prob,
    roc_auc,
)

counts = st.integers(0, 200)


def test_confusion_examples():
    cm = confusion([1, 1, 0, 0, 1, 0], [1, 0, 0, 1, 1, 0], 1)
    assert (cm.tp, cm.fn, cm.fp, cm.tn) == (2, 1, 1, 2)
    same = confusion([0, 1, 1], [0, 1, 1])
    assert same.fp == same.fn == 0
    with pytest.raises(LengthMismatch):
        confusion([], [])
    with pytest.raises(LengthMismatch):
        confusion([0, 1], [0])


def test_one_vs_rest_reduction():
    cm = confusion([0, 1, 2, 2], [2, 1, 2, 0], positive_class=2)
    assert (cm.tp, cm.fp, cm.fn, cm.tn) == (1, 1, 1, 1)


def test_report_arithmetic():
    r = metrics_report(ConfusionMatrix(tp=3, fp=1, tn=4, fn=2))
    assert r.precision == 0.75 and r.sensitivity == 0.6
    assert r.f1 == pytest.approx(2 / 3, abs=1e-15)
    assert metrics_report(ConfusionMatrix(5, 5, 5, 5)).mcc == 0.0
    p = metrics_report(ConfusionMatrix(tp=7, fp=0, tn=3, fn=0))
    assert (p.accuracy, p.precision, p.sensitivity, p.specificity, p.f1, p.mcc) == (1, 1, 1, 1, 1, 1)


def test_zero_denominator_conventions():
    r = metrics_report(ConfusionMatrix(tp=0, fp=0, tn=5, fn=3))
    assert r.precision is None
    assert r.f1 == 0.0
    assert r.mcc == 0.0
    assert r.sensitivity == 0.0
    with pytest.raises(DataError):
        metrics_report(ConfusionMatrix(0, 0, 0, 0))


def test_rmse_prob_and_auc_from_probs():
    P = np.array([[0.9, 0.1], [0.2, 0.8], [0.6, 0.4]])
    y = np.array([0, 1, 1])
    want = math.sqrt((0.02 + 0.08 + 0.72) / 3)
    assert rmse_prob(P, y) == pytest.approx(want, rel=1e-12)
    r = metrics_report(confusion(y, P.argmax(1)), P, y)
    assert r.rmse_prob == pytest.approx(want, rel=1e-12)
    assert r.auc == 1.0
    single = metrics_report(confusion([1, 1], [1, 0]), P[:2], [1, 1])
    assert single.auc is None


@settings(max_examples=200, deadline=None)
@given(counts, counts, counts, counts)
def test_report_properties(tp, fp, tn, fn):
    if tp + fp + tn + fn == 0:
        return
    cm = ConfusionMatrix(tp, fp, tn, fn)
    r = metrics_report(cm)
    assert r.accuracy + r.error_rate == 1.0
    assert -1 - 1e-12 <= r.mcc <= 1 + 1e-12
    for name in ("accuracy", "sensitivity", "specificity", "precision", "f1"):
        v = getattr(r, name)
        assert v is None or 0 <= v <= 1
    if fp == fn == 0 and tp > 0 and tn > 0:
        assert r.mcc == 1.0
    if tp == tn == 0 and fp > 0 and fn > 0:
        assert r.mcc == -1.0
    if abs(r.mcc) == 1.0:
        assert (fp == fn == 0) or (tp == tn == 0)
    s = metrics_report(cm.swapped())
    assert (s.sensitivity, s.specificity) == (r.specificity, r.sensitivity)
    assert s.accuracy == r.accuracy
    assert abs(s.mcc) == pytest.approx(abs(r.mcc), abs=1e-15)


def test_swapping_labels_matches_swapped_matrix():
    y = [1, 0, 1, 1, 0, 0, 1]
    p = [1, 1, 0, 1, 0, 0, 0]
    assert confusion(y, p, 0) == confusion(y, p, 1).swapped()


def test_auc_examples():
    _, a = roc_auc([0.9, 0.8, 0.3, 0.1], [1, 1, 0, 0])
    assert a == 1.0
    curve, a = roc_auc([0.5] * 6, [1, 0, 1, 0, 0, 1])
    assert a == 0.5 and curve == [(0.0, 0.0), (1.0, 1.0)]
    with pytest.raises(SingleClass):
        roc_auc([0.1, 0.2], [1, 1])


def test_auc_matches_pairwise_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = 30
        s = np.round(rng.uniform(size=n), 1)  # rounding forces ties
        y = rng.integers(0, 2, n)
        if y.min() == y.max():
            continue
        curve, a = roc_auc(s, y)
        assert abs(a - pairwise_auc(s, y)) <= 1e-12
        assert curve[0] == (0.0, 0.0) and curve[-1] == (1.0, 1.0)
        f = [c[0] for c in curve]
        t = [c[1] for c in curve]
        assert f == sorted(f) and t == sorted(t)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=4, max_size=25), st.integers(0, 2**32 - 1))
def test_auc_monotone_transform_invariance(raw, seed):
    y = np.random.default_rng(seed).integers(0, 2, len(raw))
    if y.min() == y.max():
        return
    s = np.asarray(raw, dtype=float)
    c1, a1 = roc_auc(s, y)
    c2, a2 = roc_auc(np.exp(2 * s) - 7, y)
    assert c1 == c2 and a1 == a2


def report(acc, **kw):
    base = dict(accuracy=acc, error_rate=1 - acc, rmse_prob=None, sensitivity=0.5, specificity=0.5,
                precision=0.5, mcc=0.0, f1=0.5, auc=None)
    base.update(kw)
    return MetricsReport(**base)


def test_aggregate_conventions():
    r = metrics_report(ConfusionMatrix(3, 1, 4, 2))
    same = aggregate_folds([r, r, r])
    assert all(getattr(same, f) == getattr(r, f) for f in METRIC_FIELDS)
    agg = aggregate_folds([report(0.8), report(0.9)])
    assert agg.accuracy == pytest.approx(0.85, abs=1e-15)
    assert agg.accuracy + agg.error_rate == 1.0
    agg = aggregate_folds([report(0.8, precision=None), report(0.8, precision=0.2), report(0.8, precision=0.4)])
    assert agg.precision == pytest.approx(0.3, abs=1e-15)
    assert agg.undefined_counts == {"precision": 1, "rmse_prob": 3, "auc": 3}
    assert agg.auc is None
    with pytest.raises(EmptyList):
        aggregate_folds([])


def test_report_dict_round_trip():
    r = metrics_report(ConfusionMatrix(3, 1, 4, 2))
    d = r.as_dict()
    assert set(METRIC_FIELDS) <= set(d)
    assert MetricsReport.from_dict(d) == r
