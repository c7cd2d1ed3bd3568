import io
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mwnl import metrics
from mwnl.errors import DataError


def brute_auc(pos_scores, neg_scores):
    total = 0.0
    for p, n in itertools.product(pos_scores, neg_scores):
        total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(pos_scores) * len(neg_scores))


def test_balanced_accuracy_examples():
    assert metrics.balanced_accuracy(np.diag([5, 3, 9])) == 1.0
    one_col = np.zeros((4, 4), int)
    one_col[:, 2] = [3, 1, 7, 2]
    assert metrics.balanced_accuracy(one_col) == 0.25
    assert metrics.balanced_accuracy([[8, 2], [3, 7]]) == pytest.approx(0.75, abs=1e-15)


def test_balanced_accuracy_empty_row_names_class():
    with pytest.raises(metrics.UndefinedClassError, match=r"\[1\]"):
        metrics.balanced_accuracy([[3, 0], [0, 0]])


def test_class_report_examples():
    rep = metrics.class_report(np.diag([4, 4, 4]))
    assert np.all(rep.sensitivity == 1.0) and np.all(rep.specificity == 1.0)
    rep = metrics.class_report([[8, 2], [3, 7]])
    assert rep.specificity[0] == pytest.approx(0.7, abs=1e-15)
    assert rep.sensitivity[1] == pytest.approx(0.7, abs=1e-15)
    assert rep.avg_specificity == pytest.approx(0.75)


def test_class_report_flags_single_class_dataset():
    rep = metrics.class_report([[6, 0], [0, 0]])
    assert math.isnan(rep.specificity[0])
    assert rep.undefined_specificity == (0,)
    assert rep.undefined_sensitivity == (1,)


def test_confusion_matrix_and_merge():
    y = [0, 0, 1, 2, 2, 2]
    p = [0, 1, 1, 2, 0, 2]
    cm = metrics.confusion_matrix(y, p, 3)
    assert cm.tolist() == [[1, 1, 0], [0, 1, 0], [1, 0, 2]]
    a = metrics.confusion_matrix(y[:3], p[:3], 3)
    b = metrics.confusion_matrix(y[3:], p[3:], 3)
    np.testing.assert_array_equal(metrics.merge(a, b), cm)


def test_auc_examples():
    assert metrics.binary_auc([1, 1, 0, 0], [0.9, 0.4, 0.6, 0.1]) == 0.75
    assert metrics.binary_auc([1, 0, 1, 0], [0.3] * 4) == 0.5
    assert metrics.binary_auc([1, 1, 0], [0.8, 0.9, 0.1]) == 1.0
    assert math.isnan(metrics.binary_auc([1, 1], [0.2, 0.3]))


def test_avg_auc_perfect_and_excluded():
    y = np.array([0, 1, 2, 0, 1])
    scores = np.eye(3)[y]
    assert metrics.avg_auc(y, scores).mean == 1.0
    res = metrics.avg_auc(np.array([0, 1, 0, 1]), np.random.default_rng(0).random((4, 3)))
    assert res.excluded == (2,)
    assert math.isnan(res.per_class[2])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=2, max_size=30), st.integers(0, 10_000))
def test_auc_matches_pair_count_oracle(raw, seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, len(raw)).astype(bool)
    scores = np.array(raw, float)  # small integer range forces ties
    got = metrics.binary_auc(labels, scores)
    if labels.all() or not labels.any():
        assert math.isnan(got)
    else:
        assert got == pytest.approx(brute_auc(scores[labels], scores[~labels]), abs=1e-12)


def test_auc_invariant_to_monotone_transform():
    rng = np.random.default_rng(1)
    y = rng.integers(0, 4, 300)
    s = rng.random((300, 4))
    a = metrics.avg_auc(y, s).mean
    assert metrics.avg_auc(y, np.exp(3 * s) - 7).mean == pytest.approx(a, abs=1e-15)


def test_bacc_row_scale_invariance():
    cm = np.array([[8, 2, 1], [3, 7, 0], [1, 1, 5]])
    scaled = cm.copy()
    scaled[1] *= 13
    scaled[2] *= 4
    assert metrics.balanced_accuracy(scaled) == pytest.approx(metrics.balanced_accuracy(cm), abs=1e-15)


@pytest.mark.parametrize("c", [2, 5, 7])
def test_random_predictor_bacc_is_one_over_c(c):
    rng = np.random.default_rng(c)
    y = rng.integers(0, c, 100_000)
    p = rng.integers(0, c, 100_000)
    assert abs(metrics.balanced_accuracy(metrics.confusion_matrix(y, p, c)) - 1 / c) < 0.01


def test_aggregate_crops():
    v = np.array([0.2, 0.5, 0.3])
    np.testing.assert_array_equal(metrics.aggregate_crops([v] * 16), v)
    np.testing.assert_array_equal(metrics.aggregate_crops([[1, 0], [0, 1]]), [0.5, 0.5])
    rng = np.random.default_rng(2)
    crops = rng.random((16, 7))
    oracle = [math.fsum(col) / 16 for col in crops.T]
    np.testing.assert_allclose(metrics.aggregate_crops(crops), oracle, rtol=0, atol=1e-12)
    np.testing.assert_allclose(metrics.aggregate_crops(crops[rng.permutation(16)]), oracle, atol=1e-12)
    with pytest.raises(ValueError):
        metrics.aggregate_crops([])


def test_report_keys_and_format():
    y = np.array([0, 1, 1, 0])
    s = np.array([[0.9, 0.1], [0.2, 0.8], [0.6, 0.4], [0.7, 0.3]])
    rep = metrics.report(y, s)
    assert list(rep) == ["bacc", "sens_0", "sens_1", "spec_0", "spec_1", "avg_spec", "auc_0", "auc_1", "avg_auc"]
    assert rep["bacc"] == 0.75
    text = metrics.format_report(rep)
    assert text.splitlines()[0] == "bacc=0.75"


def test_read_predictions_and_grouping():
    text = "sample_id,true_class,s0,s1\n" + "".join(
        f"a,0,{0.6 + i / 100},{0.4 - i / 100}\n" for i in range(4)) + "b,1,0.3,0.7\n" * 4
    ids, y, s = metrics.read_predictions(io.StringIO(text))
    assert len(ids) == 8
    gid, gy, gs = metrics.group_crops(ids, y, s, k_crops=4)
    assert gid == ["a", "b"] and gy.tolist() == [0, 1]
    np.testing.assert_allclose(gs[1], [0.3, 0.7])
    with pytest.raises(DataError):
        metrics.group_crops(ids, y, s, k_crops=16)


def test_read_predictions_reports_line():
    with pytest.raises(DataError, match="line 2"):
        metrics.read_predictions(io.StringIO("a,0,0.1,0.9\nb,1,nan,0.2\n"))
