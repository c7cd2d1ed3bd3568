import collections

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mwnl import datasets
from mwnl.datasets import FeatureDataset, Manifest
from mwnl.errors import DataError

HAM_CLASSES = ("MEL", "NV", "BCC", "AKIEC", "BKL", "DF", "VASC")
HAM_COUNTS = [1113, 6705, 514, 327, 1099, 115, 142]


def test_label_manifest():
    m = datasets.parse_manifest("path,label\nx.png,b\ny.png,a\n")
    assert m.num_classes == 2 and m.class_names == ("a", "b")
    assert m.entries == [("x.png", 1), ("y.png", 0)]


def test_onehot_row():
    m = datasets.parse_manifest("image,A,B,C\nimg1,0.0,1.0,0.0\n")
    assert m.entries == [("img1", 1)]


def test_multihot_row_reports_line():
    with pytest.raises(DataError, match="line 3"):
        datasets.parse_manifest("image,A,B,C\nimg1,0.0,1.0,0.0\nimg2,1.0,1.0,0.0\n")


def test_unknown_label_and_missing_file(tmp_path):
    with pytest.raises(DataError, match="line 2"):
        datasets.parse_manifest("x.png,a\ny.png,zz\n", class_names=("a", "b"))
    with pytest.raises(DataError):
        datasets.load_manifest(tmp_path / "nope.csv")


def _ham_manifest():
    rows = ["image," + ",".join(HAM_CLASSES)]
    k = 0
    for c, n in enumerate(HAM_COUNTS):
        flags = ",".join("1.0" if i == c else "0.0" for i in range(7))
        for _ in range(n):
            rows.append(f"ISIC_{k:07d},{flags}")
            k += 1
    return "\n".join(rows) + "\n"


def test_ham_counts():
    m = datasets.parse_manifest(_ham_manifest())
    assert datasets.class_stats(m).counts == tuple(HAM_COUNTS)


def test_empty_class_reported():
    m = Manifest([("a", 0), ("b", 0)], ("x", "y"))
    with pytest.raises(DataError, match="'y'"):
        datasets.class_stats(m)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from("pqrs"), min_size=1, max_size=60))
def test_counts_match_tally(labels):
    text = "".join(f"f{i}.png,{lab}\n" for i, lab in enumerate(labels))
    m = datasets.parse_manifest(text)
    tally = collections.Counter(labels)
    assert datasets.class_stats(m).counts == tuple(tally[n] for n in m.class_names)


def test_round_trip_both_layouts(tmp_path):
    for text in ("path,label\nx.png,b\ny.png,a\n", "x.png,b\ny.png,a\n", "image,A,B\ni1,1.0,0.0\ni2,0.0,1.0\n"):
        p = tmp_path / "m.csv"
        p.write_text(text)
        m = datasets.load_manifest(p)
        assert datasets.dump_manifest(m) == text
        assert m.resolve("x.png") == str(tmp_path / "x.png")


def test_split_half():
    m = Manifest([(f"s{i}", i % 2) for i in range(8)], ("a", "b"))
    tr, va = datasets.stratified_split(m, 0.5, seed=3)
    assert datasets.class_stats(tr).counts == (2, 2)
    assert datasets.class_stats(va).counts == (2, 2)


def test_split_rounding_and_minimums():
    labels = np.array([0] * 5 + [1] * 2 + [2] * 10)
    a, b = datasets.stratified_indices(labels, 0.5, 0)
    assert np.bincount(labels[a]).tolist() == [3, 1, 5]  # 2.5 rounds up
    a, b = datasets.stratified_indices(labels, 0.99, 0)
    assert np.bincount(labels[b], minlength=3).min() >= 1


def test_split_rejects_tiny_class():
    m = Manifest([("a", 0), ("b", 0), ("c", 1)], ("big", "tiny"))
    with pytest.raises(DataError, match="tiny"):
        datasets.stratified_split(m, 0.5, 0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(2, 30), min_size=1, max_size=6), st.floats(0.05, 0.95), st.integers(0, 99))
def test_split_is_partition(counts, frac, seed):
    entries = [(f"{c}_{j}", c) for c, n in enumerate(counts) for j in range(n)]
    m = Manifest(entries, [f"c{i}" for i in range(len(counts))])
    tr, va = datasets.stratified_split(m, frac, seed)
    assert set(tr.ids) | set(va.ids) == set(m.ids)
    assert not set(tr.ids) & set(va.ids)
    total = np.add(datasets.class_stats(tr).counts, datasets.class_stats(va).counts)
    assert total.tolist() == list(counts)
    again = datasets.stratified_split(m, frac, seed)
    assert again[0].ids == tr.ids


def test_feature_file_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    ds = FeatureDataset(rng.normal(size=(6, 3)), [0, 1, 2, 0, 1, 2], 3)
    p = tmp_path / "f.csv"
    datasets.write_features(p, ds)
    back = datasets.read_features(p)
    np.testing.assert_array_equal(back.x, ds.x)
    np.testing.assert_array_equal(back.y, ds.y)
    assert back.ids == ds.ids


def test_feature_file_errors(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("sample_id,label,f_0\na,0,1.0\nb,x,2.0\n")
    with pytest.raises(DataError, match="line 3"):
        datasets.read_features(p)
