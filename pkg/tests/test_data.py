import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rf2nn.data import (Dataset, FeatureStats, compute_feature_stats, limit_per_class, load_csv,
                        make_synthetic, normalize, save_csv, split_dataset, zero_fraction)


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


# load_csv

def test_load_csv_basic(tmp_path):
    ds = load_csv(write(tmp_path, "x,y,label\n0,1,a\n1,0,b\n2,2,a\n3,1,b\n"), "label")
    assert ds.feature_count == 2 and ds.class_count == 2 and len(ds) == 4
    assert ds.labels.tolist() == [0, 1, 0, 1]


def test_load_csv_encoding_is_lexicographic(tmp_path):
    ds = load_csv(write(tmp_path, "x,label\n0,b\n1,a\n2,b\n"))
    assert ds.class_names == ["a", "b"]
    assert ds.labels.tolist() == [1, 0, 1]


def test_load_csv_integer_labels_sorted_numerically(tmp_path):
    ds = load_csv(write(tmp_path, "x,label\n0,10\n1,9\n2,10\n"))
    assert ds.class_names == ["9", "10"]
    assert ds.labels.tolist() == [1, 0, 1]


def test_load_csv_label_by_index(tmp_path):
    ds = load_csv(write(tmp_path, "label,x\na,0\nb,1\n"), 0)
    assert ds.features.ravel().tolist() == [0.0, 1.0]


def test_load_csv_blank_cell(tmp_path):
    with pytest.raises(ValueError, match="non-numeric feature"):
        load_csv(write(tmp_path, "x,y,label\n0,,a\n1,2,b\n"))


def test_load_csv_single_class(tmp_path):
    with pytest.raises(ValueError):
        load_csv(write(tmp_path, "x,label\n0,a\n1,a\n"))


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "nope.csv")


def test_csv_round_trip(tmp_path, blobs):
    save_csv(blobs, tmp_path / "b.csv")
    back = load_csv(tmp_path / "b.csv")
    np.testing.assert_array_equal(back.features, blobs.features)
    np.testing.assert_array_equal(back.labels, blobs.labels)


# split_dataset

def test_split_exact_fractions():
    ds = make_synthetic("blobs", 100, seed=0)
    parts = split_dataset(ds, (0.6, 0.2, 0.2), seed=7)
    assert [len(p) for p in parts] == [60, 20, 20]


def test_split_deterministic():
    ds = make_synthetic("blobs", 100, seed=0)
    a = split_dataset(ds, seed=7)
    b = split_dataset(ds, seed=7)
    for p, q in zip(a, b):
        np.testing.assert_array_equal(p.features, q.features)


def test_split_minority_class_in_every_part():
    X = np.arange(100, dtype=float)[:, None]
    y = np.r_[np.zeros(10), np.ones(90)].astype(int)
    parts = split_dataset(Dataset(X, y, 2), (0.6, 0.2, 0.2), seed=0)
    for p in parts:
        assert (p.labels == 0).sum() >= 1


def test_split_tiny_class_keeps_train_sample():
    X = np.arange(12, dtype=float)[:, None]
    y = np.r_[[0], np.ones(11)].astype(int)
    train, _, _ = split_dataset(Dataset(X, y, 2), seed=3)
    assert (train.labels == 0).sum() == 1


def test_split_rejects_bad_fractions(blobs):
    with pytest.raises(ValueError):
        split_dataset(blobs, (0.5, 0.2, 0.2))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(3, 80), c=st.integers(2, 4), seed=st.integers(0, 2**31))
def test_split_is_a_partition(n, c, seed):
    X = np.arange(n, dtype=float)[:, None]
    y = np.arange(n) % c
    parts = split_dataset(Dataset(X, y, c), seed=seed)
    rows = np.concatenate([p.features[:, 0] for p in parts])
    assert sorted(rows.tolist()) == list(range(n))


# limit_per_class

def test_limit_per_class():
    ds = Dataset(np.arange(100.0)[:, None], np.arange(100) % 2, 2)
    assert limit_per_class(ds, 20).class_counts().tolist() == [20, 20]
    small = Dataset(np.arange(10.0)[:, None], np.arange(10) % 2, 2)
    assert limit_per_class(small, 20).class_counts().tolist() == [5, 5]
    assert len(limit_per_class(ds, 1)) == 2


def test_limit_per_class_deterministic(blobs):
    a = limit_per_class(blobs, 7, seed=4)
    b = limit_per_class(blobs, 7, seed=4)
    np.testing.assert_array_equal(a.features, b.features)


# make_synthetic

def test_synthetic_balance():
    ds = make_synthetic("blobs", 200, 2, 0.5, seed=1)
    assert ds.class_counts().tolist() == [100, 100]


@pytest.mark.parametrize("kind", ["blobs", "two_moons", "xor_grid"])
def test_synthetic_deterministic_and_balanced(kind):
    a = make_synthetic(kind, 101, 3, 0.2, seed=5)
    b = make_synthetic(kind, 101, 3, 0.2, seed=5)
    np.testing.assert_array_equal(a.features, b.features)
    counts = a.class_counts()
    assert counts.max() - counts.min() <= 1


def test_synthetic_errors():
    with pytest.raises(ValueError):
        make_synthetic("two_moons", 10, n_features=1)
    with pytest.raises(ValueError):
        make_synthetic("spirals", 10)


def test_noiseless_blobs_separable_by_shallow_tree():
    from rf2nn.forest import TreeTrainParams, predict_forest, train_tree

    ds = make_synthetic("blobs", 200, 2, 0.0, seed=0, n_classes=3)
    tree = train_tree(ds, TreeTrainParams(max_depth=3, bootstrap=False, max_features=2))
    from rf2nn.forest import RandomForest
    rf = RandomForest([tree], 3, 2)
    assert (predict_forest(rf, ds.features).argmax(1) == ds.labels).all()


# feature stats and normalization

def test_feature_stats_hand_values():
    s = compute_feature_stats(np.array([[1.0], [2.0], [3.0]]))
    assert s.f_mean[0] == 2.0
    assert s.f_std[0] == pytest.approx(np.sqrt(2 / 3), abs=1e-15)
    assert (s.f_min[0], s.f_max[0], s.f_absmax[0]) == (1.0, 3.0, 3.0)


def test_feature_stats_empty():
    with pytest.raises(ValueError):
        compute_feature_stats(np.zeros((0, 2)))


def test_feature_stats_json_round_trip(tmp_path, blobs):
    s = compute_feature_stats(blobs.features)
    s.save(tmp_path / "s.json")
    t = FeatureStats.load(tmp_path / "s.json")
    for name in FeatureStats.FIELDS:
        np.testing.assert_array_equal(getattr(s, name), getattr(t, name))


def test_normalize_examples():
    X = np.array([[-4.0, 0.0], [4.0, 0.0]])
    s = compute_feature_stats(X)
    np.testing.assert_array_equal(normalize(s.f_mean, s), [0.0, 0.0])
    assert normalize([2.0, 0.0], s)[0] == 0.5
    # constant-zero feature maps to 0 whatever the input stats say
    assert normalize([0.0, 0.0], s)[1] == 0.0


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 4)),
              elements=st.floats(-1e6, 1e6)))
def test_normalized_training_data_within_two(X):
    s = compute_feature_stats(X)
    assert (s.f_min <= s.f_mean).all() and (s.f_mean <= s.f_max).all()
    assert np.abs(normalize(X, s)).max() <= 2.0 + 1e-12


def test_zero_fraction():
    assert zero_fraction(np.array([[0.0, 1.0], [0.0, 0.0]])) == 0.75
