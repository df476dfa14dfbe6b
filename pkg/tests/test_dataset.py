import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stackae.dataset import (
    BINARY_FEATURES,
    CONTINUOUS_FEATURES,
    Dataset,
    SynthSpec,
    kfold_split,
    load_csv,
    normalize_apply,
    normalize_fit,
    save_csv,
    synth_generate,
)
from stackae.errors import (
    BadFoldCount,
    BadSpec,
    ConstantFeature,
    DataError,
    DimensionMismatch,
    MalformedRow,
    MissingFile,
    MissingValue,
    SingleClass,
    UnknownLabelColumn,
)


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_first_appearance_classes(tmp_path):
    p = write(tmp_path, "a,b,label\n1,2,pos\n3,4,neg\n5,6,pos\n7,8,neg\n")
    ds = load_csv(p, "label")
    assert ds.class_names == ("pos", "neg")
    assert ds.n_classes == 2
    assert ds.labels.tolist() == [0, 1, 0, 1]
    assert ds.feature_names == ("a", "b")
    np.testing.assert_array_equal(ds.features, [[1, 2], [3, 4], [5, 6], [7, 8]])


def test_label_column_may_sit_anywhere(tmp_path):
    ds = load_csv(write(tmp_path, "y,a\nno,1\nyes,2\n"), "y")
    assert ds.feature_names == ("a",)
    assert ds.class_names == ("no", "yes")


def test_unknown_label_column(tmp_path):
    with pytest.raises(UnknownLabelColumn):
        load_csv(write(tmp_path, "a,b\n1,2\n3,4\n"), "label")


def test_missing_file(tmp_path):
    with pytest.raises(MissingFile):
        load_csv(tmp_path / "nope.csv", "label")


def test_wrong_cell_count_reports_line(tmp_path):
    with pytest.raises(MalformedRow) as exc:
        load_csv(write(tmp_path, "a,label\n1,x\n2\n3,y\n"), "label")
    assert exc.value.line == 3


def test_unparseable_cell(tmp_path):
    with pytest.raises(MalformedRow) as exc:
        load_csv(write(tmp_path, "a,label\n1,x\nabc,y\n"), "label")
    assert exc.value.line == 3


@pytest.mark.parametrize("cell", ["", "NA"])
def test_missing_values_rejected(tmp_path, cell):
    with pytest.raises(MissingValue):
        load_csv(write(tmp_path, f"a,b,label\n1,2,x\n{cell},4,y\n"), "label")


def test_single_class_file(tmp_path):
    with pytest.raises(SingleClass):
        load_csv(write(tmp_path, "a,label\n1,x\n2,x\n"), "label")


def test_paper_sized_file(tmp_path):
    ds = synth_generate(SynthSpec())
    p = tmp_path / "full.csv"
    save_csv(ds, p, "Cancer")
    header = p.read_text().splitlines()[0].split(",")
    assert len(header) == 39
    back = load_csv(p, "Cancer")
    assert (back.n_samples, back.n_features) == (1745, 38)


def test_csv_round_trip_exact(tmp_path):
    ds = synth_generate(SynthSpec(n_samples=50, seed=4))
    p = tmp_path / "rt.csv"
    save_csv(ds, p, "Cancer")
    back = load_csv(p, "Cancer")
    np.testing.assert_array_equal(back.features, ds.features)
    assert back.feature_names == ds.feature_names
    # class ids are relabelled by first appearance; names follow them
    assert [back.class_names[i] for i in back.labels] == [ds.class_names[i] for i in ds.labels]


def test_dataset_invariants():
    with pytest.raises(DataError):
        Dataset(np.zeros((3, 1)), [0, 0, 0], ("a",), ("x", "y"))
    with pytest.raises(SingleClass):
        Dataset(np.zeros((3, 1)), [0, 0, 0], ("a",), ("x",))
    with pytest.raises(DimensionMismatch):
        Dataset(np.zeros((3, 2)), [0, 1, 0], ("a",), ("x", "y"))
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2)), [0, 1], ("a", "a"), ("x", "y"))


def test_dataset_arrays_read_only():
    ds = Dataset(np.zeros((2, 1)), [0, 1], ("a",), ("x", "y"))
    with pytest.raises(ValueError):
        ds.features[0, 0] = 1.0


def test_zscore_stats():
    p = normalize_fit(np.array([[1.0], [2.0], [3.0]]))
    assert p.first[0] == pytest.approx(2.0)
    assert p.second[0] == pytest.approx(math.sqrt(2 / 3), rel=1e-12)


def test_zscore_idempotent_on_standardized():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 3))
    Z = normalize_apply(normalize_fit(X), X)
    p = normalize_fit(Z)
    np.testing.assert_allclose(p.first, 0, atol=1e-12)
    np.testing.assert_allclose(p.second, 1, atol=1e-12)


def test_constant_feature_index():
    X = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
    with pytest.raises(ConstantFeature) as exc:
        normalize_fit(X)
    assert exc.value.index == 1
    with pytest.raises(ConstantFeature):
        normalize_fit(X, "minmax")


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_zscore_round_trip(n, d, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(loc=rng.uniform(-100, 100, d), scale=rng.uniform(0.1, 50, d), size=(n, d))
    Z = normalize_apply(normalize_fit(X), X)
    assert np.all(np.abs(Z.mean(axis=0)) < 1e-9)
    assert np.all(np.abs(Z.std(axis=0) - 1) < 1e-9)


def test_minmax_endpoints_and_clipping():
    p = normalize_fit(np.array([[0.0], [5.0], [10.0]]), "minmax")
    np.testing.assert_allclose(normalize_apply(p, np.array([[0.0], [5.0], [10.0]])).ravel(), [0, 0.5, 1])
    assert normalize_apply(p, np.array([[12.0]]))[0, 0] == 1.0
    assert normalize_apply(p, np.array([[-3.0]]))[0, 0] == 0.0


def test_apply_width_mismatch():
    p = normalize_fit(np.array([[0.0, 1.0], [1.0, 3.0]]))
    with pytest.raises(DimensionMismatch):
        normalize_apply(p, np.zeros((2, 3)))


def test_kfold_paper_population():
    plan = kfold_split(1745, 5, 123)
    sizes = np.bincount(plan.assignments, minlength=5)
    assert sizes.tolist() == [349] * 5


def test_kfold_leave_one_out():
    plan = kfold_split(10, 10, 0)
    assert sorted(plan.assignments.tolist()) == list(range(10))


def test_kfold_deterministic():
    a = kfold_split(100, 5, 9).assignments
    b = kfold_split(100, 5, 9).assignments
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, kfold_split(100, 5, 10).assignments)


@pytest.mark.parametrize("n,k", [(10, 1), (10, 11), (1, 2)])
def test_kfold_bad_count(n, k):
    with pytest.raises(BadFoldCount):
        kfold_split(n, k, 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 300), st.integers(2, 12), st.integers(0, 2**63 - 1))
def test_fold_partition(n, k, seed):
    if k > n:
        k = n
    plan = kfold_split(n, k, seed)
    tests = np.concatenate([plan.test_index(f) for f in range(k)])
    assert sorted(tests.tolist()) == list(range(n))
    sizes = np.bincount(plan.assignments, minlength=k)
    assert sizes.max() - sizes.min() <= 1 and sizes.min() >= 1
    for f in range(k):
        assert np.intersect1d(plan.train_index(f), plan.test_index(f)).size == 0
        assert plan.train_index(f).size + plan.test_index(f).size == n


def test_synth_default_schema():
    ds = synth_generate(SynthSpec())
    assert (ds.n_samples, ds.n_features, ds.n_classes) == (1745, 38, 2)
    assert ds.feature_names == CONTINUOUS_FEATURES + BINARY_FEATURES
    binary = ds.features[:, 22:]
    assert set(np.unique(binary)) <= {0.0, 1.0}


def test_synth_deterministic():
    a = synth_generate(SynthSpec(n_samples=80, seed=3))
    b = synth_generate(SynthSpec(n_samples=80, seed=3))
    assert a.features.tobytes() == b.features.tobytes()
    assert a.labels.tobytes() == b.labels.tobytes()


def test_synth_no_signal_at_zero_separation():
    ds = synth_generate(SynthSpec(n_samples=4000, class_separation=0.0, seed=1))
    Z = normalize_apply(normalize_fit(ds.features), ds.features)
    # class-conditional means coincide up to sampling noise
    gap = np.abs(Z[ds.labels == 0].mean(axis=0) - Z[ds.labels == 1].mean(axis=0))
    assert gap.max() < 0.15


def test_synth_high_separation_linearly_separable():
    from stackae.stack import softmax_train
    ds = synth_generate(SynthSpec(n_samples=300, class_separation=10.0, noise_std=1.0, seed=2))
    Z = normalize_apply(normalize_fit(ds.features), ds.features)
    clf = softmax_train(Z, ds.labels, "lbfgs", l2=1e-6)
    acc = np.mean(np.argmax(Z @ clf.W.T + clf.b, axis=1) == ds.labels)
    assert acc > 0.99


@pytest.mark.parametrize("kw", [dict(n_classes=1), dict(noise_std=0.0), dict(class_separation=-1.0),
                                dict(n_continuous=0, n_binary=0), dict(class_priors=(0.2, 0.2))])
def test_synth_bad_spec(kw):
    with pytest.raises(BadSpec):
        synth_generate(SynthSpec(**kw))
