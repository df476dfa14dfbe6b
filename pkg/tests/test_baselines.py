import numpy as np
import pytest

from _oracles import brute_knn
from stackae.baselines import (
    BASELINE_NAMES,
    NoConvergence,
    kmeans,
    knn_predict,
    knn_votes,
    pca_fit,
    pca_inverse,
    pca_transform,
    rbf_net_train,
    svm_train,
    svm_train_multiclass,
)
from stackae.errors import BadK, DegenerateData, DimensionMismatch, SingleClass


def two_blobs(n=60, d=2, sep=10.0, seed=0, spread=1.0):
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) % 2 == 0, 1, -1)
    X = spread * rng.normal(size=(n, d))
    X[:, 0] += sep / 2 * y
    return X, y


def test_baseline_names():
    assert BASELINE_NAMES == ("pca-1nn", "pca-3nn", "pca-5nn", "pca-svm", "pca-rbf", "pca-softmax")


# PCA

def test_pca_rank_one_line():
    t = np.linspace(-2, 3, 11)
    m = pca_fit(np.column_stack([t, t]))
    assert m.n_components == 1
    np.testing.assert_allclose(np.abs(m.components[0]), [2 ** -0.5] * 2, atol=1e-12)
    assert m.explained_variance_ratio[0] == pytest.approx(1.0, abs=1e-12)


def test_pca_full_basis_reconstructs():
    X = np.random.default_rng(1).normal(size=(15, 5))
    m = pca_fit(X, 5)
    np.testing.assert_allclose(pca_inverse(m, pca_transform(m, X)), X, atol=1e-9)
    assert float(np.sum(m.explained_variance)) == pytest.approx(m.total_variance, rel=1e-8)


def test_pca_matches_eigh_oracle():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(40, 6)) @ rng.normal(size=(6, 6))
    m = pca_fit(X, 3)
    Xc = X - X.mean(axis=0)
    vals, vecs = np.linalg.eigh(Xc.T @ Xc / (X.shape[0] - 1))
    top = vecs[:, ::-1][:, :3].T
    for got, want in zip(m.components, top):
        assert min(np.linalg.norm(got - want), np.linalg.norm(got + want)) <= 1e-8
    np.testing.assert_allclose(m.explained_variance, vals[::-1][:3], rtol=1e-8)


def test_pca_invariants():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(30, 7)) * np.arange(1, 8)
    m = pca_fit(X, 0.9)
    G = m.components @ m.components.T
    assert np.max(np.abs(G - np.eye(m.n_components))) <= 1e-9
    assert np.all(np.diff(m.explained_variance) <= 0)
    assert np.cumsum(m.explained_variance_ratio)[-1] >= 0.9
    if m.n_components > 1:
        assert np.cumsum(m.explained_variance_ratio)[-2] < 0.9
    Z = pca_transform(m, X)
    C = np.cov(Z.T)
    assert np.max(np.abs(C - np.diag(np.diag(C)))) <= 1e-8
    np.testing.assert_allclose(pca_transform(m, m.mean[None, :]), 0, atol=1e-12)
    assert pca_transform(m, np.zeros((0, 7))).shape == (0, m.n_components)


def test_pca_errors():
    with pytest.raises(DegenerateData):
        pca_fit(np.ones((5, 3)))
    with pytest.raises(BadK):
        pca_fit(np.random.default_rng(0).normal(size=(4, 6)), 5)
    m = pca_fit(np.random.default_rng(0).normal(size=(10, 3)))
    with pytest.raises(DimensionMismatch):
        pca_transform(m, np.zeros((2, 4)))


# kNN

def test_knn_trivial_cases():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(9, 3))
    y = rng.integers(0, 2, 9)
    assert knn_predict(X, y, X[4:5], 1)[0] == y[4]
    assert np.all(knn_predict(X, np.ones(9, dtype=int), rng.normal(size=(5, 3)), 9) == 1)


def test_knn_matches_brute_force():
    rng = np.random.default_rng(5)
    for trial in range(100):
        n = int(rng.integers(5, 25))
        # coarse grid coordinates force distance ties
        X = rng.integers(0, 4, size=(n, 2)).astype(float)
        y = rng.integers(0, 3, n)
        Q = rng.integers(0, 4, size=(4, 2)).astype(float)
        k = int(rng.choice([1, 3, 5]))
        got = knn_predict(X, y, Q, k)
        assert got.tolist() == [brute_knn(X, y, q, k) for q in Q]


def test_knn_votes_and_errors():
    X = np.array([[0.0], [1.0], [2.0]])
    votes, labels = knn_votes(X, np.array([0, 1, 1]), np.array([[0.1]]), 3)
    assert votes.tolist() == [[1, 2]] and labels.tolist() == [1]
    with pytest.raises(BadK):
        knn_predict(X, [0, 1, 1], X, 2)
    with pytest.raises(BadK):
        knn_predict(X, [0, 1, 1], X, 5)


# SVM

def alphas_by_point(model, X):
    a = np.zeros(X.shape[0])
    for sv, coef in zip(model.support_vectors, model.dual_coef):
        idx = np.flatnonzero(np.all(X == sv, axis=1))
        a[idx[0]] = abs(coef)
    return a


@pytest.mark.parametrize("kernel,C", [("linear", 1.0), ("linear", 0.05), ("rbf", 2.0)])
def test_svm_kkt_conditions(kernel, C):
    X, y = two_blobs(n=50, sep=2.5, seed=6)
    tol = 1e-3
    m = svm_train(X, y, kernel, C=C, tol=tol)
    assert m.converged and m.kkt_gap <= tol
    assert np.all(np.abs(m.dual_coef) <= C + 1e-12)
    assert abs(float(np.sum(m.dual_coef))) <= 1e-6
    a = alphas_by_point(m, X)
    margin = y * m.decision_function(X)
    free = (a > 0) & (a < C)
    assert np.all(np.abs(margin[free] - 1) <= tol)
    assert np.all(margin[a == 0] >= 1 - tol)
    assert np.all(margin[a == C] <= 1 + tol)


def test_svm_separable_blobs():
    X, y = two_blobs()
    m = svm_train(X, y)
    assert np.mean(m.predict(X) == y) >= 0.99


def test_svm_xor():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([1, 1, -1, -1])
    assert np.mean(svm_train(X, y, "linear").predict(X) == y) <= 0.75
    assert np.mean(svm_train(X, y, "rbf", C=10.0, gamma=1.0).predict(X) == y) == 1.0


def test_svm_duplicates_same_decision():
    X, y = two_blobs(n=30, sep=6.0, seed=7)
    a = svm_train(X, y, tol=1e-9)
    b = svm_train(np.vstack([X, X]), np.concatenate([y, y]), tol=1e-9)
    g = np.mgrid[-6:6:15j, -4:4:9j].reshape(2, -1).T
    assert np.max(np.abs(a.decision_function(g) - b.decision_function(g))) <= 1e-6


def test_svm_deterministic_and_errors():
    X, y = two_blobs(n=40, sep=1.0, seed=8)
    a, b = svm_train(X, y, seed=3), svm_train(X, y, seed=3)
    assert a.decision_function(X).tobytes() == b.decision_function(X).tobytes()
    with pytest.raises(SingleClass):
        svm_train(X, np.ones(40))
    with pytest.warns(NoConvergence):
        m = svm_train(X, y, C=100.0, tol=1e-12, max_updates=3)
    assert not m.converged


def test_svm_one_vs_rest():
    rng = np.random.default_rng(9)
    centers = np.array([[0, 0], [8, 0], [0, 8]], dtype=float)
    y = np.repeat(np.arange(3), 20)
    X = centers[y] + rng.normal(size=(60, 2))
    m = svm_train_multiclass(X, y)
    assert np.mean(m.predict(X) == y) >= 0.98


# k-means and the RBF network

def test_kmeans_closed_forms():
    X = np.random.default_rng(10).normal(size=(12, 3))
    r1 = kmeans(X, 1)
    np.testing.assert_allclose(r1.centers[0], X.mean(axis=0), atol=1e-12)
    rN = kmeans(X, 12)
    assert rN.cost == pytest.approx(0.0, abs=1e-20)
    assert sorted(map(tuple, rN.centers)) == sorted(map(tuple, X))
    with pytest.raises(BadK):
        kmeans(X, 13)


def test_kmeans_two_blobs_and_monotone_cost():
    X, y = two_blobs(n=80, sep=30.0, seed=11)
    r = kmeans(X, 2, seed=4)
    assert sorted(np.round(r.centers[:, 0] / 15).tolist()) == [-1.0, 1.0]
    assert len(set(zip(r.labels.tolist(), y.tolist()))) == 2
    rng = np.random.default_rng(12)
    for seed in range(5):
        res = kmeans(rng.normal(size=(50, 2)), 5, restarts=1, seed=seed)
        assert np.all(np.diff(res.history) <= 1e-12 * res.history[0])


def test_rbf_centres_near_class_means():
    X, y = two_blobs(n=100, sep=20.0, seed=13, spread=0.5)
    lab = (y > 0).astype(int)
    m = rbf_net_train(X, lab, k=2)
    means = np.array([X[lab == c].mean(axis=0) for c in (0, 1)])
    for c in means:
        assert np.min(np.linalg.norm(m.centers - c, axis=1)) <= 0.5
    assert np.mean(m.predict(X) == lab) == 1.0


def test_rbf_interpolation_regime_dominates():
    X, y = two_blobs(n=40, sep=1.5, seed=14)
    lab = (y > 0).astype(int)
    full = np.mean(rbf_net_train(X, lab, k=40).predict(X) == lab)
    for k in (2, 5, 10, 20):
        assert full >= np.mean(rbf_net_train(X, lab, k=k).predict(X) == lab)


def test_rbf_degenerate_inputs():
    with pytest.raises(DegenerateData):
        rbf_net_train(np.ones((6, 2)), np.array([0, 1, 0, 1, 0, 1]), k=2)
