"""Classical baselines behind a PCA front end: kNN, SMO SVM, RBF network, softmax."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import BadK, ConfigError, DataError, DegenerateData, DimensionMismatch, SingleClass
from .utils import derive_seed, frozen

BASELINE_NAMES = ("pca-1nn", "pca-3nn", "pca-5nn", "pca-svm", "pca-rbf", "pca-softmax")


class NoConvergence(UserWarning):
    """SMO stopped at the update cap before the KKT gap reached ``tol``."""


def _matrix(X, name="X") -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {X.shape}")
    return X


# ---------------------------------------------------------------------------
# PCA


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    total_variance: float

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        return self.explained_variance / self.total_variance


def pca_fit(X, variance_target: Union[float, int, None] = 0.95) -> PcaModel:
    """Principal axes of the sample covariance.

    A float in (0, 1] keeps the fewest components whose cumulative
    explained-variance ratio reaches it; an int keeps exactly that many.
    Each component's largest-magnitude entry is made positive.
    """
    X = _matrix(X)
    n, d = X.shape
    if n < 2:
        raise DataError("PCA needs at least two samples")
    mean = X.mean(axis=0)
    Xc = X - mean
    _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    var = s ** 2 / (n - 1)
    total = float(np.sum(Xc * Xc)) / (n - 1)
    if not total > 0:
        raise DegenerateData("covariance is all zero")
    if isinstance(variance_target, (bool, np.bool_)):
        raise ConfigError("variance_target must be a number")
    if isinstance(variance_target, (int, np.integer)):
        k = int(variance_target)
        if not 1 <= k <= Vt.shape[0]:
            raise BadK(f"k must be in 1..{Vt.shape[0]}, got {k}")
    else:
        target = 0.95 if variance_target is None else float(variance_target)
        if not 0 < target <= 1:
            raise ConfigError(f"variance_target must lie in (0, 1], got {target}")
        ratio = np.cumsum(var) / total
        k = int(np.searchsorted(ratio, target - 1e-12) + 1)
        k = min(k, Vt.shape[0])
    comps = Vt[:k].copy()
    flip = np.sign(comps[np.arange(k), np.argmax(np.abs(comps), axis=1)])
    comps *= flip[:, None]
    return PcaModel(frozen(mean), frozen(comps), frozen(var[:k]), total)


def pca_transform(model: PcaModel, X) -> np.ndarray:
    X = _matrix(X)
    if X.shape[1] != model.mean.shape[0]:
        raise DimensionMismatch(f"expected {model.mean.shape[0]} columns, got {X.shape[1]}")
    return (X - model.mean) @ model.components.T


def pca_inverse(model: PcaModel, Z) -> np.ndarray:
    Z = _matrix(Z, "Z")
    if Z.shape[1] != model.n_components:
        raise DimensionMismatch(f"expected {model.n_components} columns, got {Z.shape[1]}")
    return Z @ model.components + model.mean


# ---------------------------------------------------------------------------
# k-nearest neighbours


def _sq_dists(Q, T, budget=4_000_000):
    out = np.empty((Q.shape[0], T.shape[0]))
    step = max(1, budget // max(1, T.shape[0] * T.shape[1]))
    for i in range(0, Q.shape[0], step):
        diff = Q[i:i + step, None, :] - T[None, :, :]
        out[i:i + step] = np.einsum("qnd,qnd->qn", diff, diff)
    return out


def knn_votes(train_X, train_y, query_X, k: int, n_classes: Optional[int] = None):
    """Neighbour label counts (Q x C) and the predicted labels.

    Distance ties go to the lower training index; vote ties go to the tied
    class whose closest neighbour ranks first.
    """
    T, Q = _matrix(train_X, "train_X"), _matrix(query_X, "query_X")
    y = np.asarray(train_y, dtype=np.int64)
    if y.shape != (T.shape[0],):
        raise DimensionMismatch("train_y length does not match train_X")
    if Q.shape[1] != T.shape[1]:
        raise DimensionMismatch("query and training widths differ")
    if int(k) != k or k < 1 or k % 2 == 0 or k > T.shape[0]:
        raise BadK(f"k must be odd and in 1..{T.shape[0]}, got {k}")
    k = int(k)
    c = int(n_classes if n_classes is not None else y.max() + 1)
    labels = np.empty(Q.shape[0], dtype=np.int64)
    votes = np.zeros((Q.shape[0], c))
    if Q.shape[0] == 0:
        return votes, labels
    order = np.argsort(_sq_dists(Q, T), axis=1, kind="stable")[:, :k]
    for q, nb in enumerate(order):
        ny = y[nb]
        counts = np.bincount(ny, minlength=c)
        votes[q] = counts
        tied = counts == counts.max()
        labels[q] = next(lab for lab in ny if tied[lab])
    return votes, labels


def knn_predict(train_X, train_y, query_X, k: int) -> np.ndarray:
    return knn_votes(train_X, train_y, query_X, k)[1]


# ---------------------------------------------------------------------------
# SVM by sequential minimal optimization


def _kernel(kind, gamma, A, B):
    if kind == "linear":
        return A @ B.T
    sq = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * A @ B.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True)
class SvmModel:
    kernel: str
    gamma: float
    C: float
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    kkt_gap: float
    n_updates: int
    converged: bool

    def decision_function(self, X) -> np.ndarray:
        X = _matrix(X)
        if X.shape[1] != self.support_vectors.shape[1]:
            raise DimensionMismatch("input width does not match the support vectors")
        if self.support_vectors.shape[0] == 0:
            return np.full(X.shape[0], self.bias)
        return _kernel(self.kernel, self.gamma, X, self.support_vectors) @ self.dual_coef + self.bias

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0, 1, -1)


def svm_train(X, y, kernel: str = "linear", C: float = 1.0, gamma: Optional[float] = None,
              tol: float = 1e-3, seed=0, max_updates: int = 100_000) -> SvmModel:
    """Soft-margin SVM dual solved by SMO with maximal-violating-pair selection.

    ``y`` holds +1/-1. ``seed`` only permutes the training order, which
    decides ties in pair selection. ``gamma`` defaults to 1/m. Hitting
    ``max_updates`` emits :class:`NoConvergence` and returns the current
    iterate with ``converged=False``.
    """
    X = _matrix(X)
    y = np.asarray(y, dtype=float)
    n, m = X.shape
    if y.shape != (n,):
        raise DimensionMismatch("y length does not match X")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise DataError("SVM labels must be +1 or -1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise SingleClass("SVM training needs both classes")
    if kernel not in ("linear", "rbf"):
        raise ConfigError(f"unknown kernel {kernel!r}")
    if not C > 0 or not tol > 0:
        raise ConfigError("C and tol must be positive")
    gamma = 1.0 / m if gamma is None else float(gamma)
    perm = np.random.default_rng(seed).permutation(n)
    Xp, yp = X[perm], y[perm]
    K = _kernel(kernel, gamma, Xp, Xp)
    Q = K * np.outer(yp, yp)
    alpha = np.zeros(n)
    G = -np.ones(n)
    updates = 0
    while True:
        up = ((yp > 0) & (alpha < C)) | ((yp < 0) & (alpha > 0))
        low = ((yp > 0) & (alpha > 0)) | ((yp < 0) & (alpha < C))
        score = -yp * G
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        gap = score[i] - score[j]
        if gap <= tol or updates >= max_updates:
            break
        updates += 1
        # move a_i += y_i t, a_j -= y_j t; clip t to both boxes and land exactly
        # on a bound when one binds, so no variable is left a rounding error inside
        eta = max(K[i, i] + K[j, j] - 2.0 * K[i, j], 1e-12)
        ai_old, aj_old = alpha[i], alpha[j]
        lim_i = C - ai_old if yp[i] > 0 else ai_old
        lim_j = aj_old if yp[j] > 0 else C - aj_old
        t = min(gap / eta, lim_i, lim_j)
        ai = ai_old + yp[i] * t
        aj = aj_old - yp[j] * t
        if t == lim_i:
            ai = C if yp[i] > 0 else 0.0
        if t == lim_j:
            aj = 0.0 if yp[j] > 0 else C
        G += Q[:, i] * (ai - ai_old) + Q[:, j] * (aj - aj_old)
        alpha[i], alpha[j] = ai, aj
    converged = gap <= tol
    if not converged:
        warnings.warn(f"SMO hit {max_updates} updates with KKT gap {gap:.3g}", NoConvergence, stacklevel=2)
    score = -yp * G
    free = (alpha > 0) & (alpha < C)
    if np.any(free):
        bias = float(np.mean(score[free]))
    else:
        up = ((yp > 0) & (alpha < C)) | ((yp < 0) & (alpha > 0))
        low = ((yp > 0) & (alpha > 0)) | ((yp < 0) & (alpha < C))
        bias = 0.5 * (float(np.max(score[up], initial=-np.inf)) + float(np.min(score[low], initial=np.inf)))
        if not math.isfinite(bias):
            bias = 0.0
    sv = alpha > 0
    return SvmModel(kernel, gamma, float(C), frozen(Xp[sv]), frozen(alpha[sv] * yp[sv]), bias,
                    float(gap), updates, bool(converged))


@dataclass(frozen=True)
class OneVsRestSvm:
    models: tuple
    n_classes: int

    def decision_function(self, X) -> np.ndarray:
        if self.n_classes == 2:
            return self.models[0].decision_function(X)
        return np.column_stack([mdl.decision_function(X) for mdl in self.models])

    def predict(self, X) -> np.ndarray:
        s = self.decision_function(X)
        if self.n_classes == 2:
            return (s >= 0).astype(np.int64)
        return np.argmax(s, axis=1).astype(np.int64)


def svm_train_multiclass(X, y, n_classes: Optional[int] = None, **kwargs) -> OneVsRestSvm:
    """Class ids 0..C-1; binary tasks train one machine with class 1 positive."""
    y = np.asarray(y, dtype=np.int64)
    c = int(n_classes if n_classes is not None else y.max() + 1)
    if c == 2:
        return OneVsRestSvm((svm_train(X, np.where(y == 1, 1, -1), **kwargs),), 2)
    return OneVsRestSvm(tuple(svm_train(X, np.where(y == k, 1, -1), **kwargs) for k in range(c)), c)


# ---------------------------------------------------------------------------
# k-means and the RBF network


@dataclass(frozen=True)
class KMeansResult:
    centers: np.ndarray
    labels: np.ndarray
    cost: float
    history: tuple
    n_iter: int


def _plusplus(X, k, rng):
    n = X.shape[0]
    idx = [int(rng.integers(n))]
    d2 = np.sum((X - X[idx[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            rest = np.setdiff1d(np.arange(n), idx)
            nxt = int(rng.choice(rest))
        idx.append(nxt)
        d2 = np.minimum(d2, np.sum((X - X[nxt]) ** 2, axis=1))
    return X[idx].copy()


def _lloyd(X, centers, max_iter, shift_tol):
    history = []
    for it in range(1, max_iter + 1):
        D = _sq_dists(X, centers)
        labels = np.argmin(D, axis=1)
        dmin = D[np.arange(X.shape[0]), labels]
        history.append(float(dmin.sum()))
        new = centers.copy()
        counts = np.bincount(labels, minlength=centers.shape[0])
        taken = set()
        for c in range(centers.shape[0]):
            if counts[c]:
                new[c] = X[labels == c].mean(axis=0)
        for c in np.nonzero(counts == 0)[0]:
            # reseed to the point worst served by the current assignment
            far = [i for i in np.argsort(-dmin, kind="stable") if i not in taken]
            taken.add(far[0])
            new[c] = X[far[0]]
        shift = float(np.max(np.linalg.norm(new - centers, axis=1)))
        centers = new
        if shift <= shift_tol:
            break
    D = _sq_dists(X, centers)
    labels = np.argmin(D, axis=1)
    cost = float(D[np.arange(X.shape[0]), labels].sum())
    history.append(cost)
    return centers, labels, cost, history, it


def kmeans(X, k: int, restarts: int = 10, seed=0, max_iter: int = 300,
           shift_tol: float = 1e-6) -> KMeansResult:
    """k-means++ seeding and Lloyd iterations; keeps the cheapest restart."""
    X = _matrix(X)
    n = X.shape[0]
    if int(k) != k or not 1 <= k <= n:
        raise BadK(f"k must be in 1..{n}, got {k}")
    if restarts < 1:
        raise ConfigError("restarts must be >= 1")
    best = None
    for r in range(restarts):
        rng = np.random.default_rng(derive_seed(seed, "kmeans", r))
        res = _lloyd(X, _plusplus(X, int(k), rng), max_iter, shift_tol)
        if best is None or res[2] < best[2]:
            best = res
    centers, labels, cost, history, it = best
    return KMeansResult(frozen(centers), frozen(labels, np.int64), cost, tuple(history), it)


@dataclass(frozen=True)
class RbfNetModel:
    centers: np.ndarray
    sigma: float
    weights: np.ndarray  # C x k
    bias: np.ndarray     # C

    def features(self, X) -> np.ndarray:
        X = _matrix(X)
        if X.shape[1] != self.centers.shape[1]:
            raise DimensionMismatch("input width does not match the centers")
        return np.exp(-_sq_dists(X, self.centers) / (2.0 * self.sigma ** 2))

    def scores(self, X) -> np.ndarray:
        return self.features(X) @ self.weights.T + self.bias

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.scores(X), axis=1).astype(np.int64)


def rbf_net_train(X, y, k: int = 20, seed=0, ridge: float = 1e-6, restarts: int = 10,
                  n_classes: Optional[int] = None) -> RbfNetModel:
    """Gaussian units on k-means centres, ridge least squares onto +/-1 targets.

    The width is the median pairwise centre distance; with one centre it is
    the RMS distance of the data to that centre.
    """
    X = _matrix(X)
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (X.shape[0],):
        raise DimensionMismatch("y length does not match X")
    c = int(n_classes if n_classes is not None else y.max() + 1)
    km = kmeans(X, k, restarts=restarts, seed=seed)
    C = np.asarray(km.centers)
    if C.shape[0] > 1:
        diff = C[:, None, :] - C[None, :, :]
        pd = np.sqrt(np.sum(diff * diff, axis=2))[np.triu_indices(C.shape[0], 1)]
        sigma = float(np.median(pd))
    else:
        sigma = math.sqrt(km.cost / X.shape[0])
    if not (math.isfinite(sigma) and sigma > 0):
        raise DegenerateData("RBF width is zero; inputs do not vary")
    model = RbfNetModel(frozen(C), sigma, frozen(np.zeros((c, C.shape[0]))), frozen(np.zeros(c)))
    Phi = np.column_stack([model.features(X), np.ones(X.shape[0])])
    T = np.where(y[:, None] == np.arange(c)[None, :], 1.0, -1.0)
    A = Phi.T @ Phi + ridge * np.eye(Phi.shape[1])
    Wb = np.linalg.solve(A, Phi.T @ T)
    return RbfNetModel(frozen(C), sigma, frozen(Wb[:-1].T), frozen(Wb[-1]))
