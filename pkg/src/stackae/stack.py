"""Stacked encoders with a softmax head: pretraining, fine-tuning, prediction."""
from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .activations import get_activation
from .autoencoder import (
    ae_train,
    encode,
    parse_header,
    read_layer,
    read_matrix,
    write_layer,
    write_matrix,
    _fmt,
)
from .dataset import NormalizationParams, normalize_apply
from .errors import ConfigError, DataError, DimensionMismatch, MissingFile, NonFiniteLoss, SingleClass
from .optimizers import OptimizerOptions, minimize
from .utils import derive_seed, frozen

MODEL_MAGIC = "stackae-model"


@dataclass(frozen=True)
class SoftmaxClassifier:
    W: np.ndarray
    b: np.ndarray
    l2: float = 1e-4

    def __post_init__(self):
        W, b = np.asarray(self.W, dtype=float), np.asarray(self.b, dtype=float)
        if W.ndim != 2 or b.shape != (W.shape[0],):
            raise DimensionMismatch(f"softmax shapes W{W.shape} b{b.shape} are inconsistent")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise NonFiniteLoss("softmax parameters must be finite")
        if self.l2 < 0:
            raise ConfigError("l2 must be >= 0")
        object.__setattr__(self, "W", frozen(W))
        object.__setattr__(self, "b", frozen(b))

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]

    @property
    def input_size(self) -> int:
        return self.W.shape[1]

    def pack(self) -> np.ndarray:
        return np.concatenate([self.W.ravel(), self.b])

    def with_params(self, theta) -> "SoftmaxClassifier":
        c, m = self.W.shape
        theta = np.asarray(theta, dtype=float)
        return SoftmaxClassifier(theta[:c * m].reshape(c, m), theta[c * m:], self.l2)


def _softmax_rows(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True), z - np.log(e.sum(axis=1, keepdims=True))


def _check_labels(y, n, c):
    y = np.asarray(y)
    if y.shape != (n,):
        raise DimensionMismatch(f"labels have shape {y.shape}, expected ({n},)")
    if n and (y.min() < 0 or y.max() >= c):
        raise DataError(f"labels must lie in 0..{c - 1}")
    return y.astype(np.int64)


def _ce_head(W, b, H, y, l2):
    """Mean cross-entropy plus (l2/2)||W||^2 and gradients (dW, db, dH)."""
    n = H.shape[0]
    P, logp = _softmax_rows(H @ W.T + b)
    J = -float(logp[np.arange(n), y].sum()) / n + 0.5 * l2 * float(np.sum(W * W))
    G = P.copy()
    G[np.arange(n), y] -= 1.0
    G /= n
    return J, G.T @ H + l2 * W, G.sum(axis=0), G @ W


def softmax_loss_grad(clf: SoftmaxClassifier, H, y):
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[1] != clf.input_size:
        raise DimensionMismatch(f"expected N x {clf.input_size} features, got {H.shape}")
    if H.shape[0] < 1:
        raise DataError("need at least one sample")
    y = _check_labels(y, H.shape[0], clf.n_classes)
    J, gW, gb, _ = _ce_head(clf.W, clf.b, H, y, clf.l2)
    return J, (gW, gb)


def softmax_train(H, y, optimizer="scg", options: Optional[OptimizerOptions] = None,
                  l2: float = 1e-4, seed=0, n_classes: Optional[int] = None) -> SoftmaxClassifier:
    """Fit a softmax head from zero initialization.

    ``seed`` is accepted for interface symmetry; zero initialization makes
    the fit deterministic without it.
    """
    H = np.asarray(H, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if H.ndim != 2:
        raise DimensionMismatch("H must be 2-D")
    present = np.unique(y)
    if present.size < 2:
        raise SingleClass("softmax training needs at least two classes")
    c = int(n_classes if n_classes is not None else present.max() + 1)
    if H.shape[0] < c:
        raise DataError(f"need at least {c} samples for {c} classes")
    y = _check_labels(y, H.shape[0], c)
    m = H.shape[1]
    clf = SoftmaxClassifier(np.zeros((c, m)), np.zeros(c), l2)

    def value_grad(theta):
        W = theta[:c * m].reshape(c, m)
        J, gW, gb, _ = _ce_head(W, theta[c * m:], H, y, l2)
        return J, np.concatenate([gW.ravel(), gb])

    theta, _ = minimize(value_grad, clf.pack(), optimizer, options)
    return clf.with_params(theta)


@dataclass(frozen=True)
class StackedModel:
    encoders: tuple
    softmax: SoftmaxClassifier
    stack_l2: float = 1e-4
    normalization: Optional[NormalizationParams] = None
    feature_names: Optional[tuple] = None
    class_names: Optional[tuple] = None

    def __post_init__(self):
        encoders = tuple(self.encoders)
        if not encoders:
            raise ConfigError("a stacked model needs at least one encoder")
        for prev, cur in zip(encoders, encoders[1:]):
            if cur.input_size != prev.hidden_size:
                raise DimensionMismatch(
                    f"encoder input {cur.input_size} does not match previous width {prev.hidden_size}")
        if self.softmax.input_size != encoders[-1].hidden_size:
            raise DimensionMismatch("softmax input width does not match the last encoder")
        if self.normalization is not None and self.normalization.dimension != encoders[0].input_size:
            raise DimensionMismatch("normalization width does not match the first encoder")
        if self.feature_names is not None and len(self.feature_names) != encoders[0].input_size:
            raise DimensionMismatch("feature name count does not match input width")
        if self.class_names is not None and len(self.class_names) != self.softmax.n_classes:
            raise DimensionMismatch("class name count does not match softmax classes")
        object.__setattr__(self, "encoders", encoders)

    @property
    def input_size(self) -> int:
        return self.encoders[0].input_size

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return tuple(e.hidden_size for e in self.encoders)

    @property
    def n_classes(self) -> int:
        return self.softmax.n_classes

    def prepare(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.input_size:
            raise DimensionMismatch(f"expected N x {self.input_size} input, got shape {X.shape}")
        if self.normalization is not None:
            X = normalize_apply(self.normalization, X)
        return X

    def pack(self) -> np.ndarray:
        parts = []
        for e in self.encoders:
            parts += [e.W1.ravel(), e.b1]
        parts.append(self.softmax.pack())
        return np.concatenate(parts)

    def with_params(self, theta) -> "StackedModel":
        theta = np.asarray(theta, dtype=float)
        i = 0
        encoders = []
        for e in self.encoders:
            h, d = e.W1.shape
            W1 = theta[i:i + h * d].reshape(h, d); i += h * d
            b1 = theta[i:i + h]; i += h
            encoders.append(replace(e, W1=W1, b1=b1))
        return replace(self, encoders=tuple(encoders), softmax=self.softmax.with_params(theta[i:]))


def stack_pretrain(X, layer_sizes: Sequence[int], activation="arctan", optimizer="scg",
                   options: Optional[OptimizerOptions] = None, l2: float = 1e-4,
                   sparsity: float = 0.05, sparsity_weight: float = 1.0, seed=0,
                   return_reports: bool = False):
    """Greedy layer-wise training: each autoencoder learns the previous codes.

    Layer 0 uses ``seed`` unchanged, so a one-layer stack equals one
    :func:`ae_train` call. Returns a tuple of layers, plus the per-layer
    :class:`AeTrainReport` list when ``return_reports`` is set.
    """
    sizes = [int(s) for s in layer_sizes]
    if not sizes or min(sizes) < 1:
        raise ConfigError("layer_sizes must be a nonempty list of positive widths")
    act = get_activation(activation)
    H = np.asarray(X, dtype=float)
    layers, reports = [], []
    for i, h in enumerate(sizes):
        layer_seed = seed if i == 0 else derive_seed(seed, "layer", i)
        layer, rep = ae_train(H, h, act, optimizer, options, l2, sparsity, sparsity_weight, layer_seed)
        layers.append(layer)
        reports.append(rep)
        H = encode(layer, H)
    if return_reports:
        return tuple(layers), reports
    return tuple(layers)


def stack_loss_grad(model: StackedModel, X, y, l2: Optional[float] = None):
    """Fine-tuning objective on already-normalized ``X`` and its packed gradient."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.input_size:
        raise DimensionMismatch(f"expected N x {model.input_size} input, got shape {X.shape}")
    y = _check_labels(y, X.shape[0], model.n_classes)
    lam = model.stack_l2 if l2 is None else l2
    J, g = _stack_objective(model, X, y, lam)(model.pack())
    return J, g


def _stack_objective(model, X, y, lam):
    shapes = [(e.W1.shape, e.activation) for e in model.encoders]
    c, m = model.softmax.W.shape

    def value_grad(theta):
        i = 0
        params = []
        for (h, d), act in shapes:
            W1 = theta[i:i + h * d].reshape(h, d); i += h * d
            b1 = theta[i:i + h]; i += h
            params.append((W1, b1, act))
        W = theta[i:i + c * m].reshape(c, m); i += c * m
        b = theta[i:i + c]
        Hs, Zs = [X], []
        for W1, b1, act in params:
            Z = Hs[-1] @ W1.T + b1
            Zs.append(Z)
            Hs.append(act(Z))
        J, gW, gb, dH = _ce_head(W, b, Hs[-1], y, 0.0)
        J += 0.5 * lam * (float(np.sum(W * W)) + sum(float(np.sum(p[0] ** 2)) for p in params))
        gW = gW + lam * W
        grads = []
        for k in range(len(params) - 1, -1, -1):
            W1, _, act = params[k]
            dZ = dH * act.deriv(Zs[k])
            grads.append((dZ.T @ Hs[k] + lam * W1, dZ.sum(axis=0)))
            if k:
                dH = dZ @ W1
        flat = []
        for gW1, gb1 in reversed(grads):
            flat += [gW1.ravel(), gb1]
        flat += [gW.ravel(), gb]
        if not np.isfinite(J):
            J = np.inf
        return J, np.concatenate(flat)

    return value_grad


def fine_tune(model: StackedModel, X, y, optimizer="scg", options: Optional[OptimizerOptions] = None,
              stack_l2: Optional[float] = None, seed=0) -> StackedModel:
    """Jointly retrain encoders and head on labelled data (decoders are ignored).

    ``X`` is in the model's input space; the stored normalization, if any,
    is applied first. ``options.max_iter == 0`` returns the model unchanged.
    """
    lam = model.stack_l2 if stack_l2 is None else stack_l2
    if options is not None and options.max_iter == 0:
        return model if lam == model.stack_l2 else replace(model, stack_l2=lam)
    Xn = model.prepare(X)
    y = _check_labels(y, Xn.shape[0], model.n_classes)
    vg = _stack_objective(model, Xn, y, lam)
    theta, _ = minimize(vg, model.pack(), optimizer, options)
    return replace(model.with_params(theta), stack_l2=lam)


def forward_codes(model: StackedModel, X) -> np.ndarray:
    H = model.prepare(X)
    for e in model.encoders:
        H = encode(e, H)
    return H


def predict_proba(model: StackedModel, X) -> np.ndarray:
    H = forward_codes(model, X)
    P, _ = _softmax_rows(H @ model.softmax.W.T + model.softmax.b)
    return P


def predict(model: StackedModel, X):
    """Return ``(labels, probabilities)``; ties go to the smaller class id."""
    P = predict_proba(model, X)
    return np.argmax(P, axis=1).astype(np.int64), P


def build_model(encoders, softmax: SoftmaxClassifier, stack_l2=1e-4, normalization=None,
                feature_names=None, class_names=None) -> StackedModel:
    return StackedModel(tuple(encoders), softmax, stack_l2, normalization,
                        tuple(feature_names) if feature_names is not None else None,
                        tuple(class_names) if class_names is not None else None)


# ---------------------------------------------------------------------------
# model files


def dumps_model(model: StackedModel) -> str:
    buf = io.StringIO()
    buf.write(f"{MODEL_MAGIC} version=1 layers={len(model.encoders)} "
              f"classes={model.n_classes} stack_l2={_fmt(model.stack_l2)}\n")
    buf.write("feature_names " + json.dumps(list(model.feature_names) if model.feature_names else None) + "\n")
    buf.write("class_names " + json.dumps(list(model.class_names) if model.class_names else None) + "\n")
    norm = model.normalization
    buf.write(f"normalization method={norm.method if norm else 'none'}\n")
    if norm is not None:
        write_matrix(buf, "first", norm.first)
        write_matrix(buf, "second", norm.second)
    for e in model.encoders:
        write_layer(buf, e)
    sm = model.softmax
    buf.write(f"softmax classes={sm.n_classes} input={sm.input_size} l2={_fmt(sm.l2)}\n")
    write_matrix(buf, "W", sm.W)
    write_matrix(buf, "b", sm.b)
    return buf.getvalue()


def loads_model(text: str) -> StackedModel:
    lines = iter(text.splitlines())
    try:
        head = parse_header(next(lines), MODEL_MAGIC)
        names = json.loads(next(lines).partition(" ")[2])
        classes = json.loads(next(lines).partition(" ")[2])
        norm_head = parse_header(next(lines), "normalization")
        norm = None
        if norm_head["method"] != "none":
            norm = NormalizationParams(norm_head["method"], read_matrix(lines, "first"),
                                       read_matrix(lines, "second"))
        encoders = [read_layer(lines) for _ in range(int(head["layers"]))]
        sm_head = parse_header(next(lines), "softmax")
        sm = SoftmaxClassifier(read_matrix(lines, "W"), read_matrix(lines, "b"), float(sm_head["l2"]))
    except (StopIteration, KeyError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"malformed model file: {exc!r}") from None
    return build_model(encoders, sm, float(head["stack_l2"]), norm, names, classes)


def save_model(model: StackedModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_model(model))


def load_model(path) -> StackedModel:
    if not os.path.isfile(path):
        raise MissingFile(f"no such model file: {path}")
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
