"""A single sparse autoencoder layer: loss, gradients, training, encoding.

The encoder is ``A = act(X W1^T + b1)`` and the decoder is linear,
``X_hat = A W2^T + b2`` with untied weights. The objective is

    J = (1/N) sum_n 0.5 ||x_hat_n - x_n||^2
        + (l2 / 2) (||W1||_F^2 + ||W2||_F^2)
        + sparsity_weight * sum_j KL(sparsity || rho_hat_j)

where ``rho_hat_j`` is the mean over samples of ``logistic(A_nj)``; the
squashing keeps the KL term defined for signed or unbounded activations.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .activations import Activation, get_activation
from .errors import ConfigError, DataError, DimensionMismatch, NonFiniteLoss
from .optimizers import OptimizerOptions, OptimizerTrace, minimize

KL_CLAMP = 1e-8


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AutoencoderLayer:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    activation: Activation
    l2: float = 1e-4
    sparsity: float = 0.05
    sparsity_weight: float = 1.0

    def __post_init__(self):
        W1, b1, W2, b2 = (np.asarray(a, dtype=float) for a in (self.W1, self.b1, self.W2, self.b2))
        if W1.ndim != 2:
            raise DimensionMismatch("W1 must be 2-D")
        h, d = W1.shape
        if b1.shape != (h,) or W2.shape != (d, h) or b2.shape != (d,):
            raise DimensionMismatch(
                f"inconsistent shapes W1{W1.shape} b1{b1.shape} W2{W2.shape} b2{b2.shape}")
        if not all(np.all(np.isfinite(a)) for a in (W1, b1, W2, b2)):
            raise NonFiniteLoss("layer parameters must be finite")
        if self.l2 < 0 or self.sparsity_weight < 0 or not 0 < self.sparsity < 1:
            raise ConfigError("need l2 >= 0, sparsity_weight >= 0, 0 < sparsity < 1")
        for name, a in zip(("W1", "b1", "W2", "b2"), (W1, b1, W2, b2)):
            object.__setattr__(self, name, _frozen(a))
        object.__setattr__(self, "activation", get_activation(self.activation))

    @property
    def input_size(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_size(self) -> int:
        return self.W1.shape[0]

    def pack(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.W2.ravel(), self.b2])

    def with_params(self, theta) -> "AutoencoderLayer":
        W1, b1, W2, b2 = _unpack(theta, self.input_size, self.hidden_size)
        return AutoencoderLayer(W1, b1, W2, b2, self.activation, self.l2,
                                self.sparsity, self.sparsity_weight)


class AeGradients(NamedTuple):
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray


class LossTerms(NamedTuple):
    reconstruction: float
    weight: float
    sparsity: float

    @property
    def total(self) -> float:
        return self.reconstruction + self.weight + self.sparsity


def n_params(d: int, h: int) -> int:
    return 2 * h * d + h + d


def _unpack(theta, d, h):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (n_params(d, h),):
        raise DimensionMismatch(f"parameter vector of length {theta.size}, expected {n_params(d, h)}")
    i = 0
    W1 = theta[i:i + h * d].reshape(h, d); i += h * d
    b1 = theta[i:i + h]; i += h
    W2 = theta[i:i + d * h].reshape(d, h); i += d * h
    b2 = theta[i:i + d]
    return W1, b1, W2, b2


def _logistic(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _kl_terms(rho, rho_hat):
    """Summed KL(rho || q) and dKL/drho_hat, with q clamped away from 0 and 1."""
    q = np.clip(rho_hat, KL_CLAMP, 1.0 - KL_CLAMP)
    kl = rho * np.log(rho / q) + (1.0 - rho) * np.log((1.0 - rho) / (1.0 - q))
    dq = np.where((rho_hat > KL_CLAMP) & (rho_hat < 1.0 - KL_CLAMP),
                  -rho / q + (1.0 - rho) / (1.0 - q), 0.0)
    return float(kl.sum()), dq


def _loss(W1, b1, W2, b2, act, l2, rho, beta, X, want_grad=True):
    n = X.shape[0]
    Z = X @ W1.T + b1
    A = act(Z)
    E = A @ W2.T + b2 - X
    recon = 0.5 * float(np.sum(E * E)) / n
    weight = 0.5 * l2 * (float(np.sum(W1 * W1)) + float(np.sum(W2 * W2)))
    sparse = 0.0
    if beta > 0:
        S = _logistic(A)
        kl, dkl = _kl_terms(rho, S.mean(axis=0))
        sparse = beta * kl
    terms = LossTerms(recon, weight, sparse)
    if not np.isfinite(terms.total):
        raise NonFiniteLoss("autoencoder loss is not finite")
    if not want_grad:
        return terms, None
    dE = E / n
    gW2 = dE.T @ A + l2 * W2
    gb2 = dE.sum(axis=0)
    dA = dE @ W2
    if beta > 0:
        dA = dA + (beta / n) * dkl * S * (1.0 - S)
    dZ = dA * act.deriv(Z)
    gW1 = dZ.T @ X + l2 * W1
    gb1 = dZ.sum(axis=0)
    return terms, AeGradients(gW1, gb1, gW2, gb2)


def _check_input(layer, X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != layer.input_size:
        raise DimensionMismatch(f"expected N x {layer.input_size} input, got shape {X.shape}")
    return X


def ae_loss_grad(layer: AutoencoderLayer, X) -> tuple[float, AeGradients]:
    """Objective value and its exact gradient with respect to every parameter."""
    X = _check_input(layer, X)
    if X.shape[0] < 1:
        raise DataError("need at least one sample")
    terms, grads = _loss(layer.W1, layer.b1, layer.W2, layer.b2, layer.activation,
                         layer.l2, layer.sparsity, layer.sparsity_weight, X)
    return terms.total, grads


def ae_loss_terms(layer: AutoencoderLayer, X) -> LossTerms:
    X = _check_input(layer, X)
    terms, _ = _loss(layer.W1, layer.b1, layer.W2, layer.b2, layer.activation,
                     layer.l2, layer.sparsity, layer.sparsity_weight, X, want_grad=False)
    return terms


def ae_objective(X, d, h, activation, l2, rho, beta):
    """Flat-vector ``value_grad`` over the packed layer parameters."""
    act = get_activation(activation)

    def value_grad(theta):
        W1, b1, W2, b2 = _unpack(theta, d, h)
        terms, g = _loss(W1, b1, W2, b2, act, l2, rho, beta, X)
        return terms.total, np.concatenate([g.W1.ravel(), g.b1, g.W2.ravel(), g.b2])

    return value_grad


def encode(layer: AutoencoderLayer, X) -> np.ndarray:
    X = _check_input(layer, X)
    return layer.activation(X @ layer.W1.T + layer.b1)


def decode(layer: AutoencoderLayer, H) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[1] != layer.hidden_size:
        raise DimensionMismatch(f"expected N x {layer.hidden_size} codes, got shape {H.shape}")
    return H @ layer.W2.T + layer.b2


def reconstruction_rmse(layer: AutoencoderLayer, X) -> float:
    X = _check_input(layer, X)
    E = decode(layer, encode(layer, X)) - X
    return float(np.sqrt(np.mean(E * E)))


def init_layer(d: int, h: int, activation, seed, l2=1e-4, sparsity=0.05,
               sparsity_weight=1.0) -> AutoencoderLayer:
    """Weights uniform on ``(-1/sqrt(d), 1/sqrt(d))``, biases zero."""
    if h < 1 or d < 1:
        raise ConfigError("layer sizes must be >= 1")
    rng = np.random.default_rng(seed)
    r = 1.0 / np.sqrt(d)
    W1 = rng.uniform(-r, r, size=(h, d))
    W2 = rng.uniform(-r, r, size=(d, h))
    return AutoencoderLayer(W1, np.zeros(h), W2, np.zeros(d), get_activation(activation),
                            l2, sparsity, sparsity_weight)


@dataclass(frozen=True)
class AeTrainReport:
    terms: LossTerms
    rmse: float
    trace: OptimizerTrace

    @property
    def loss(self) -> float:
        return self.terms.total


def ae_train(X, hidden_size: int, activation="sigmoid", optimizer="scg",
             options: Optional[OptimizerOptions] = None, l2: float = 1e-4,
             sparsity: float = 0.05, sparsity_weight: float = 1.0, seed=0):
    """Fit one layer to reconstruct ``X``; returns ``(layer, report)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise DataError("X must be a nonempty 2-D matrix")
    d = X.shape[1]
    layer0 = init_layer(d, hidden_size, activation, seed, l2, sparsity, sparsity_weight)
    vg = ae_objective(X, d, hidden_size, layer0.activation, l2, sparsity, sparsity_weight)
    theta, trace = minimize(vg, layer0.pack(), optimizer, options)
    layer = layer0.with_params(theta)
    report = AeTrainReport(ae_loss_terms(layer, X), reconstruction_rmse(layer, X), trace)
    return layer, report


# ---------------------------------------------------------------------------
# text serialization: one header line, then named row-major blocks


def _fmt(v: float) -> str:
    return "%.17g" % v


def write_matrix(fh, name: str, a: np.ndarray) -> None:
    if a.ndim == 1:
        fh.write(f"{name} {a.shape[0]}\n")
        fh.write(" ".join(_fmt(v) for v in a) + "\n")
    else:
        fh.write(f"{name} {a.shape[0]} {a.shape[1]}\n")
        for row in a:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


def read_matrix(lines, name: str) -> np.ndarray:
    head = next(lines).split()
    if not head or head[0] != name:
        raise DataError(f"expected block {name!r}, got {' '.join(head)!r}")
    shape = tuple(int(s) for s in head[1:])
    if len(shape) == 1:
        vals = next(lines).split() if shape[0] else []
        a = np.array([float(v) for v in vals])
    else:
        a = np.array([[float(v) for v in next(lines).split()] for _ in range(shape[0])])
        a = a.reshape(shape)
    if a.shape != shape:
        raise DataError(f"block {name!r} has shape {a.shape}, header says {shape}")
    return a


def parse_header(line: str, tag: str) -> dict[str, str]:
    parts = line.split()
    if not parts or parts[0] != tag:
        raise DataError(f"expected {tag!r} header, got {line.strip()!r}")
    out = {}
    for p in parts[1:]:
        k, _, v = p.partition("=")
        out[k] = v
    return out


def write_layer(fh, layer: AutoencoderLayer) -> None:
    act = layer.activation
    params = ",".join(f"{k}:{_fmt(v)}" for k, v in act.params.items())
    fh.write(f"autoencoder input={layer.input_size} hidden={layer.hidden_size} "
             f"activation={act.name} act_params={params} l2={_fmt(layer.l2)} "
             f"sparsity={_fmt(layer.sparsity)} sparsity_weight={_fmt(layer.sparsity_weight)}\n")
    write_matrix(fh, "W1", layer.W1)
    write_matrix(fh, "b1", layer.b1)
    write_matrix(fh, "W2", layer.W2)
    write_matrix(fh, "b2", layer.b2)


def read_layer(lines) -> AutoencoderLayer:
    h = parse_header(next(lines), "autoencoder")
    params = {}
    if h.get("act_params"):
        for item in h["act_params"].split(","):
            k, _, v = item.partition(":")
            params[k] = float(v)
    act = get_activation(h["activation"], **params)
    W1 = read_matrix(lines, "W1")
    b1 = read_matrix(lines, "b1")
    W2 = read_matrix(lines, "W2")
    b2 = read_matrix(lines, "b2")
    layer = AutoencoderLayer(W1, b1, W2, b2, act, float(h["l2"]), float(h["sparsity"]),
                             float(h["sparsity_weight"]))
    if layer.input_size != int(h["input"]) or layer.hidden_size != int(h["hidden"]):
        raise DataError("layer header disagrees with block shapes")
    return layer


def dumps_layer(layer: AutoencoderLayer) -> str:
    buf = io.StringIO()
    write_layer(buf, layer)
    return buf.getvalue()


def loads_layer(text: str) -> AutoencoderLayer:
    return read_layer(iter(text.splitlines()))
