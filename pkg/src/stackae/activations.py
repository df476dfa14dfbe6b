"""Catalog of the 17 fixed-parameter activation functions.

Every function is vectorized over numpy arrays and paired with an analytic
derivative. At nondifferentiable breakpoints the derivative is the
right-hand one, so ``act_deriv("relu", 0.0) == 1``.

Parameters are constants of an :class:`Activation` instance; they can be
overridden when the instance is built but are never trained.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Union

import numpy as np

from .errors import ConfigError


class ActivationKind(str, Enum):
    SIGMOID = "sigmoid"
    TANH = "tanh"
    ARCTAN = "arctan"
    SOFTSIGN = "softsign"
    SOFTPLUS = "softplus"
    BENTIDENTITY = "bentidentity"
    GAUSSIAN = "gaussian"
    SINC = "sinc"
    SINUSOID = "sinusoid"
    RELU = "relu"
    LEAKYRELU = "leakyrelu"
    PRELU = "prelu"
    RRELU = "rrelu"
    ELU = "elu"
    SRELU = "srelu"
    APL = "apl"
    SOFTEXPONENTIAL = "softexponential"


DEFAULT_PARAMS: dict[ActivationKind, dict[str, float]] = {
    ActivationKind.LEAKYRELU: {"slope": 0.01},
    ActivationKind.PRELU: {"slope": 0.25},
    # midpoint of the usual [1/8, 1/3] sampling interval
    ActivationKind.RRELU: {"slope": 0.2292},
    ActivationKind.ELU: {"alpha": 1.0},
    ActivationKind.SRELU: {"t_left": -1.0, "a_left": 0.1, "t_right": 1.0, "a_right": 0.1},
    ActivationKind.APL: {"a": 0.2, "b": 0.0},
    ActivationKind.SOFTEXPONENTIAL: {"alpha": 0.5},
}

ACTIVATION_NAMES: tuple[str, ...] = tuple(k.value for k in ActivationKind)

# sin(x)/x is minimized at the first positive root of tan(x) = x
_SINC_MIN = -0.21723362821122166
_SINC_TAYLOR_CUTOFF = 1e-4


@dataclass(frozen=True)
class Activation:
    """An activation kind together with its (fixed) parameter values."""

    kind: ActivationKind
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        merged = dict(DEFAULT_PARAMS.get(self.kind, {}))
        unknown = set(self.params) - set(merged)
        if unknown:
            raise ConfigError(f"{self.kind.value} has no parameter(s) {sorted(unknown)}")
        merged.update({k: float(v) for k, v in self.params.items()})
        if self.kind is ActivationKind.SOFTEXPONENTIAL and merged["alpha"] < 0:
            raise ConfigError("softexponential alpha must be >= 0")
        if self.kind is ActivationKind.SRELU and not merged["t_left"] < merged["t_right"]:
            raise ConfigError("srelu needs t_left < t_right")
        object.__setattr__(self, "params", dict(sorted(merged.items())))

    @property
    def name(self) -> str:
        return self.kind.value

    def __call__(self, x):
        return _EVAL[self.kind](np.asarray(x, dtype=float), self.params)

    def deriv(self, x):
        return _DERIV[self.kind](np.asarray(x, dtype=float), self.params)

    def output_range(self) -> tuple[float, float]:
        return _RANGE[self.kind](self.params)

    def kinks(self) -> tuple[float, ...]:
        """Breakpoints where the derivative jumps (empty for smooth kinds)."""
        p = self.params
        if self.kind in (ActivationKind.RELU, ActivationKind.LEAKYRELU, ActivationKind.PRELU,
                         ActivationKind.RRELU, ActivationKind.ELU):
            return (0.0,)
        if self.kind is ActivationKind.SRELU:
            return (p["t_left"], p["t_right"])
        if self.kind is ActivationKind.APL:
            return tuple(sorted({0.0, p["b"]}))
        return ()

    def __hash__(self):
        return hash((self.kind, tuple(self.params.items())))

    def __eq__(self, other):
        if not isinstance(other, Activation):
            return NotImplemented
        return self.kind is other.kind and self.params == other.params


ActivationLike = Union[str, ActivationKind, Activation]


def get_activation(spec: ActivationLike, **overrides: float) -> Activation:
    """Resolve a name, kind or instance to an :class:`Activation`."""
    if isinstance(spec, Activation):
        if not overrides:
            return spec
        return Activation(spec.kind, {**spec.params, **overrides})
    try:
        kind = ActivationKind(spec.lower() if isinstance(spec, str) else spec)
    except ValueError:
        raise ConfigError(
            f"unknown activation {spec!r}; expected one of {', '.join(ACTIVATION_NAMES)}"
        ) from None
    return Activation(kind, overrides)


def act_eval(kind: ActivationLike, x):
    return get_activation(kind)(x)


def act_deriv(kind: ActivationLike, x):
    return get_activation(kind).deriv(x)


def act_range(kind: ActivationLike) -> tuple[float, float]:
    """Tight theoretical output range as ``(lower, upper)``; infinities allowed."""
    return get_activation(kind).output_range()


# ---------------------------------------------------------------------------
# definitions


def _sigmoid(x):
    # tanh form avoids overflow in exp for large |x|
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _sinc(x, p):
    small = np.abs(x) < _SINC_TAYLOR_CUTOFF
    safe = np.where(small, 1.0, x)
    x2 = x * x
    return np.where(small, 1.0 - x2 / 6.0 + x2 * x2 / 120.0, np.sin(safe) / safe)


def _sinc_deriv(x, p):
    small = np.abs(x) < _SINC_TAYLOR_CUTOFF
    safe = np.where(small, 1.0, x)
    return np.where(small, -x / 3.0 + x ** 3 / 30.0,
                    (safe * np.cos(safe) - np.sin(safe)) / (safe * safe))


def _leaky(x, slope):
    return np.where(x >= 0, x, slope * x)


def _leaky_deriv(x, slope):
    return np.where(x >= 0, 1.0, slope)


def _elu(x, p):
    return np.where(x > 0, x, p["alpha"] * np.expm1(np.minimum(x, 0.0)))


def _elu_deriv(x, p):
    return np.where(x > 0, 1.0, p["alpha"] * np.exp(np.minimum(x, 0.0)))


def _srelu(x, p):
    tl, al, tr, ar = p["t_left"], p["a_left"], p["t_right"], p["a_right"]
    return np.where(x >= tr, tr + ar * (x - tr), np.where(x < tl, tl + al * (x - tl), x))


def _srelu_deriv(x, p):
    return np.where(x >= p["t_right"], p["a_right"], np.where(x < p["t_left"], p["a_left"], 1.0))


def _apl(x, p):
    return np.maximum(0.0, x) + p["a"] * np.maximum(0.0, -x + p["b"])


def _apl_deriv(x, p):
    return np.where(x >= 0, 1.0, 0.0) + np.where(x < p["b"], -p["a"], 0.0)


def _softexp(x, p):
    a = p["alpha"]
    if a == 0:
        return x.copy()
    return np.expm1(a * x) / a + a


def _softexp_deriv(x, p):
    a = p["alpha"]
    if a == 0:
        return np.ones_like(x)
    return np.exp(a * x)


_EVAL = {
    ActivationKind.SIGMOID: lambda x, p: _sigmoid(x),
    ActivationKind.TANH: lambda x, p: np.tanh(x),
    ActivationKind.ARCTAN: lambda x, p: np.arctan(x),
    ActivationKind.SOFTSIGN: lambda x, p: x / (1.0 + np.abs(x)),
    ActivationKind.SOFTPLUS: lambda x, p: np.logaddexp(0.0, x),
    ActivationKind.BENTIDENTITY: lambda x, p: (np.sqrt(x * x + 1.0) - 1.0) / 2.0 + x,
    ActivationKind.GAUSSIAN: lambda x, p: np.exp(-x * x),
    ActivationKind.SINC: _sinc,
    ActivationKind.SINUSOID: lambda x, p: np.sin(x),
    ActivationKind.RELU: lambda x, p: np.maximum(x, 0.0),
    ActivationKind.LEAKYRELU: lambda x, p: _leaky(x, p["slope"]),
    ActivationKind.PRELU: lambda x, p: _leaky(x, p["slope"]),
    ActivationKind.RRELU: lambda x, p: _leaky(x, p["slope"]),
    ActivationKind.ELU: _elu,
    ActivationKind.SRELU: _srelu,
    ActivationKind.APL: _apl,
    ActivationKind.SOFTEXPONENTIAL: _softexp,
}

_DERIV = {
    ActivationKind.SIGMOID: lambda x, p: _sigmoid(x) * (1.0 - _sigmoid(x)),
    ActivationKind.TANH: lambda x, p: 1.0 - np.tanh(x) ** 2,
    ActivationKind.ARCTAN: lambda x, p: 1.0 / (1.0 + x * x),
    ActivationKind.SOFTSIGN: lambda x, p: 1.0 / (1.0 + np.abs(x)) ** 2,
    ActivationKind.SOFTPLUS: lambda x, p: _sigmoid(x),
    ActivationKind.BENTIDENTITY: lambda x, p: x / (2.0 * np.sqrt(x * x + 1.0)) + 1.0,
    ActivationKind.GAUSSIAN: lambda x, p: -2.0 * x * np.exp(-x * x),
    ActivationKind.SINC: _sinc_deriv,
    ActivationKind.SINUSOID: lambda x, p: np.cos(x),
    ActivationKind.RELU: lambda x, p: np.where(x >= 0, 1.0, 0.0),
    ActivationKind.LEAKYRELU: lambda x, p: _leaky_deriv(x, p["slope"]),
    ActivationKind.PRELU: lambda x, p: _leaky_deriv(x, p["slope"]),
    ActivationKind.RRELU: lambda x, p: _leaky_deriv(x, p["slope"]),
    ActivationKind.ELU: _elu_deriv,
    ActivationKind.SRELU: _srelu_deriv,
    ActivationKind.APL: _apl_deriv,
    ActivationKind.SOFTEXPONENTIAL: _softexp_deriv,
}


def _leaky_range(p):
    return (-math.inf if p["slope"] > 0 else 0.0, math.inf)


def _srelu_range(p):
    lo = -math.inf if p["a_left"] > 0 else (p["t_left"] if p["a_left"] == 0 else math.inf)
    hi = math.inf if p["a_right"] > 0 else (p["t_right"] if p["a_right"] == 0 else -math.inf)
    if p["a_left"] < 0 or p["a_right"] < 0:
        # negative outer slopes make both tails unbounded in the same direction
        lo, hi = -math.inf, math.inf
    return (lo, hi)


def _apl_range(p):
    a, b = p["a"], p["b"]
    if a < 0:
        return (-math.inf, math.inf)
    return (0.0 if b <= 0 else min(a * b, b), math.inf)


def _softexp_range(p):
    a = p["alpha"]
    return (-math.inf if a == 0 else a - 1.0 / a, math.inf)


_RANGE = {
    ActivationKind.SIGMOID: lambda p: (0.0, 1.0),
    ActivationKind.TANH: lambda p: (-1.0, 1.0),
    ActivationKind.ARCTAN: lambda p: (-math.pi / 2, math.pi / 2),
    ActivationKind.SOFTSIGN: lambda p: (-1.0, 1.0),
    ActivationKind.SOFTPLUS: lambda p: (0.0, math.inf),
    ActivationKind.BENTIDENTITY: lambda p: (-math.inf, math.inf),
    ActivationKind.GAUSSIAN: lambda p: (0.0, 1.0),
    ActivationKind.SINC: lambda p: (_SINC_MIN, 1.0),
    ActivationKind.SINUSOID: lambda p: (-1.0, 1.0),
    ActivationKind.RELU: lambda p: (0.0, math.inf),
    ActivationKind.LEAKYRELU: _leaky_range,
    ActivationKind.PRELU: _leaky_range,
    ActivationKind.RRELU: _leaky_range,
    ActivationKind.ELU: lambda p: (-p["alpha"], math.inf),
    ActivationKind.SRELU: _srelu_range,
    ActivationKind.APL: _apl_range,
    ActivationKind.SOFTEXPONENTIAL: _softexp_range,
}
