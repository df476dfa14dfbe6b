"""Tabular data: CSV ingestion, normalization, fold plans, synthetic data."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    BadFoldCount,
    BadSpec,
    ConfigError,
    ConstantFeature,
    DataError,
    DimensionMismatch,
    MalformedRow,
    MissingFile,
    MissingValue,
    SingleClass,
    UnknownLabelColumn,
)

MISSING_MARKERS = frozenset({"", "NA"})

# Default schema: 22 continuous laboratory/clinical measurements and 16 binary
# indicators (gender plus symptom flags), 38 predictors in total.
CONTINUOUS_FEATURES = (
    "Age", "WBC", "Hematocrit", "Hemoglobin", "Platelets", "Sodium", "LDH",
    "UricAcid", "Creatinine", "ESR", "PT", "PTa", "PTT", "ALP", "BilirubinT",
    "BilirubinD", "SGOT", "SGPT", "MCV", "MCH", "MCHC", "RDW",
)
BINARY_FEATURES = (
    "Gender", "Infection", "IN.LY", "FATH", "MuscleCramps", "LSV", "Swoon",
    "LooseSkin", "Hemorrhage", "PainBone", "W.Irish", "Depreciatory.bu",
    "Nausea", "Cough", "IN.foot", "WSF",
)
DEFAULT_LABEL = "Cancer"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...]

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels)
        if X.ndim != 2:
            raise DimensionMismatch("features must be a 2-D matrix")
        n, d = X.shape
        if n < 2 or d < 1:
            raise DataError(f"need at least 2 samples and 1 feature, got {X.shape}")
        if y.shape != (n,):
            raise DimensionMismatch(f"labels have shape {y.shape}, expected ({n},)")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain non-finite values")
        if y.dtype.kind not in "iu":
            if not np.all(np.mod(y, 1) == 0):
                raise DataError("labels must be integers")
        y = y.astype(np.int64)
        names = tuple(str(s) for s in self.feature_names)
        classes = tuple(str(s) for s in self.class_names)
        if len(names) != d:
            raise DimensionMismatch(f"{len(names)} feature names for {d} columns")
        if len(set(names)) != d:
            raise DataError("duplicate feature names")
        c = len(classes)
        if c < 2:
            raise SingleClass("need at least 2 classes")
        if y.min() < 0 or y.max() >= c:
            raise DataError(f"labels must lie in 0..{c - 1}")
        if len(np.unique(y)) != c:
            raise DataError("every class id must appear at least once")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "class_names", classes)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def subset(self, index) -> tuple[np.ndarray, np.ndarray]:
        """Rows ``index`` as ``(X, y)``; the class list may then be incomplete."""
        index = np.asarray(index)
        return self.features[index], self.labels[index]


def load_csv(path, label_column: str) -> Dataset:
    """Read a headed, comma-separated file into a :class:`Dataset`.

    Class ids follow the order in which distinct label strings first appear.
    Rows with a missing cell (empty or ``NA``) are rejected.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise MissingFile(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRow(1, "empty file, header row expected") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise UnknownLabelColumn(f"label column {label_column!r} not in header")
        li = header.index(label_column)
        names = [h for i, h in enumerate(header) if i != li]
        rows, raw_labels = [], []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedRow(line, f"expected {len(header)} cells, got {len(row)}")
            values = []
            for i, cell in enumerate(row):
                cell = cell.strip()
                if cell in MISSING_MARKERS:
                    raise MissingValue(line, f"missing value in column {header[i]!r}")
                if i == li:
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise MalformedRow(line, f"cannot parse {cell!r} in column {header[i]!r}") from None
                if not math.isfinite(v):
                    raise MalformedRow(line, f"non-finite value in column {header[i]!r}")
                values.append(v)
            rows.append(values)
            raw_labels.append(row[li].strip())
    classes: dict[str, int] = {}
    for lab in raw_labels:
        classes.setdefault(lab, len(classes))
    if len(classes) < 2:
        raise SingleClass(f"{path}: fewer than 2 distinct labels")
    y = np.array([classes[lab] for lab in raw_labels], dtype=np.int64)
    X = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return Dataset(X, y, tuple(names), tuple(classes))


def save_csv(ds: Dataset, path, label_column: str = DEFAULT_LABEL) -> None:
    """Write ``ds`` so that :func:`load_csv` restores it exactly."""
    if label_column in ds.feature_names:
        raise ConfigError(f"label column {label_column!r} clashes with a feature name")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*ds.feature_names, label_column])
        for x, c in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in x] + [ds.class_names[c]])


# ---------------------------------------------------------------------------
# normalization


@dataclass(frozen=True)
class NormalizationParams:
    """Per-feature statistics: ``(mean, std)`` for zscore, ``(min, max)`` for minmax."""

    method: str
    first: np.ndarray
    second: np.ndarray

    def __post_init__(self):
        if self.method not in ("zscore", "minmax"):
            raise ConfigError(f"unknown normalization {self.method!r}")
        first = np.asarray(self.first, dtype=float)
        second = np.asarray(self.second, dtype=float)
        if first.shape != second.shape or first.ndim != 1:
            raise DimensionMismatch("statistic vectors must be 1-D and equal length")
        if self.method == "zscore" and np.any(second <= 0):
            raise ConstantFeature(int(np.argmax(second <= 0)))
        if self.method == "minmax" and np.any(second <= first):
            raise ConstantFeature(int(np.argmax(second <= first)))
        object.__setattr__(self, "first", _frozen(first))
        object.__setattr__(self, "second", _frozen(second))

    @property
    def dimension(self) -> int:
        return self.first.shape[0]


def normalize_fit(data, method: str = "zscore") -> NormalizationParams:
    X = data.features if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise DimensionMismatch("expected a nonempty 2-D matrix")
    if method == "zscore":
        mean = X.mean(axis=0)
        std = X.std(axis=0)  # population (1/N) convention
        # a column that is constant up to rounding has std ~ eps*|mean|
        bad = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
        if np.any(bad):
            raise ConstantFeature(int(np.argmax(bad)))
        return NormalizationParams("zscore", mean, std)
    if method == "minmax":
        lo, hi = X.min(axis=0), X.max(axis=0)
        if np.any(hi <= lo):
            raise ConstantFeature(int(np.argmax(hi <= lo)))
        return NormalizationParams("minmax", lo, hi)
    raise ConfigError(f"unknown normalization {method!r}")


def normalize_apply(params: NormalizationParams, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.dimension:
        raise DimensionMismatch(f"expected {params.dimension} columns, got shape {X.shape}")
    if params.method == "zscore":
        return (X - params.first) / params.second
    return np.clip((X - params.first) / (params.second - params.first), 0.0, 1.0)


# ---------------------------------------------------------------------------
# folds


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "assignments", _frozen(np.asarray(self.assignments, dtype=np.int64)))

    @property
    def n(self) -> int:
        return self.assignments.shape[0]

    def test_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_index(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def folds(self):
        for f in range(self.k):
            yield self.train_index(f), self.test_index(f)


def kfold_split(n: int, k: int, seed: int) -> FoldPlan:
    """Shuffled partition of ``range(n)`` into ``k`` folds of near-equal size."""
    if not (isinstance(k, (int, np.integer)) and 2 <= k <= n):
        raise BadFoldCount(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    assignments = np.empty(n, dtype=np.int64)
    assignments[perm] = np.arange(n) % k
    return FoldPlan(int(k), assignments, int(seed))


# ---------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SynthSpec:
    n_samples: int = 1745
    n_continuous: int = 22
    n_binary: int = 16
    n_classes: int = 2
    class_separation: float = 3.0
    noise_std: float = 1.0
    seed: int = 0
    class_priors: Optional[Sequence[float]] = field(default=None)

    @property
    def n_features(self) -> int:
        return self.n_continuous + self.n_binary

    def priors(self) -> np.ndarray:
        if self.class_priors is None:
            return np.full(self.n_classes, 1.0 / self.n_classes)
        return np.asarray(self.class_priors, dtype=float)

    def validate(self) -> None:
        if self.n_classes < 2:
            raise BadSpec("n_classes must be >= 2")
        if self.n_samples < max(2, self.n_classes):
            raise BadSpec("n_samples must be >= max(2, n_classes)")
        if self.n_continuous < 0 or self.n_binary < 0 or self.n_features < 1:
            raise BadSpec("need at least one feature and no negative counts")
        if not self.class_separation >= 0:
            raise BadSpec("class_separation must be >= 0")
        if not self.noise_std > 0:
            raise BadSpec("noise_std must be > 0")
        p = self.priors()
        if p.shape != (self.n_classes,) or np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-9:
            raise BadSpec("class_priors must be n_classes positive values summing to 1")


def _schema_names(n: int, pool: Sequence[str], prefix: str) -> list[str]:
    if n <= len(pool):
        return list(pool[:n])
    return list(pool) + [f"{prefix}{i}" for i in range(len(pool), n)]


def synth_generate(spec: SynthSpec) -> Dataset:
    """Draw a labelled mixture: class-shifted Gaussians plus class-dependent coin flips.

    Continuous class means are ``class_separation / 2`` times a unit direction
    (centred across classes, so two classes sit back to back); every feature
    then gets an arbitrary location/scale so the raw data needs normalizing.
    Binary rates are ``0.1 + 0.8 * sigmoid(base + 0.25 * class_separation * w)``
    with class-centred ``w``. With ``class_separation == 0`` labels carry no signal.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, c = spec.n_samples, spec.n_classes
    priors = spec.priors()
    # guarantee every class appears, then draw the rest from the priors
    y = np.concatenate([np.arange(c), rng.choice(c, size=n - c, p=priors)])
    y = y[rng.permutation(n)]

    cols = []
    if spec.n_continuous:
        m = spec.n_continuous
        directions = rng.standard_normal((c, m))
        directions -= directions.mean(axis=0)
        norms = np.linalg.norm(directions, axis=1, keepdims=True)
        directions /= np.where(norms > 0, norms, 1.0)
        means = 0.5 * spec.class_separation * directions
        z = means[y] + spec.noise_std * rng.standard_normal((n, m))
        loc = rng.uniform(-50.0, 150.0, size=m)
        scale = rng.uniform(0.5, 20.0, size=m)
        cols.append(loc + scale * z)
    if spec.n_binary:
        b = spec.n_binary
        base = rng.uniform(-1.0, 1.0, size=b)
        w = rng.standard_normal((c, b))
        w -= w.mean(axis=0)
        # rates kept inside [0.1, 0.9] so no column is constant within a fold
        rate = 0.1 + 0.8 / (1.0 + np.exp(-(base + 0.25 * spec.class_separation * w)))
        cols.append((rng.random((n, b)) < rate[y]).astype(float))
    X = np.hstack(cols)
    names = (_schema_names(spec.n_continuous, CONTINUOUS_FEATURES, "Cont")
             + _schema_names(spec.n_binary, BINARY_FEATURES, "Bin"))
    classes = ("healthy", "cancer") if c == 2 else tuple(f"class{i}" for i in range(c))
    return Dataset(X, y, tuple(names), classes)
