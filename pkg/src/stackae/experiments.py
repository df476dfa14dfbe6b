"""Cross-validation driver, grid search, baseline comparison and ranking."""
from __future__ import annotations

import dataclasses
import itertools
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .activations import get_activation
from .baselines import (
    BASELINE_NAMES,
    knn_votes,
    pca_fit,
    pca_transform,
    rbf_net_train,
    svm_train_multiclass,
)
from .dataset import Dataset, FoldPlan, SynthSpec, kfold_split, load_csv, normalize_apply, normalize_fit, synth_generate
from .errors import ConfigError, DataError, EmptyTable, MissingFile, StackAEError
from .metrics import METRIC_FIELDS, MetricsReport, aggregate_folds, confusion, metrics_report, roc_auc
from .optimizers import OptimizerOptions, get_optimizer
from .stack import SoftmaxClassifier, build_model, fine_tune, forward_codes, predict, softmax_train, stack_pretrain
from .utils import derive_seed

log = logging.getLogger(__name__)

_SYNTH_PREFIX = "synth_"


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; field names double as config-file keys.

    ``data`` is a CSV path; when empty, the ``synth_*`` fields describe a
    generated dataset instead.
    """
    data: Optional[str] = None
    label_column: str = "Cancer"
    synth_n_samples: int = 1745
    synth_n_continuous: int = 22
    synth_n_binary: int = 16
    synth_n_classes: int = 2
    synth_class_separation: float = 3.0
    synth_noise_std: float = 1.0
    synth_seed: int = 0
    architectures: tuple = ((30, 15),)
    activations: tuple = ("arctan",)
    optimizers: tuple = ("scg",)
    k_folds: int = 5
    seed: int = 0
    epochs: int = 100
    l2: float = 1e-4
    sparsity: float = 0.05
    sparsity_weight: float = 1.0
    softmax_l2: float = 1e-4
    stack_l2: float = 1e-4
    normalization: str = "zscore"
    positive_class: int = 1
    baselines: tuple = BASELINE_NAMES
    pca_variance: Union[float, int] = 0.95
    svm_kernel: str = "linear"
    svm_C: float = 1.0
    svm_gamma: Optional[float] = None
    rbf_centers: int = 20
    sort_key: str = "accuracy"
    top_n: int = 10
    workers: int = 1
    out: str = "results"

    def __post_init__(self):
        arch = tuple(tuple(int(w) for w in a) for a in self.architectures)
        object.__setattr__(self, "architectures", arch)
        for name in ("activations", "optimizers", "baselines"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        if not self.architectures or any(not a or min(a) < 1 for a in self.architectures):
            raise ConfigError("architectures must be nonempty lists of positive widths")
        if not self.activations:
            raise ConfigError("activation list is empty")
        if not self.optimizers:
            raise ConfigError("optimizer list is empty")
        for a in self.activations:
            get_activation(a)
        for o in self.optimizers:
            get_optimizer(o)
        for b in self.baselines:
            if b not in BASELINE_NAMES:
                raise ConfigError(f"unknown baseline {b!r}; choose from {', '.join(BASELINE_NAMES)}")
        if self.k_folds < 2:
            raise ConfigError("k_folds must be >= 2")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.normalization not in ("zscore", "minmax"):
            raise ConfigError("normalization must be zscore or minmax")
        if self.sort_key not in METRIC_FIELDS:
            raise ConfigError(f"sort_key must be one of {', '.join(METRIC_FIELDS)}")
        if self.top_n < 1 or self.workers < 1 or self.rbf_centers < 1:
            raise ConfigError("top_n, workers and rbf_centers must be >= 1")
        if min(self.l2, self.softmax_l2, self.stack_l2, self.sparsity_weight) < 0:
            raise ConfigError("penalty coefficients must be >= 0")

    def synth_spec(self) -> SynthSpec:
        return SynthSpec(**{f.name[len(_SYNTH_PREFIX):]: getattr(self, f.name)
                            for f in dataclasses.fields(self) if f.name.startswith(_SYNTH_PREFIX)})

    def options(self) -> OptimizerOptions:
        return OptimizerOptions(max_iter=self.epochs)

    def snapshot(self) -> dict:
        d = dataclasses.asdict(self)
        d["architectures"] = [list(a) for a in self.architectures]
        for name in ("activations", "optimizers", "baselines"):
            d[name] = list(d[name])
        return d

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


# ---------------------------------------------------------------------------
# config files


def _parse_value(name, raw, ftype):
    raw = raw.strip()
    try:
        if name == "architectures":
            return tuple(tuple(int(w) for w in part.split(",")) for part in raw.split(";") if part.strip())
        if name in ("activations", "optimizers", "baselines"):
            return tuple(p.strip() for p in raw.split(",") if p.strip())
        if name == "pca_variance":
            return int(raw) if raw.isdigit() else float(raw)
        if name in ("data", "svm_gamma"):
            if raw in ("", "none", "None"):
                return None
            return raw if name == "data" else float(raw)
        if ftype in (int, "int"):
            return int(raw)
        if ftype in (float, "float"):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """Read flat ``key=value`` lines; ``#`` starts a comment."""
    types = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
    defaults = ExperimentConfig()
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected key=value")
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        default = getattr(defaults, key)
        ftype = type(default) if default is not None and not isinstance(default, tuple) else types[key]
        values[key] = _parse_value(key, raw, ftype)
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, **overrides) -> ExperimentConfig:
    if path is None:
        return parse_config("", **overrides)
    if not os.path.isfile(path):
        raise ConfigError(f"no such config file: {path}")
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), **overrides)


def load_dataset(config: ExperimentConfig) -> Dataset:
    if config.data:
        return load_csv(config.data, config.label_column)
    return synth_generate(config.synth_spec())


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class ResultRow:
    architecture: tuple
    optimizer: str
    activation: str
    mean: Optional[MetricsReport]
    folds: tuple = ()
    failed: bool = False
    message: str = ""
    wall_time: float = field(default=0.0, compare=False)

    @property
    def key(self) -> tuple:
        return (self.architecture, self.optimizer, self.activation)

    def to_dict(self) -> dict:
        return {
            "architecture": list(self.architecture),
            "optimizer": self.optimizer,
            "activation": self.activation,
            "mean": None if self.mean is None else self.mean.as_dict(),
            "folds": [r.as_dict() for r in self.folds],
            "failed": self.failed,
            "message": self.message,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ResultRow":
        return cls(tuple(d["architecture"]), d["optimizer"], d["activation"],
                   None if d["mean"] is None else MetricsReport.from_dict(d["mean"]),
                   tuple(MetricsReport.from_dict(r) for r in d["folds"]),
                   bool(d["failed"]), d.get("message", ""))


@dataclass(frozen=True)
class ResultTable:
    rows: tuple
    config: dict = field(default_factory=dict)
    seed: int = 0
    assignments: Optional[tuple] = None

    def dumps(self) -> str:
        doc = {"rows": [r.to_dict() for r in self.rows], "config": self.config, "seed": self.seed,
               "assignments": None if self.assignments is None else list(self.assignments)}
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "ResultTable":
        try:
            doc = json.loads(text)
            rows = tuple(ResultRow.from_dict(r) for r in doc["rows"])
        except (ValueError, KeyError, TypeError) as exc:
            raise DataError(f"malformed result table: {exc}") from None
        a = doc.get("assignments")
        return cls(rows, doc.get("config", {}), doc.get("seed", 0), None if a is None else tuple(a))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "ResultTable":
        if not os.path.isfile(path):
            raise MissingFile(f"no such table file: {path}")
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


# ---------------------------------------------------------------------------
# evaluation and the per-fold pipeline


def evaluate_predictions(y_true, preds, positive_class=1, probs=None, scores=None) -> MetricsReport:
    """Metrics for one fold; ``scores`` ranks samples for AUC when ``probs`` is absent."""
    y_true = np.asarray(y_true)
    report = metrics_report(confusion(y_true, preds, positive_class), probs,
                            y_true if probs is not None else None, positive_class)
    if report.auc is None and scores is not None:
        pos = y_true == positive_class
        if pos.any() and (~pos).any():
            _, auc = roc_auc(np.asarray(scores, dtype=float), pos)
            report = dataclasses.replace(report, auc=auc)
    return report


def fit_stack(X, y, architecture, activation, optimizer, config: ExperimentConfig, seed,
              feature_names=None, class_names=None, n_classes=None):
    """Normalize, pretrain, fit the head and fine-tune on training rows only."""
    opts = config.options()
    norm = normalize_fit(X, config.normalization)
    Xn = normalize_apply(norm, X)
    encoders = stack_pretrain(Xn, architecture, activation, optimizer, opts, config.l2,
                              config.sparsity, config.sparsity_weight, seed)
    c = int(n_classes if n_classes is not None else np.max(y) + 1)
    model = build_model(encoders, SoftmaxClassifier(np.zeros((c, architecture[-1])), np.zeros(c),
                                                    config.softmax_l2),
                        config.stack_l2, norm, feature_names, class_names)
    H = forward_codes(model, X)
    head = softmax_train(H, y, optimizer, opts, config.softmax_l2, seed, n_classes=c)
    model = dataclasses.replace(model, softmax=head)
    return fine_tune(model, X, y, optimizer, opts, config.stack_l2, seed)


def _plan_for(ds: Dataset, config: ExperimentConfig) -> FoldPlan:
    return kfold_split(ds.n_samples, config.k_folds, config.seed)


def row_seed(config: ExperimentConfig, key) -> int:
    return derive_seed(config.seed, "row", repr(key))


def run_cv(ds: Dataset, architecture, activation, optimizer, config: ExperimentConfig,
           plan: Optional[FoldPlan] = None, seed: Optional[int] = None) -> ResultRow:
    """K-fold evaluation of one (architecture, optimizer, activation) cell.

    Training errors are caught and reported on the row instead of raised.
    """
    architecture = tuple(int(w) for w in architecture)
    activation = get_activation(activation).name
    optimizer = get_optimizer(optimizer).value
    key = (architecture, optimizer, activation)
    plan = plan or _plan_for(ds, config)
    seed = row_seed(config, key) if seed is None else seed
    start = time.perf_counter()
    reports = []
    try:
        for f, (tr, te) in enumerate(plan.folds()):
            model = fit_stack(ds.features[tr], ds.labels[tr], architecture, activation, optimizer,
                              config, derive_seed(seed, "fold", f), n_classes=ds.n_classes)
            preds, probs = predict(model, ds.features[te])
            reports.append(evaluate_predictions(ds.labels[te], preds, config.positive_class, probs))
    except (StackAEError, FloatingPointError, np.linalg.LinAlgError) as exc:
        log.warning("row %s failed: %s", key, exc)
        return ResultRow(architecture, optimizer, activation, None, tuple(reports), True,
                         f"{type(exc).__name__}: {exc}", time.perf_counter() - start)
    return ResultRow(architecture, optimizer, activation, aggregate_folds(reports), tuple(reports),
                     wall_time=time.perf_counter() - start)


def _grid_task(args):
    ds, arch, act, opt, config, assignments = args
    plan = FoldPlan(config.k_folds, np.asarray(assignments), config.seed)
    return run_cv(ds, arch, act, opt, config, plan)


def grid_keys(config: ExperimentConfig) -> list[tuple]:
    return [(a, get_optimizer(o).value, get_activation(f).name)
            for a, o, f in itertools.product(config.architectures, config.optimizers, config.activations)]


def run_grid(config: ExperimentConfig, dataset: Optional[Dataset] = None,
             workers: Optional[int] = None) -> ResultTable:
    """One row per architecture x optimizer x activation, sharing one fold plan.

    Each row's seed depends only on the master seed and the row's own key,
    so results do not depend on row order or on ``workers``.
    """
    ds = dataset if dataset is not None else load_dataset(config)
    plan = _plan_for(ds, config)
    keys = grid_keys(config)
    tasks = [(ds, a, f, o, config, tuple(plan.assignments.tolist())) for a, o, f in keys]
    workers = config.workers if workers is None else workers
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            rows = list(pool.map(_grid_task, tasks))
    else:
        rows = [_grid_task(t) for t in tasks]
    by_key = {r.key: r for r in rows}
    return ResultTable(tuple(by_key[k] for k in keys), config.snapshot(), config.seed,
                       tuple(plan.assignments.tolist()))


def rank_table(table: ResultTable, sort_key: str = "accuracy", top_n: Optional[int] = 10) -> ResultTable:
    """Descending by ``sort_key``; ties by (optimizer, activation); failed rows last."""
    if not table.rows:
        raise EmptyTable("cannot rank an empty table")
    if sort_key not in METRIC_FIELDS:
        raise ConfigError(f"unknown sort key {sort_key!r}")

    def order(row):
        v = None if row.mean is None else getattr(row.mean, sort_key)
        return (v is None, -(v if v is not None else 0.0), row.optimizer, row.activation)

    rows = sorted(table.rows, key=order)
    if top_n is not None:
        rows = rows[:top_n]
    return dataclasses.replace(table, rows=tuple(rows))


# ---------------------------------------------------------------------------
# baselines


def _fit_baseline(name, Xtr, ytr, Xte, config: ExperimentConfig, seed, n_classes):
    """Train one PCA-prefixed baseline on training rows; return test (labels, probs, scores)."""
    norm = normalize_fit(Xtr, config.normalization)
    pca = pca_fit(normalize_apply(norm, Xtr), config.pca_variance)
    Ztr = pca_transform(pca, normalize_apply(norm, Xtr))
    Zte = pca_transform(pca, normalize_apply(norm, Xte))
    pos = config.positive_class
    if name.endswith("nn"):
        k = int(name[len("pca-"):-len("nn")])
        votes, labels = knn_votes(Ztr, ytr, Zte, k, n_classes)
        return labels, votes / k, None
    if name == "pca-svm":
        svm = svm_train_multiclass(Ztr, ytr, n_classes, kernel=config.svm_kernel, C=config.svm_C,
                                   gamma=config.svm_gamma, seed=seed)
        s = svm.decision_function(Zte)
        return svm.predict(Zte), None, s if s.ndim == 1 else s[:, pos]
    if name == "pca-rbf":
        rbf = rbf_net_train(Ztr, ytr, min(config.rbf_centers, Ztr.shape[0]), seed, n_classes=n_classes)
        return rbf.predict(Zte), None, rbf.scores(Zte)[:, pos]
    if name == "pca-softmax":
        clf = softmax_train(Ztr, ytr, "scg", config.options(), config.softmax_l2, seed, n_classes)
        logits = Zte @ clf.W.T + clf.b
        P = np.exp(logits - logits.max(axis=1, keepdims=True))
        P /= P.sum(axis=1, keepdims=True)
        return np.argmax(P, axis=1).astype(np.int64), P, None
    raise ConfigError(f"unknown baseline {name!r}")


def run_baseline_cv(ds: Dataset, name: str, config: ExperimentConfig,
                    plan: Optional[FoldPlan] = None) -> ResultRow:
    plan = plan or _plan_for(ds, config)
    seed = row_seed(config, ("baseline", name))
    start = time.perf_counter()
    reports = []
    try:
        for f, (tr, te) in enumerate(plan.folds()):
            labels, probs, scores = _fit_baseline(name, ds.features[tr], ds.labels[tr], ds.features[te],
                                                  config, derive_seed(seed, "fold", f), ds.n_classes)
            reports.append(evaluate_predictions(ds.labels[te], labels, config.positive_class, probs, scores))
    except (StackAEError, FloatingPointError, np.linalg.LinAlgError) as exc:
        log.warning("baseline %s failed: %s", name, exc)
        return ResultRow((), name, "-", None, tuple(reports), True, f"{type(exc).__name__}: {exc}",
                         time.perf_counter() - start)
    return ResultRow((), name, "-", aggregate_folds(reports), tuple(reports),
                     wall_time=time.perf_counter() - start)


def compare_baselines(ds: Dataset, config: ExperimentConfig) -> ResultTable:
    """Each configured baseline plus the proposed stack, all on one fold plan.

    The proposed row uses the first architecture, optimizer and activation
    of ``config``.
    """
    plan = _plan_for(ds, config)
    rows = [run_baseline_cv(ds, name, config, plan) for name in config.baselines]
    rows.append(run_cv(ds, config.architectures[0], config.activations[0], config.optimizers[0],
                       config, plan))
    return ResultTable(tuple(rows), config.snapshot(), config.seed, tuple(plan.assignments.tolist()))

