"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 training or other runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .dataset import load_csv, save_csv, synth_generate
from .errors import ConfigError, DataError, StackAEError, TrainingError
from .experiments import (
    compare_baselines,
    evaluate_predictions,
    fit_stack,
    load_config,
    load_dataset,
    rank_table,
    row_seed,
    run_grid,
    ResultTable,
)
from .report import FORMATS, emit_report
from .stack import load_model, predict, save_model

log = logging.getLogger("stackae")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser, out_default: str, folds=True, workers=False):
    p.add_argument("--config", help="flat key=value experiment config")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    if folds:
        p.add_argument("--folds", type=int, help="number of CV folds (overrides k_folds)")
    if workers:
        p.add_argument("--workers", type=int, help="parallel grid workers")
    p.add_argument("--out", default=out_default, help=f"output path (default {out_default})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stackae", description="Stacked sparse autoencoder experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic CSV dataset")
    _common(p, "synth.csv", folds=False)
    p.add_argument("--n-samples", type=int)
    p.add_argument("--separation", type=float)

    p = sub.add_parser("train", help="train one pipeline on a full dataset, write a model file")
    _common(p, "model.txt", folds=False)
    p.add_argument("--data", help="CSV path (overrides config data)")
    p.add_argument("--architecture", help="hidden widths, e.g. 30,15")
    p.add_argument("--activation")
    p.add_argument("--optimizer")

    p = sub.add_parser("evaluate", help="score a model on a CSV, write metrics JSON")
    _common(p, "metrics.json", folds=False)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)

    p = sub.add_parser("gridsearch", help="cross-validate every grid cell")
    _common(p, "grid", workers=True)

    p = sub.add_parser("baselines", help="PCA baselines against the proposed stack")
    _common(p, "baselines")

    p = sub.add_parser("report", help="render a saved result table")
    p.add_argument("--table", required=True, help="JSON table written by gridsearch/baselines")
    p.add_argument("--format", choices=FORMATS, default="csv")
    p.add_argument("--sort-key")
    p.add_argument("--top-n", type=int)
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    return parser


def _config(args, **extra):
    overrides = dict(seed=getattr(args, "seed", None), k_folds=getattr(args, "folds", None),
                     workers=getattr(args, "workers", None))
    overrides.update(extra)
    return load_config(args.config, **overrides)


def _ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def cmd_synth(args):
    cfg = _config(args, synth_seed=args.seed, seed=None, synth_n_samples=args.n_samples,
                  synth_class_separation=args.separation)
    ds = synth_generate(cfg.synth_spec())
    save_csv(ds, args.out, cfg.label_column)
    print(f"wrote {ds.n_samples} x {ds.n_features} dataset to {args.out}")


def cmd_train(args):
    extra = dict(data=args.data, activations=[args.activation] if args.activation else None,
                 optimizers=[args.optimizer] if args.optimizer else None)
    if args.architecture:
        try:
            extra["architectures"] = [[int(w) for w in args.architecture.split(",")]]
        except ValueError:
            raise ConfigError(f"bad architecture {args.architecture!r}") from None
    cfg = _config(args, **extra)
    ds = load_dataset(cfg)
    arch, act, opt = cfg.architectures[0], cfg.activations[0], cfg.optimizers[0]
    model = fit_stack(ds.features, ds.labels, arch, act, opt, cfg, row_seed(cfg, (arch, opt, act)),
                      ds.feature_names, ds.class_names, ds.n_classes)
    save_model(model, args.out)
    print(f"wrote model {list(arch)} {opt}/{act} to {args.out}")


def cmd_evaluate(args):
    cfg = _config(args)
    model = load_model(args.model)
    ds = load_csv(args.data, cfg.label_column)
    if model.class_names is not None and tuple(model.class_names) != ds.class_names:
        # align label ids with the model's class order
        index = {name: i for i, name in enumerate(model.class_names)}
        try:
            labels = [index[ds.class_names[c]] for c in ds.labels]
        except KeyError as exc:
            raise DataError(f"class {exc.args[0]!r} unknown to the model") from None
    else:
        labels = ds.labels
    preds, probs = predict(model, ds.features)
    report = evaluate_predictions(labels, preds, cfg.positive_class, probs)
    doc = {"n_samples": ds.n_samples, "metrics": report.as_dict()}
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    print(f"accuracy {report.accuracy:.6f}; wrote {args.out}")


def _write_tables(table, ranked, out_dir, stem):
    table.save(os.path.join(out_dir, f"{stem}.json"))
    emit_report(ranked, "csv", os.path.join(out_dir, f"{stem}.csv"))
    emit_report(ranked, "markdown", os.path.join(out_dir, f"{stem}.md"))


def cmd_gridsearch(args):
    cfg = _config(args)
    table = run_grid(cfg)
    out = _ensure_dir(args.out)
    _write_tables(table, rank_table(table, cfg.sort_key, cfg.top_n), out, "grid")
    failed = sum(r.failed for r in table.rows)
    print(f"{len(table.rows)} rows ({failed} failed); wrote {out}")


def cmd_baselines(args):
    cfg = _config(args)
    table = compare_baselines(load_dataset(cfg), cfg)
    out = _ensure_dir(args.out)
    _write_tables(table, table, out, "baselines")
    print(f"{len(table.rows)} rows; wrote {out}")


def cmd_report(args):
    table = ResultTable.load(args.table)
    if args.sort_key or args.top_n:
        table = rank_table(table, args.sort_key or "accuracy", args.top_n)
    text = emit_report(table, args.format, args.out)
    if args.out is None:
        sys.stdout.write(text)


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "evaluate": cmd_evaluate,
            "gridsearch": cmd_gridsearch, "baselines": cmd_baselines, "report": cmd_report}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingError, StackAEError, ArithmeticError, RuntimeError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
