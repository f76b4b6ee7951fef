"""Command line entry point: ``sgt classify|regress|mil|dump-tree``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time

import numpy as np

from ..tasks import MilTrainer, SGTClassifier, SGTRegressor
from ..tree import SgtConfig
from .data import DataError, DatasetSchema, iter_rows, load_bags, load_instances
from .evaluate import cross_validate_mil, prequential, shuffled, write_records
from .model_io import canonical, dumps_model, model_to_dict

log = logging.getLogger("sgt")

EXPECTED_TARGET = {"classify": "class", "regress": "numeric", "mil": "bag_label"}


def _add_common(p: argparse.ArgumentParser, data_required: bool = True):
    p.add_argument("--data", required=data_required, help="input CSV with a header row")
    p.add_argument("--schema", required=data_required, help="JSON schema sidecar")
    p.add_argument("--bins", type=int, default=64)
    p.add_argument("--warmup", type=int, default=1000, help="instances used to estimate numeric ranges")
    p.add_argument("--grace", type=int, default=200)
    p.add_argument("--lambda", dest="lambda_", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1e-3, help="significance level of the split test")
    p.add_argument("--two-sided", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="records CSV (streaming) or per-fold CSV (mil)")
    p.add_argument("--model-out", help="write the trained model as JSON")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sgt", description="Stochastic gradient trees")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("classify", "prequential streaming classification"),
                        ("regress", "prequential streaming regression")):
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        p.add_argument("--window", type=int, default=10_000)
        p.add_argument("--shuffle", action=argparse.BooleanOptionalAction, default=False,
                       help="shuffle in memory with --seed (default: stream the file in order)")
        p.add_argument("--timing", action="store_true",
                       help="fill the seconds column of the records CSV (makes it run-dependent)")
    p = sub.add_parser("mil", help="multi-instance k-fold cross-validation")
    _add_common(p)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--folds", type=int, default=10)
    p = sub.add_parser("dump-tree", help="re-emit a model JSON, or train on --data and dump the model")
    _add_common(p, data_required=False)
    p.add_argument("--model", help="existing model JSON to load and dump")
    p.add_argument("--window", type=int, default=10_000)
    p.add_argument("--shuffle", action=argparse.BooleanOptionalAction, default=False)
    return ap


def _config(args) -> SgtConfig:
    return SgtConfig(lambda_=args.lambda_, gamma=args.gamma, delta=args.delta, grace=args.grace,
                     bins=args.bins, warmup=args.warmup, two_sided=args.two_sided)


def _load_schema(args, task: str) -> DatasetSchema:
    schema = DatasetSchema.load(args.schema)
    if schema.target_kind != EXPECTED_TARGET[task]:
        raise DataError(f"'{task}' needs a {EXPECTED_TARGET[task]!r} target but schema "
                        f"{args.schema} declares {schema.target_kind!r}")
    return schema


def _stream(args, schema):
    if args.shuffle:
        X, y = load_instances(args.data, schema)
        X, y = shuffled(X, y, args.seed)
        return zip(X, y)
    return ((x, y) for x, y, _ in iter_rows(args.data, schema))


def _run_stream(args, task: str):
    schema = _load_schema(args, task)
    config = _config(args)
    feats = schema.feature_metas(config.bins)
    head = SGTClassifier(feats, schema.n_classes, config) if task == "classify" else SGTRegressor(feats, config)
    records, summary = prequential(_stream(args, schema), head, args.window)
    if args.out:
        write_records(records, args.out, timing=getattr(args, "timing", False))
    model = model_to_dict(task, head.trees, schema.class_values if task == "classify" else None)
    if args.model_out:
        with open(args.model_out, "w", encoding="utf-8") as fh:
            fh.write(dumps_model(model))
    return summary, model


def cmd_stream(args) -> int:
    summary, _ = _run_stream(args, args.command)
    print(json.dumps({"instances": summary.instances, summary.metric_name: summary.cumulative_metric,
                      "nodes": summary.nodes, "seconds": round(summary.seconds, 3)}))
    return 0


def cmd_mil(args) -> int:
    schema = _load_schema(args, "mil")
    config = _config(args)
    bags = load_bags(args.data, schema)
    feats = schema.feature_metas(config.bins)
    t0 = time.perf_counter()
    cv = cross_validate_mil(feats, bags.bags, bags.labels, folds=args.folds, seed=args.seed,
                            epochs=args.epochs, config=config)
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["fold", "n_test", "accuracy", "single_class"])
            for f in cv.folds:
                w.writerow([f.fold, f.n_test, repr(f.accuracy), int(f.single_class)])
    if args.model_out:
        trainer = MilTrainer(feats, config, epochs=args.epochs, seed=args.seed)
        tree = trainer.fit(bags.bags, bags.labels)
        with open(args.model_out, "w", encoding="utf-8") as fh:
            fh.write(dumps_model(model_to_dict("mil", [tree])))
    print(json.dumps({"bags": len(bags), "folds": args.folds, "mean_accuracy": cv.mean_accuracy,
                      "fold_accuracy": [f.accuracy for f in cv.folds],
                      "single_class_folds": [f.fold for f in cv.folds if f.single_class],
                      "seconds": round(time.perf_counter() - t0, 3)}))
    return 0


def cmd_dump(args) -> int:
    if args.model:
        with open(args.model, encoding="utf-8") as fh:
            text = canonical(fh.read())
    elif args.data and args.schema:
        schema = DatasetSchema.load(args.schema)
        task = {"class": "classify", "numeric": "regress"}.get(schema.target_kind)
        if task is None:
            raise DataError("dump-tree --data trains streaming models only; use 'mil --model-out'")
        args.out = None
        model_out, args.model_out = args.model_out, None
        _, model = _run_stream(args, task)
        args.model_out = model_out
        text = dumps_model(model)
    else:
        raise DataError("dump-tree needs --model, or --data and --schema")
    if args.model_out:
        with open(args.model_out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {"classify": cmd_stream, "regress": cmd_stream, "mil": cmd_mil, "dump-tree": cmd_dump}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (DataError, ValueError, OSError) as e:
        print(f"sgt {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
