"""Command-line interface: train, predict, evaluate, explain.

Exit codes: 0 success, 2 bad flags, 3 data/model-file errors, 4 training
failure.  All commands are deterministic given their flags; the
RULECAST_THREADS environment variable caps evaluation workers (0 = all
cores).
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .data import CATEGORICAL, MISSING_TOKENS, impute_mode, load_csv, load_schema, make_split_plan
from .errors import DataError, TrainingError
from .evaluate import (
    KNOWN_BASELINES,
    PipelineConfig,
    atomic_write_text,
    report_to_dict,
    run_experiment,
    train_pipeline,
    write_fig_csv,
    write_fold_csv,
    write_summary_csv,
)
from .persist import load_model, save_model
from .predictor import WeightScheme, predict_sample
from .rules import render_rule

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_TRAINING = 4


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonnegative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


def _folds_arg(text: str) -> int:
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError(f"folds must be >= 2, got {value}")
    return value


def _m_values_arg(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad m-values list {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("m-values must be positive integers")
    return values


def _baselines_arg(text: str) -> tuple[str, ...]:
    text = text.strip()
    if text == "none":
        return ()
    values = tuple(v.strip() for v in text.split(",") if v.strip())
    for v in values:
        if v not in KNOWN_BASELINES:
            raise argparse.ArgumentTypeError(
                f"unknown baseline {v!r}; choose from {','.join(KNOWN_BASELINES)} or none"
            )
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rulecast",
        description="Personalized decision rules from tree ensembles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a rule pipeline and save the model")
    p_train.add_argument("--data", required=True, help="training CSV")
    p_train.add_argument("--schema", required=True, help="schema manifest path or bundled name")
    p_train.add_argument("--m-rules", required=True, type=_positive_int)
    p_train.add_argument("--trees", type=_positive_int, default=100)
    p_train.add_argument("--max-depth", type=_positive_int, default=3)
    p_train.add_argument("--seed", type=_nonnegative_int, default=42)
    p_train.add_argument("--weight-correct", type=_positive_float, default=2.0)
    p_train.add_argument("--weight-incorrect", type=_positive_float, default=1.0)
    p_train.add_argument("--out", default="model.json")
    p_train.set_defaults(func=cmd_train)

    p_predict = sub.add_parser("predict", help="score samples with a saved model")
    p_predict.add_argument("--model", required=True)
    p_predict.add_argument("--input", required=True, help="CSV with the model's feature columns")
    p_predict.add_argument("--format", choices=("text", "csv"), default="text")
    p_predict.set_defaults(func=cmd_predict)

    p_eval = sub.add_parser("evaluate", help="repeated stratified CV experiment")
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--schema", required=True)
    p_eval.add_argument("--repeats", type=_positive_int, default=10)
    p_eval.add_argument("--folds", type=_folds_arg, default=5)
    p_eval.add_argument("--m-values", type=_m_values_arg, default=(3, 5, 10, 15, 20))
    p_eval.add_argument("--baselines", type=_baselines_arg, default=KNOWN_BASELINES)
    p_eval.add_argument("--seed", type=_nonnegative_int, default=42)
    p_eval.add_argument("--trees", type=_positive_int, default=100)
    p_eval.add_argument("--max-depth", type=_positive_int, default=3)
    p_eval.add_argument("--weight-correct", type=_positive_float, default=2.0)
    p_eval.add_argument("--weight-incorrect", type=_positive_float, default=1.0)
    p_eval.add_argument("--report-dir", default="reports")
    p_eval.set_defaults(func=cmd_evaluate)

    p_explain = sub.add_parser("explain", help="print a saved model's rules")
    p_explain.add_argument("--model", required=True)
    p_explain.set_defaults(func=cmd_explain)

    return parser


def cmd_train(args) -> int:
    schema = load_schema(args.schema)
    dataset = impute_mode(load_csv(args.data, schema))
    config = PipelineConfig(
        n_trees=args.trees,
        max_depth=args.max_depth,
        seed=args.seed,
        weights=WeightScheme(args.weight_correct, args.weight_incorrect),
    )
    model = train_pipeline(dataset, args.m_rules, config)
    save_model(model, args.out)
    for rule, coef in zip(model.selected.rules, model.selected.coefficients):
        text = render_rule(rule, model.feature_names, model.feature_categories,
                           model.positive_name, model.negative_name)
        print(f"{text}  [coefficient {coef:+.4f}]")
    print(f"model written to {args.out}")
    return EXIT_OK


def _read_feature_rows(path, model):
    """Parse an input CSV into an (N, D) matrix using the model's schema."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            rows = [r for r in reader if r]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    positions = {}
    for name in model.feature_names:
        if name not in header:
            raise DataError(f"{path}: required feature column {name!r} is missing")
        positions[name] = header.index(name)

    X = np.empty((len(rows), len(model.feature_names)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(row)} cells, expected {len(header)}")
        for j, name in enumerate(model.feature_names):
            cell = row[positions[name]].strip()
            if cell in MISSING_TOKENS:
                raise DataError(f"{path}: row {i + 2}, column {name!r}: missing value")
            if model.feature_kinds[j] == CATEGORICAL:
                cats = model.feature_categories[j]
                if cell not in cats:
                    raise DataError(
                        f"{path}: row {i + 2}, column {name!r}: unknown category {cell!r}"
                    )
                X[i, j] = cats.index(cell)
            else:
                try:
                    X[i, j] = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {i + 2}, column {name!r}: unparseable numeric cell {cell!r}"
                    ) from None
    return X


def cmd_predict(args) -> int:
    model = load_model(args.model)
    X = _read_feature_rows(args.input, model)
    M = model.n_rules

    if args.format == "csv":
        header = ["probability"]
        for m in range(M):
            header += [f"rule{m + 1}_output", f"rule{m + 1}_correct", f"rule{m + 1}_weight"]
        print(",".join(header))
        for i in range(X.shape[0]):
            trace = predict_sample(model, X[i])
            cells = [repr(trace.probability)]
            for m in range(M):
                cells += [
                    str(int(trace.rule_outputs[m])),
                    str(int(trace.correctness_flags[m])),
                    f"{trace.weights[m]:g}",
                ]
            print(",".join(cells))
        return EXIT_OK

    if X.shape[0] == 0:
        print("no input samples")
        return EXIT_OK
    for i in range(X.shape[0]):
        trace = predict_sample(model, X[i])
        print(f"sample {i + 1}: probability({model.positive_name}) = {trace.probability:.3f}")
        for m, rule in enumerate(model.selected.rules):
            text = render_rule(rule, model.feature_names, model.feature_categories,
                               model.positive_name, model.negative_name)
            out_name = model.positive_name if trace.rule_outputs[m] == 1 else model.negative_name
            flag = "correct" if trace.correctness_flags[m] == 1 else "incorrect"
            print(
                f"  rule {m + 1}: output={out_name} predicted_{flag} "
                f"weight={trace.weights[m]:g} | {text}"
            )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    schema = load_schema(args.schema)
    dataset = impute_mode(load_csv(args.data, schema))
    plan = make_split_plan(dataset, repeats=args.repeats, folds=args.folds, seed=args.seed)
    config = PipelineConfig(
        n_trees=args.trees,
        max_depth=args.max_depth,
        seed=args.seed,
        weights=WeightScheme(args.weight_correct, args.weight_incorrect),
    )
    report = run_experiment(
        dataset,
        plan,
        m_values=args.m_values,
        baselines=args.baselines,
        config=config,
    )

    os.makedirs(args.report_dir, exist_ok=True)
    write_fold_csv(report, os.path.join(args.report_dir, "folds.csv"))
    write_summary_csv(report, os.path.join(args.report_dir, "summary.csv"))
    write_fig_csv(report, os.path.join(args.report_dir, "auc_vs_m.csv"))
    atomic_write_text(
        os.path.join(args.report_dir, "summary.json"),
        json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n",
    )

    print(f"dataset: {report.dataset}  ({report.repeats}x{report.folds} stratified CV, seed {report.seed})")
    print(f"{'variant':<16} {'M':>4} {'mean AUC':>9} {'95% CI':>8} {'rules':>8}")
    for row in report.summary_rows():
        rules = row.get("mean_rules", "")
        rules_txt = f"{rules:.1f}" if rules != "" else ""
        print(
            f"{row['variant']:<16} {str(row['M']):>4} {row['mean_auc']:>9.3f} "
            f"{row['ci95']:>8.3f} {rules_txt:>8}"
        )
    for note in report.notes:
        print(f"note: {note}")
    print(f"reports written to {args.report_dir}/")
    return EXIT_OK


def cmd_explain(args) -> int:
    model = load_model(args.model)
    for m, (rule, coef) in enumerate(zip(model.selected.rules, model.selected.coefficients)):
        text = render_rule(rule, model.feature_names, model.feature_categories,
                           model.positive_name, model.negative_name)
        rate = model.train_correctness_rate[m]
        print(f"{text}  [coefficient {coef:+.4f}, train correctness {rate:.3f}]")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingError as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
