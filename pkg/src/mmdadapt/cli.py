"""Command-line interface.

Subcommands: compute-mmd, perm-test, gen-data, train, eval, benchmark.
Machine-readable key=value records go to stdout; diagnostics go to stderr.
Exit codes: 0 success, 2 invalid input, 1 internal error.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from dataclasses import replace
from pathlib import Path

from . import __version__
from .benchmark import (
    DEFAULT_METHOD_LAMBDAS,
    DEFAULT_SHIFT,
    DEFAULT_TRAIN_CONFIG,
    METHODS,
    format_summary_line,
    format_summary_table,
    run_benchmark,
)
from .config import build_kernel, load_experiment_config, load_shift_spec, load_suite
from .datasets import generate, load_csv, save_csv
from .exceptions import InputError, TrainingDivergedError
from .metrics import format_report_records, format_report_table
from .mlp import load_checkpoint, save_checkpoint
from .mmd import mmd_biased, mmd_unbiased, permutation_test
from .training import (
    ADAPT_NONE,
    ExperimentConfig,
    evaluate,
    format_metrics_line,
    train,
    write_metrics_log,
)


def _features_from_csv(path, ignore_column: str | None):
    ignored = (ignore_column,) if ignore_column else ()
    return load_csv(path, ignore_columns=ignored)


def _kernel_from_flags(args):
    spec = build_kernel(args.kernel, args.sigma)
    assert spec is not None  # both flags carry defaults
    return spec


def _fmt(value) -> str:
    return repr(float(value))


def cmd_compute_mmd(args) -> int:
    S = _features_from_csv(args.source, args.ignore_column)
    T = _features_from_csv(args.target, args.ignore_column)
    spec = _kernel_from_flags(args)
    estimate = (mmd_biased if args.estimator == "biased" else mmd_unbiased)(spec, S, T)
    bandwidths = ",".join(_fmt(b) for b in estimate.kernel.bandwidths)
    weights = ",".join(_fmt(w) for w in estimate.kernel.weights)
    if args.pretty:
        print(f"MMD^2 ({estimate.estimator}): {estimate.value:.6f}")
        print(f"samples: {estimate.n_source} source, {estimate.n_target} target")
        print(f"kernel: {estimate.kernel.family}, bandwidths [{bandwidths}]")
    else:
        print(
            f"value={_fmt(estimate.value)} estimator={estimate.estimator} "
            f"n_source={estimate.n_source} n_target={estimate.n_target} "
            f"kernel_family={estimate.kernel.family} "
            f"bandwidths={bandwidths} weights={weights}"
        )
    return 0


def cmd_perm_test(args) -> int:
    S = _features_from_csv(args.source, args.ignore_column)
    T = _features_from_csv(args.target, args.ignore_column)
    spec = _kernel_from_flags(args)
    result = permutation_test(spec, S, T, n_permutations=args.permutations, seed=args.seed)
    if args.pretty:
        print(f"observed MMD^2: {result.statistic:.6f}")
        print(f"p-value: {result.p_value:.6f}  ({result.n_permutations} permutations)")
        for q, v in result.null_quantiles:
            print(f"null q{q * 100:g}: {v:.6f}")
    else:
        quantiles = " ".join(
            f"null_q{q * 100:g}={_fmt(v)}" for q, v in result.null_quantiles
        )
        print(
            f"statistic={_fmt(result.statistic)} p_value={_fmt(result.p_value)} "
            f"n_permutations={result.n_permutations} {quantiles}"
        )
    return 0


def cmd_gen_data(args) -> int:
    spec = load_shift_spec(args.spec) if args.spec else DEFAULT_SHIFT
    source, target = generate(spec, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    source_path = out / "source.csv"
    target_path = out / "target.csv"
    labels_path = out / "target_labels.csv"
    save_csv(source_path, source.features, source.labels, source.class_names)
    save_csv(target_path, target.features)
    save_csv(labels_path, target.features, target.labels, target.class_names)
    print(
        f"source={source_path} target={target_path} target_labels={labels_path} "
        f"n_source={source.n} n_target={target.n} d={source.d}"
    )
    return 0


def cmd_train(args) -> int:
    config = load_experiment_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    source = load_csv(args.source, label_column=args.label_column)
    target_features = None
    if args.target:
        target_features = _features_from_csv(args.target, args.label_column)
    elif config.adapt_loss != ADAPT_NONE:
        raise InputError(f"adapt_loss={config.adapt_loss} requires --target")
    eval_target = None
    if args.eval_target:
        eval_target = load_csv(args.eval_target, label_column=args.label_column)
        if eval_target.class_names != source.class_names:
            raise InputError(
                f"eval-target classes {eval_target.class_names} do not match "
                f"source classes {source.class_names}"
            )

    model, history = train(config, source, target_features, eval_target)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.log"
    checkpoint_path = out / "checkpoint.json"
    write_metrics_log(metrics_path, history)
    save_checkpoint(model, checkpoint_path, metadata={
        "class_names": list(source.class_names),
        "adapt_loss": config.adapt_loss,
        "seed": config.seed,
    })
    print(format_metrics_line(history[-1]))
    print(f"checkpoint={checkpoint_path} metrics={metrics_path}")
    return 0


def cmd_eval(args) -> int:
    model, metadata = load_checkpoint(args.checkpoint)
    dataset = load_csv(args.data, label_column=args.label_column)
    trained_names = metadata.get("class_names")
    if trained_names is not None and tuple(trained_names) != dataset.class_names:
        raise InputError(
            f"dataset classes {dataset.class_names} do not match the checkpoint's "
            f"{tuple(trained_names)}"
        )
    result = evaluate(model, dataset)
    if args.pretty:
        print(format_report_table(result.report))
    else:
        print(format_report_records(result.report))
    return 0


def cmd_benchmark(args) -> int:
    method_lambdas = DEFAULT_METHOD_LAMBDAS
    if args.suite:
        shift, base_config, explicit = load_suite(args.suite, base=DEFAULT_TRAIN_CONFIG)
        if "lambda" in explicit:
            method_lambdas = None  # the suite's weight applies to every method
    else:
        shift, base_config = DEFAULT_SHIFT, DEFAULT_TRAIN_CONFIG
    methods = METHODS
    if args.methods:
        methods = tuple(m.strip() for m in args.methods.split(","))
        unknown = [m for m in methods if m not in METHODS]
        if unknown:
            raise InputError(f"unknown methods: {', '.join(unknown)} (choose from {METHODS})")
    summaries = run_benchmark(
        shift, base_config, n_seeds=args.seeds, methods=methods,
        method_lambdas=method_lambdas,
    )

    out = Path(args.out)
    runs_dir = out / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    lines = [format_summary_line(s) for s in summaries]
    (out / "comparison.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    for summary in summaries:
        for run in summary.runs:
            write_metrics_log(
                runs_dir / f"{run.method}-seed{run.seed}.metrics.log", run.history
            )
    if args.pretty:
        print(format_summary_table(summaries))
    else:
        for line in lines:
            print(line)
    return 0


def _add_kernel_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--kernel", choices=("gaussian", "mixture"), default="gaussian",
        help="kernel family: a single Gaussian or the five-bandwidth mixture",
    )
    parser.add_argument(
        "--sigma", default="median",
        help="bandwidth: a positive number, or 'median' for the median heuristic",
    )
    parser.add_argument(
        "--ignore-column", default=None, metavar="NAME",
        help="drop this column (e.g. a label column) from input CSVs when present",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmdadapt",
        description="Kernel two-sample statistics and MMD-based domain-adaptive training.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute-mmd", help="MMD^2 between two feature CSVs")
    p.add_argument("--source", required=True, help="source feature CSV")
    p.add_argument("--target", required=True, help="target feature CSV")
    _add_kernel_flags(p)
    p.add_argument("--estimator", choices=("biased", "unbiased"), default="biased")
    p.add_argument("--pretty", action="store_true", help="human-readable output")
    p.set_defaults(func=cmd_compute_mmd)

    p = sub.add_parser("perm-test", help="permutation two-sample test on MMD^2")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    _add_kernel_flags(p)
    p.add_argument("--permutations", type=int, default=200, help="number of splits (>= 99)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pretty", action="store_true")
    p.set_defaults(func=cmd_perm_test)

    p = sub.add_parser("gen-data", help="generate a synthetic source/target pair")
    p.add_argument("--spec", default=None, help="shift spec file (key = value); default task if omitted")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the classifier with the joint objective")
    p.add_argument("--config", default=None, help="training config file (key = value)")
    p.add_argument("--source", required=True, help="labeled source CSV")
    p.add_argument("--target", default=None, help="unlabeled target feature CSV")
    p.add_argument("--eval-target", default=None, help="labeled target CSV for per-epoch evaluation")
    p.add_argument("--out", required=True, help="output directory for metrics log + checkpoint")
    p.add_argument("--label-column", default="label")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="classification report of a checkpoint on labeled data")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="labeled CSV")
    p.add_argument("--label-column", default="label")
    p.add_argument("--pretty", action="store_true", help="aligned report table")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("benchmark", help="compare adaptation losses on one synthetic shift")
    p.add_argument("--suite", default=None, help="suite file (shift + training keys); default if omitted")
    p.add_argument("--seeds", type=int, default=5, help="number of seeds per method")
    p.add_argument("--methods", default=None, metavar="LIST",
                   help=f"comma list of methods to run (default: all of {', '.join(METHODS)})")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--pretty", action="store_true")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingDivergedError as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return 1
    except Exception:
        print("internal error:", file=sys.stderr)
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
