"""Command-line entry point.

Subcommands:
    run <config>            execute an experiment, write its metrics CSV
    report <metrics...>     rounds-to-target table across runs for given targets
    gradcheck               finite-difference verification of the gradients
    split-report <config>   per-device partition statistics

Exit code is 0 on success, 1 when gradcheck finds a violation and 2 on any
configuration, input or I/O error (with a diagnostic on stderr).
"""

from __future__ import annotations

import argparse
import sys

from . import metrics as metrics_mod
from .config import parse_config
from .data import gen_synthetic, load_csv, partition_report, subset
from .gradcheck import run_gradient_check
from .simulation import build_partition, run_experiment, _stream

_TAG_DATA = 5  # stream tag for dataset synthesis; distinct from the round-loop tags


def _load_datasets(run_cfg):
    """Build (train, test) from the [data] section, deterministically."""
    data, exp = run_cfg.data, run_cfg.experiment
    if data.source == "synthetic":
        rng = _stream(exp.seed, _TAG_DATA)
        full = gen_synthetic(data.n + data.n_test, data.dim, data.n_classes, rng)
        train = subset(full, range(data.n))
        test = subset(full, range(data.n, data.n + data.n_test))
    else:
        train = load_csv(data.path)
        test = load_csv(data.test_path)
        if train.dim != test.dim:
            raise ValueError(
                f"train has {train.dim} features but test has {test.dim}")
        n_classes = max(train.n_classes, test.n_classes)
        train.n_classes = test.n_classes = n_classes
    if train.n_classes != exp.arch.n_classes:
        raise ValueError(
            f"dataset has {train.n_classes} classes but the model heads end in "
            f"{exp.arch.n_classes}")
    if train.dim != exp.arch.trunk_widths[0]:
        raise ValueError(
            f"dataset has {train.dim} features but the trunk starts at "
            f"{exp.arch.trunk_widths[0]}")
    return train, test


def _read_run_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ValueError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def _cmd_run(args) -> int:
    run_cfg = _read_run_config(args.config)
    train, test = _load_datasets(run_cfg)
    records = run_experiment(run_cfg.experiment, train, test,
                             checkpoint_dir=run_cfg.output.checkpoint_dir)
    metrics_mod.write_metrics(records, run_cfg.output.metrics_path)
    final = records[-1]
    print(f"wrote {len(records)} records to {run_cfg.output.metrics_path}")
    print(f"final round {final.round}: simple_acc={final.simple_acc:.4f} "
          f"complex_acc={final.complex_acc:.4f}")
    return 0


def _cmd_report(args) -> int:
    targets = []
    for part in args.targets.split(","):
        try:
            targets.append(float(part))
        except ValueError:
            raise ValueError(f"bad target {part!r}") from None
    runs = {}
    for path in args.metrics:
        records = metrics_mod.read_metrics(path)
        if not records:
            raise ValueError(f"{path}: no records")
        method = records[0].method
        if method in runs:
            raise ValueError(f"duplicate method {method!r} across metrics files")
        runs[method] = records
    model_kinds = ("simple", "complex") if args.model == "both" else (args.model,)
    rows = metrics_mod.build_target_report(runs, targets, model_kinds)
    print(metrics_mod.render_target_report(rows))
    if args.csv:
        metrics_mod.write_target_report(rows, args.csv)
        print(f"wrote report to {args.csv}")
    return 0


def _cmd_gradcheck(args) -> int:
    report = run_gradient_check(cases=args.cases, seed=args.seed)
    print(f"cases run:            {report.cases}")
    print(f"max |analytic-numeric|: {report.worst_abs_diff:.3e}")
    print(f"worst tolerance margin: {report.worst_margin:.3e}")
    print(f"gradient check: {'PASS' if report.passed else 'FAIL'}")
    return 0 if report.passed else 1


def _cmd_split_report(args) -> int:
    run_cfg = _read_run_config(args.config)
    train, _ = _load_datasets(run_cfg)
    partition = build_partition(run_cfg.experiment, train)
    print(f"{train.n} points, {train.n_classes} classes, "
          f"{run_cfg.experiment.n_devices} devices "
          f"({run_cfg.experiment.n_simple} simple), split={run_cfg.experiment.split}")
    print(partition_report(train, partition))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedhen",
        description="Deterministic federated-learning simulator for heterogeneous devices")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute an experiment from a config file")
    run_p.add_argument("config", help="path to the experiment config")
    run_p.set_defaults(handler=_cmd_run)

    report_p = sub.add_parser("report", help="rounds-to-target report over metrics files")
    report_p.add_argument("metrics", nargs="+", help="metrics CSVs, one per method")
    report_p.add_argument("--targets", required=True,
                          help="comma-separated target accuracies")
    report_p.add_argument("--model", choices=("simple", "complex", "both"),
                          default="both")
    report_p.add_argument("--csv", help="also write the report as CSV here")
    report_p.set_defaults(handler=_cmd_report)

    grad_p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    grad_p.add_argument("--cases", type=int, default=100)
    grad_p.add_argument("--seed", type=int, default=0)
    grad_p.set_defaults(handler=_cmd_gradcheck)

    split_p = sub.add_parser("split-report", help="partition statistics for a config")
    split_p.add_argument("config", help="path to the experiment config")
    split_p.set_defaults(handler=_cmd_split_report)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
