"""Command-line entry point.

Commands: preprocess, train, evaluate, loso, report, selfcheck. Every
command is driven by a YAML config file (all optional, sane defaults) with
flag overrides; flags win. Exit codes: 0 success, 1 validation error,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from .config import RunConfig, load_run_config
from .datasets import convert_dataset, load_dataset
from .errors import AnnotationParseError, ConfigError, TrainingDivergedError
from .estimator import GazeEstimator
from .references import (
    CSV_COLUMNS,
    measured_rows,
    reference_rows,
    render_rows,
    rows_from_report_dict,
    subject_chart_rows,
)
from .selfcheck import format_results, run_selfcheck
from .training import evaluate, loso_cv

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

CACHE_ENV_VAR = "GAZEKIT_CACHE_DIR"


def _add_common_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, default=None,
                        help="YAML run configuration")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--beta", type=float, default=None)
    parser.add_argument("--dataset",
                        choices=("mpiigaze", "gaze360", "synthetic"),
                        default=None)
    parser.add_argument("--root", type=Path, default=None,
                        help="dataset root directory")
    parser.add_argument("--split", default=None,
                        choices=("train", "val", "test", "all"))
    parser.add_argument("--scope", default=None,
                        choices=("all", "front180", "frontfacing"))
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory")


def _config_from_args(args) -> RunConfig:
    overrides = {
        "seed": args.seed,
        "beta": args.beta,
        "dataset": args.dataset,
        "root": args.root,
        "split": args.split,
        "scope": args.scope,
        "out": args.out,
    }
    return load_run_config(args.config, overrides)


def _estimator_from_config(config: RunConfig,
                           checkpoint_dir: Path | None) -> GazeEstimator:
    return GazeEstimator(
        backbone=config.backbone,
        bin_min_deg=config.scheme.min_deg,
        bin_max_deg=config.scheme.max_deg,
        n_bins=config.scheme.n_bins,
        beta=config.train.beta,
        learning_rate=config.train.learning_rate,
        epochs=config.train.epochs,
        batch_size=config.train.batch_size,
        seed=config.train.seed,
        pretrained=config.pretrained,
        checkpoint_dir=checkpoint_dir,
    )


def _train_val_split(config: RunConfig):
    """Training/validation samples for cmd_train.

    With a split manifest the train and val splits are used directly;
    otherwise the lexicographically last subject is held out for
    validation (when more than one subject exists).
    """
    if config.dataset_kind != "synthetic" and config.split != "all":
        train_samples = load_dataset(config.dataset_spec("train"))
        try:
            val_samples = load_dataset(config.dataset_spec("val"))
        except ValueError:
            val_samples = None
        return train_samples, val_samples
    samples = load_dataset(config.dataset_spec("all"))
    subjects = sorted({s.subject_id for s in samples})
    if len(subjects) < 2:
        return samples, None
    held_out = subjects[-1]
    return ([s for s in samples if s.subject_id != held_out],
            [s for s in samples if s.subject_id == held_out])


def _write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n")


def _write_csv_rows(path: Path, rows: list[dict], columns):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)


def cmd_preprocess(args) -> int:
    summary = convert_dataset(args.raw, args.out,
                              assume_normalized=args.assume_normalized)
    print(f"subjects: {summary.subjects}")
    print(f"samples written: {summary.samples_written}")
    print(f"failed lines: {len(summary.failures)}")
    for path, line_number, reason in summary.failures:
        print(f"  {path}:{line_number}: {reason}", file=sys.stderr)
    return EXIT_OK if summary.ok else EXIT_VALIDATION


def cmd_train(args) -> int:
    config = _config_from_args(args)
    out_dir = config.output_dir
    checkpoint_dir = config.train.checkpoint_dir or out_dir / "checkpoints"
    train_samples, val_samples = _train_val_split(config)

    estimator = _estimator_from_config(config, checkpoint_dir)
    estimator.fit_samples(train_samples, val_samples=val_samples)
    history = estimator.history_

    snapshot = config.to_snapshot()
    history_rows = [
        {"epoch": e.epoch, "train_loss": e.train_loss,
         "train_cross_entropy": e.train_cross_entropy,
         "train_mse": e.train_mse, "val_error_deg": e.val_error_deg}
        for e in history.epochs
    ]
    best = history.best_val
    metrics = {
        "config": snapshot,
        "seed": config.train.seed,
        "n_train_samples": len(train_samples),
        "n_val_samples": len(val_samples) if val_samples else 0,
        "history": history_rows,
        "final_epoch": {"epoch": history.final.epoch,
                        "train_loss": history.final.train_loss,
                        "val_error_deg": history.final.val_error_deg},
        "best_val_epoch": (None if best is None else
                           {"epoch": best.epoch,
                            "val_error_deg": best.val_error_deg}),
    }
    _write_json(out_dir / "metrics.json", metrics)
    print(f"trained {history.final.epoch} epochs; "
          f"final train loss {history.final.train_loss:.4f}")
    if history.final.val_error_deg is not None:
        print(f"final val error: {history.final.val_error_deg:.2f} deg "
              f"(best epoch {best.epoch}: {best.val_error_deg:.2f} deg)")
    print(f"metrics: {out_dir / 'metrics.json'}")
    print(f"checkpoints: {checkpoint_dir}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = _config_from_args(args)
    estimator = GazeEstimator.from_checkpoint(args.checkpoint)
    samples = load_dataset(config.dataset_spec())
    report = evaluate(estimator, samples, scope=config.scope,
                      provenance=config.to_snapshot())
    out_dir = config.output_dir
    _write_json(out_dir / "eval.json", report.to_dict())
    rows = measured_rows(report, dataset=config.dataset_kind,
                         beta=config.train.beta)
    _write_csv_rows(out_dir / "eval.csv", rows, CSV_COLUMNS)
    print(f"scope={report.scope} n={report.per_sample_errors.size} "
          f"mean angular error: {report.mean_error:.2f} deg")
    return EXIT_OK


def cmd_loso(args) -> int:
    config = _config_from_args(args)
    samples = load_dataset(config.dataset_spec())
    estimator = _estimator_from_config(config, None)
    result = loso_cv(estimator, samples, scope=config.scope)

    out_dir = config.output_dir
    payload = result.to_dict()
    payload["config"] = config.to_snapshot()
    _write_json(out_dir / "loso.json", payload)

    rows = []
    for subject, report in result.per_subject.items():
        rows.append({
            "dataset": config.dataset_kind, "method": "measured",
            "beta": f"{config.train.beta:g}", "scope": config.scope,
            "subject": subject,
            "mean_error_deg": f"{report.mean_error:.2f}",
            "source": "measured",
        })
    rows.append({
        "dataset": config.dataset_kind, "method": "measured",
        "beta": f"{config.train.beta:g}", "scope": config.scope,
        "subject": "avg", "mean_error_deg": f"{result.grand_mean:.2f}",
        "source": "measured",
    })
    _write_csv_rows(out_dir / "loso.csv", rows, CSV_COLUMNS)
    for subject, report in result.per_subject.items():
        print(f"{subject}: {report.mean_error:.2f} deg")
    print(f"grand mean: {result.grand_mean:.2f} deg")
    return EXIT_OK


def cmd_report(args) -> int:
    rows = []
    measured_per_subject = None
    if args.eval_json is not None:
        data = json.loads(Path(args.eval_json).read_text())
        provenance = data.get("provenance") or {}
        dataset = (provenance.get("dataset") or {}).get("kind", "synthetic")
        beta = (provenance.get("train") or {}).get("beta")
        rows.extend(rows_from_report_dict(data, dataset=dataset, beta=beta))
        per_subject = data.get("per_subject")
        if per_subject:
            measured_per_subject = {k: float(v) for k, v in per_subject.items()}
    rows.extend(reference_rows())

    out_dir = args.out or Path("runs/report")
    text = render_rows(rows, fmt="text")
    csv_text = render_rows(rows, fmt="csv")
    json_text = render_rows(rows, fmt="json")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.txt").write_text(text)
    (out_dir / "report.csv").write_text(csv_text)
    (out_dir / "report.json").write_text(json_text + "\n")

    chart_rows = subject_chart_rows(measured_per_subject)
    chart_columns = list(chart_rows[0].keys())
    _write_csv_rows(out_dir / "subject_chart.csv", chart_rows, chart_columns)
    if args.format == "csv":
        print(csv_text, end="")
    elif args.format == "json":
        print(json_text)
    else:
        print(text, end="")
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    results = run_selfcheck(seed=0 if args.seed is None else args.seed)
    print(format_results(results))
    failed = [r for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} check(s) FAILED", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gazekit",
        description="Train and evaluate bin-classification gaze estimators")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess",
                       help="convert a raw dataset into the normalized layout")
    p.add_argument("--raw", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--dataset",
                   choices=("mpiigaze", "gaze360", "synthetic"),
                   default="mpiigaze")
    p.add_argument("--assume-normalized", action="store_true",
                   help="labels are final; skip the virtual-camera warp")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train a model per the run config")
    _add_common_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a dataset")
    _add_common_flags(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("loso",
                       help="leave-one-subject-out cross-validation")
    _add_common_flags(p)
    p.set_defaults(func=cmd_loso)

    p = sub.add_parser("report",
                       help="render measured results next to the stored "
                            "benchmark numbers")
    p.add_argument("--format", choices=("text", "csv", "json"),
                   default="text")
    p.add_argument("--eval-json", type=Path, default=None,
                   help="eval.json from a previous run to merge in")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("selfcheck", help="run the fast invariant suite")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv=None) -> int:
    cache_dir = os.environ.get(CACHE_ENV_VAR)
    if cache_dir:
        os.environ.setdefault("TORCH_HOME", cache_dir)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, AnnotationParseError, FileNotFoundError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # pragma: no cover - last-resort diagnostics
        print(f"unexpected failure: {exc!r}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
