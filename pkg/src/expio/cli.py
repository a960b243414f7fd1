"""Command-line interface.

Commands: validate, stats, split, augment, train, predict, evaluate, run,
compare. Shared flags: --schema, --seed, --out, --config. A config file is
JSON mirroring the run configuration; explicit command-line flags win over
config-file values. Exit codes: 0 success, 1 data errors, 2 usage errors,
3 backend errors, 4 comparison-precondition failures.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from pathlib import Path

from . import pipeline
from .augment import default_gazetteer, load_gazetteer
from .corpus import (
    corpus_stats,
    load_corpus,
    save_corpus,
    stratified_split,
    validate_corpus,
)
from .errors import ExpioError, UsageError
from .pipeline import RunConfig
from .schema import get_schema


def _add_common(parser: argparse.ArgumentParser, out_default: str = ".") -> None:
    parser.add_argument("--schema", help="label schema: subtask1 or subtask2")
    parser.add_argument("--seed", type=int, default=None, help="random seed")
    parser.add_argument("--out", default=out_default, help="output directory")
    parser.add_argument("--config", default=None, help="JSON config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="expio",
        description="Entity tagging pipeline for patient-experience and PIO "
        "spans in social-media health posts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a corpus file, write a report")
    p.add_argument("corpus")
    _add_common(p)

    p = sub.add_parser("stats", help="corpus statistics report")
    p.add_argument("corpus")
    _add_common(p)

    p = sub.add_parser("split", help="stratified train/validation split")
    p.add_argument("corpus")
    p.add_argument("--validation-fraction", type=float, default=0.2)
    _add_common(p)

    p = sub.add_parser("augment", help="insert gazetteer marker tokens")
    p.add_argument("corpus")
    p.add_argument("--gazetteer", default=None, help="lexicon file (built-in by default)")
    _add_common(p)

    p = sub.add_parser("train", help="train a tagging model")
    p.add_argument("corpus", nargs="?", default=None)
    p.add_argument("--validation-fraction", type=float, default=None)
    p.add_argument("--gazetteer", default=None)
    p.add_argument("--augment", action="store_const", const=True, default=None)
    p.add_argument("--backend", default=None, help="perceptron or external")
    p.add_argument("--backend-command", default=None, help="adapter command line")
    p.add_argument("--epochs", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("predict", help="tag a corpus with a saved model")
    p.add_argument("corpus")
    p.add_argument("--model", required=True, help="model.rhtm path")
    _add_common(p)

    p = sub.add_parser("evaluate", help="score a predictions.jsonl file")
    p.add_argument("predictions")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    _add_common(p)

    p = sub.add_parser("run", help="full experiment: split, train, evaluate")
    p.add_argument("corpus", nargs="?", default=None)
    p.add_argument("--validation-fraction", type=float, default=None)
    p.add_argument("--gazetteer", default=None)
    p.add_argument("--augment", action="store_const", const=True, default=None)
    p.add_argument("--backend", default=None)
    p.add_argument("--backend-command", default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--bootstrap-resamples", type=int, default=None)
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    _add_common(p, out_default="./run_out")

    p = sub.add_parser("compare", help="paired bootstrap between two run dirs")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.add_argument("--resamples", type=int, default=10000)
    p.add_argument("--workers", type=int, default=1)
    _add_common(p, out_default="./compare_out")

    return parser


def _require_schema(args) -> str:
    if not args.schema:
        raise UsageError("--schema is required for this command")
    return args.schema


def _load_config_file(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise UsageError("config file must contain a JSON object")
    return raw


def _run_config(args, with_bootstrap: bool) -> RunConfig:
    base: dict = {}
    if args.config:
        base = _load_config_file(args.config)
        if "config" in base and isinstance(base["config"], dict):
            base = base["config"]
    merged = dict(base)
    if args.corpus is not None:
        merged["corpus"] = args.corpus
    if args.schema is not None:
        merged["schema"] = args.schema
    if args.seed is not None:
        merged["seed"] = args.seed
    if args.validation_fraction is not None:
        merged["validation_fraction"] = args.validation_fraction
    if args.gazetteer is not None:
        merged["gazetteer"] = args.gazetteer
    if args.augment is not None:
        merged["augment"] = args.augment
    if args.backend is not None:
        merged["backend"] = args.backend
    if args.backend_command is not None:
        merged["backend_command"] = shlex.split(args.backend_command)
    hyper = dict(merged.get("hyper", {}))
    if args.epochs is not None:
        hyper["epochs"] = args.epochs
    merged["hyper"] = hyper
    if with_bootstrap and getattr(args, "bootstrap_resamples", None) is not None:
        merged["bootstrap_resamples"] = args.bootstrap_resamples
    return RunConfig.from_dict(merged)


def _cmd_validate(args) -> int:
    schema = get_schema(_require_schema(args))
    corpus = load_corpus(args.corpus, schema)
    report = validate_corpus(corpus)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "validation.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    for finding in report.errors:
        print(f"error {finding.code} {finding.post_id}: {finding.message}", file=sys.stderr)
    for finding in report.warnings:
        print(f"warning {finding.code} {finding.post_id}: {finding.message}", file=sys.stderr)
    print(
        f"{len(corpus.posts)} posts, {len(report.errors)} errors, "
        f"{len(report.warnings)} warnings"
    )
    return 0 if not report.errors else 1


def _cmd_stats(args) -> int:
    schema = get_schema(_require_schema(args))
    corpus = load_corpus(args.corpus, schema)
    stats = corpus_stats(corpus)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "stats.json").write_text(
        json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(json.dumps(stats.to_dict(), indent=2, sort_keys=True))
    return 0


def _cmd_split(args) -> int:
    schema = get_schema(_require_schema(args))
    corpus = load_corpus(args.corpus, schema)
    seed = args.seed if args.seed is not None else 42
    train_corpus, val_corpus = stratified_split(corpus, args.validation_fraction, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_corpus(train_corpus, out / "train.jsonl")
    save_corpus(val_corpus, out / "validation.jsonl")
    summary = {
        "seed": seed,
        "validation_fraction": args.validation_fraction,
        "train_posts": len(train_corpus.posts),
        "validation_posts": len(val_corpus.posts),
    }
    (out / "split.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"train {summary['train_posts']} / validation {summary['validation_posts']}")
    return 0


def _cmd_augment(args) -> int:
    schema_name = _require_schema(args)
    if args.gazetteer:
        load_gazetteer(args.gazetteer)
    else:
        default_gazetteer()
    count = pipeline.augment_to_files(args.corpus, schema_name, args.gazetteer, args.out)
    print(f"augmented {count} sentences -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    config = _run_config(args, with_bootstrap=False)
    summary = pipeline.train_only(config, args.out)
    curve = summary["dev_f1_per_epoch"]
    final = f"{curve[-1]:.4f}" if curve else "n/a"
    print(f"trained {summary['backend_id']}, final dev micro-F1 {final}")
    return 0


def _cmd_predict(args) -> int:
    records = pipeline.predict_only(args.model, args.corpus, args.out)
    print(f"tagged {len(records)} sentences -> {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    schema_name = _require_schema(args)
    metrics = pipeline.evaluate_predictions(
        args.predictions, schema_name, args.out, figures=not args.no_figures
    )
    micro = metrics["token_level"]["micro"]
    print(
        f"token micro P {micro['precision']:.4f} R {micro['recall']:.4f} "
        f"F1 {micro['f1']:.4f}"
    )
    return 0


def _cmd_run(args) -> int:
    config = _run_config(args, with_bootstrap=True)
    manifest = pipeline.run(config, args.out, figures=not args.no_figures)
    summary = manifest["metrics_summary"]
    print(
        f"run complete: token micro-F1 {summary['token_micro_f1']:.4f}, "
        f"artifacts in {args.out}"
    )
    return 0


def _cmd_compare(args) -> int:
    seed = args.seed if args.seed is not None else 42
    result = pipeline.compare(
        args.run_a, args.run_b, args.resamples, seed, args.out, workers=args.workers
    )
    print(f"delta {result.observed_delta:+.6f}  p {result.p_value:.6f}")
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "stats": _cmd_stats,
    "split": _cmd_split,
    "augment": _cmd_augment,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "run": _cmd_run,
    "compare": _cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ExpioError as exc:
        stage = getattr(exc, "stage", None)
        prefix = f"{args.command} failed at stage {stage}: " if stage else f"{args.command}: "
        print(prefix + str(exc), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
