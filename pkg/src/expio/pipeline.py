"""End-to-end experiment pipeline behind the run/compare commands.

A run executes validate -> split -> (optional) augment -> train -> predict
-> project back -> evaluate and leaves a self-describing directory behind:
manifest.json echoes the fully resolved configuration, so feeding the
manifest back through --config reproduces the metrics byte for byte.
Timestamps go to run.log only, keeping every other artifact deterministic.
"""

from __future__ import annotations

import datetime
import json
import shlex
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .augment import (
    AugmentedSentence,
    Gazetteer,
    augment,
    default_gazetteer,
    gazetteer_annotate,
    load_gazetteer,
    project_back,
)
from .backends import (
    HyperParams,
    ModelHandle,
    TrainingSentence,
    default_epochs,
    load_model,
    predict,
    save_model,
    train,
)
from .bootstrap import BootstrapResult, BootstrapUnit, paired_bootstrap
from .corpus import (
    Corpus,
    Post,
    corpus_fingerprint,
    load_corpus,
    save_corpus,
    stratified_split,
    validate_corpus,
)
from .errors import CompareMismatchError, DataError, ExpioError, UsageError
from .evaluation import (
    sentence_gold_classes,
    sentence_pred_classes,
    sentence_prf,
    token_confusion,
    token_prf,
)
from .schema import LabelSchema, get_schema
from .tokenization import (
    SentenceSpan,
    decode_bio,
    encode_bio,
    segment_sentences,
    sort_spans_for_encoding,
    write_conll,
)

_CONFIG_KEYS = {
    "schema",
    "corpus",
    "validation_fraction",
    "gazetteer",
    "augment",
    "backend",
    "backend_command",
    "hyper",
    "bootstrap_resamples",
    "seed",
}


@dataclass
class RunConfig:
    schema: str
    corpus: str
    validation_fraction: float = 0.2
    gazetteer: Optional[str] = None
    augment: bool = False
    backend: str = "perceptron"
    backend_command: Optional[list[str]] = None
    hyper: dict = field(default_factory=dict)
    bootstrap_resamples: int = 10000
    seed: int = 42

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if "config" in raw and isinstance(raw["config"], dict):
            raw = raw["config"]
        unknown = set(raw) - _CONFIG_KEYS
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        if "schema" not in raw or "corpus" not in raw:
            raise UsageError("config needs at least 'schema' and 'corpus'")
        command = raw.get("backend_command")
        if isinstance(command, str):
            command = shlex.split(command)
        return cls(
            schema=raw["schema"],
            corpus=raw["corpus"],
            validation_fraction=float(raw.get("validation_fraction", 0.2)),
            gazetteer=raw.get("gazetteer"),
            augment=bool(raw.get("augment", False)),
            backend=raw.get("backend", "perceptron"),
            backend_command=command,
            hyper=dict(raw.get("hyper", {})),
            bootstrap_resamples=int(raw.get("bootstrap_resamples", 10000)),
            seed=int(raw.get("seed", 42)),
        )

    def resolved_hyper(self, schema: LabelSchema) -> HyperParams:
        values = {"epochs": default_epochs(schema), "seed": self.seed}
        values.update(self.hyper)
        return HyperParams(**values)

    def to_dict(self, schema: LabelSchema) -> dict:
        return {
            "schema": self.schema,
            "corpus": str(Path(self.corpus).resolve()),
            "validation_fraction": self.validation_fraction,
            "gazetteer": str(Path(self.gazetteer).resolve()) if self.gazetteer else None,
            "augment": self.augment,
            "backend": self.backend,
            "backend_command": self.backend_command,
            "hyper": self.resolved_hyper(schema).to_dict(),
            "bootstrap_resamples": self.bootstrap_resamples,
            "seed": self.seed,
        }


@dataclass
class SentenceRecord:
    post: Post
    index: int
    sentence: SentenceSpan
    gold_labels: list[str]
    aug: Optional[AugmentedSentence] = None

    @property
    def original_tokens(self) -> list[str]:
        return [t.text for t in self.sentence.tokens]

    @property
    def input_tokens(self) -> list[str]:
        return list(self.aug.tokens) if self.aug is not None else self.original_tokens

    @property
    def input_labels(self) -> list[str]:
        return list(self.aug.labels) if self.aug is not None else list(self.gold_labels)


@contextmanager
def _stage(name: str):
    try:
        yield
    except ExpioError as exc:
        if not hasattr(exc, "stage"):
            exc.stage = name
        raise


def sentence_records(corpus: Corpus) -> list[SentenceRecord]:
    records = []
    for post in corpus.posts:
        spans = sort_spans_for_encoding(post.spans, corpus.schema)
        for k, sent in enumerate(segment_sentences(post.text)):
            records.append(SentenceRecord(post, k, sent, encode_bio(sent, spans)))
    return records


def augment_records(records: Sequence[SentenceRecord], gazetteer: Gazetteer) -> None:
    for rec in records:
        kspans = gazetteer_annotate(rec.sentence.tokens, gazetteer)
        rec.aug = augment(rec.original_tokens, rec.gold_labels, kspans)


def resolve_gazetteer(config: RunConfig) -> Optional[Gazetteer]:
    if not config.augment:
        return None
    if config.gazetteer:
        return load_gazetteer(config.gazetteer)
    return default_gazetteer()


def _gazetteer_terms(gazetteer: Gazetteer) -> dict:
    return {
        "disease": sorted(gazetteer.disease_terms),
        "chemical": sorted(gazetteer.chemical_terms),
    }


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _append_log(path: Path, message: str) -> None:
    stamp = datetime.datetime.now().isoformat(timespec="seconds")
    with open(path, "a", encoding="utf-8") as fp:
        fp.write(f"{stamp} {message}\n")


def _prediction_record(rec: SentenceRecord, predicted: list[str]) -> dict:
    return {
        "post_id": rec.post.post_id,
        "sentence": rec.index,
        "start": rec.sentence.start_char,
        "end": rec.sentence.end_char,
        "tokens": rec.original_tokens,
        "gold": list(rec.gold_labels),
        "pred": list(predicted),
    }


def _write_predictions(
    out_dir: Path, records: Sequence[SentenceRecord], predicted: Sequence[list[str]]
) -> None:
    with open(out_dir / "predictions.jsonl", "w", encoding="utf-8") as fp:
        for rec, labels in zip(records, predicted):
            fp.write(json.dumps(_prediction_record(rec, labels), sort_keys=True) + "\n")
    with open(out_dir / "predictions.conll", "w", encoding="utf-8") as fp:
        write_conll(
            ((rec.original_tokens, labels) for rec, labels in zip(records, predicted)), fp
        )
    by_post: dict[str, list] = {}
    for rec, labels in zip(records, predicted):
        by_post.setdefault(rec.post.post_id, []).extend(decode_bio(rec.sentence, labels))
    with open(out_dir / "predicted_spans.jsonl", "w", encoding="utf-8") as fp:
        for post_id, spans in by_post.items():
            spans = sorted(spans, key=lambda s: (s.start_char, s.end_char))
            fp.write(
                json.dumps(
                    {
                        "post_id": post_id,
                        "spans": [
                            {"start": s.start_char, "end": s.end_char, "label": s.label}
                            for s in spans
                        ],
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def load_predictions(path: Union[str, Path]) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"predictions file not found: {path}")
    records = []
    with open(path, encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            for key in ("post_id", "sentence", "tokens", "gold", "pred"):
                if key not in rec:
                    raise DataError(f"{path}:{lineno}: missing key {key!r}")
            records.append(rec)
    return records


def _evaluate(
    schema: LabelSchema,
    records: Sequence[SentenceRecord],
    predicted: Sequence[list[str]],
) -> tuple:
    gold = [list(r.gold_labels) for r in records]
    matrix = token_confusion(gold, predicted, schema)
    token_report = token_prf(matrix)
    out = {
        "token_level": token_report.to_dict(),
        "sentence_level": None,
    }
    if schema.name == "subtask1":
        gold_classes = [
            sentence_gold_classes([r.sentence], r.post.spans, schema)[0] for r in records
        ]
        pred_classes = sentence_pred_classes(predicted, schema)
        out["sentence_level"] = sentence_prf(gold_classes, pred_classes, schema).to_dict()
    return out, matrix, token_report


def _render_figures(out_dir: Path, matrix, token_report, dev_curve: Sequence[float]) -> None:
    from .figures import confusion_heatmap, epoch_curve, prf_bars, support_bars

    fig_dir = out_dir / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    confusion_heatmap(matrix, fig_dir / "confusion.png")
    prf_bars(token_report, fig_dir / "prf.png")
    support_bars(token_report.support, fig_dir / "support.png")
    if dev_curve:
        epoch_curve(dev_curve, fig_dir / "epochs.png")


def run(config: RunConfig, out_dir: Union[str, Path], figures: bool = True) -> dict:
    """Execute one experiment; returns the manifest dict."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log = out_dir / "run.log"

    with _stage("load"):
        schema = get_schema(config.schema)
        hyper = config.resolved_hyper(schema)
        corpus = load_corpus(config.corpus, schema)
    _append_log(log, f"loaded {len(corpus.posts)} posts from {config.corpus}")

    with _stage("validate"):
        report = validate_corpus(corpus)
        if report.errors:
            first = report.errors[0]
            raise DataError(
                f"corpus failed validation with {len(report.errors)} errors, "
                f"first: {first.post_id}: {first.message}"
            )

    with _stage("split"):
        train_corpus, val_corpus = stratified_split(
            corpus, config.validation_fraction, config.seed
        )
        train_records = sentence_records(train_corpus)
        val_records = sentence_records(val_corpus)
    _append_log(
        log,
        f"split: {len(train_corpus.posts)} train / {len(val_corpus.posts)} validation posts",
    )

    gazetteer = None
    with _stage("augment"):
        if config.augment:
            gazetteer = resolve_gazetteer(config)
            augment_records(train_records, gazetteer)
            augment_records(val_records, gazetteer)
            _append_log(log, "augmented train and validation sentences")

    with _stage("train"):
        training_meta = {
            "schema": schema.name,
            "augmented": config.augment,
            "gazetteer_terms": _gazetteer_terms(gazetteer) if gazetteer else None,
            "corpus_fingerprint": corpus_fingerprint(corpus),
            "train_fingerprint": corpus_fingerprint(train_corpus),
            "validation_fingerprint": corpus_fingerprint(val_corpus),
        }
        handle = train(
            config.backend,
            schema,
            [TrainingSentence(tuple(r.input_tokens), tuple(r.input_labels)) for r in train_records],
            [TrainingSentence(tuple(r.input_tokens), tuple(r.input_labels)) for r in val_records],
            hyper,
            command=config.backend_command,
            training_meta=training_meta,
        )
    _append_log(log, f"trained backend {handle.backend_id}")

    try:
        with _stage("predict"):
            raw_predictions = predict(handle, [r.input_tokens for r in val_records])

        with _stage("project"):
            projected = []
            for rec, labels in zip(val_records, raw_predictions):
                if rec.aug is not None:
                    projected.append(project_back(rec.aug, labels))
                else:
                    projected.append(list(labels))

        with _stage("evaluate"):
            metrics, matrix, token_report = _evaluate(schema, val_records, projected)

        with _stage("write"):
            save_model(handle, out_dir / "model.rhtm")
            save_corpus(train_corpus, out_dir / "train.jsonl")
            save_corpus(val_corpus, out_dir / "validation.jsonl")
            _write_predictions(out_dir, val_records, projected)
            _write_json(out_dir / "metrics.json", metrics)
            with open(out_dir / "confusion.csv", "w", encoding="utf-8", newline="") as fp:
                matrix.write_csv(fp)
            dev_curve = handle.training_meta.get("dev_f1_per_epoch", [])
            artifacts = [
                "confusion.csv",
                "metrics.json",
                "model.rhtm",
                "predicted_spans.jsonl",
                "predictions.conll",
                "predictions.jsonl",
                "train.jsonl",
                "validation.jsonl",
            ]
            if figures:
                _render_figures(out_dir, matrix, token_report, dev_curve)
                artifacts.insert(1, "figures")
            manifest = {
                "config": config.to_dict(schema),
                "backend_id": handle.backend_id,
                "corpus_fingerprint": training_meta["corpus_fingerprint"],
                "train_fingerprint": training_meta["train_fingerprint"],
                "validation_fingerprint": training_meta["validation_fingerprint"],
                "augmented": config.augment,
                "dev_f1_per_epoch": dev_curve,
                "metrics_summary": {
                    "token_micro_f1": metrics["token_level"]["micro"]["f1"],
                    "token_macro_f1": metrics["token_level"]["macro"]["f1"],
                },
                "artifacts": artifacts,
            }
            _write_json(out_dir / "manifest.json", manifest)
    finally:
        if handle.client is not None:
            handle.client.close()
    _append_log(log, f"run complete, micro-F1 {manifest['metrics_summary']['token_micro_f1']:.4f}")
    return manifest


def train_only(config: RunConfig, out_dir: Union[str, Path]) -> dict:
    """The run pipeline up to and including training; writes model.rhtm."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with _stage("load"):
        schema = get_schema(config.schema)
        hyper = config.resolved_hyper(schema)
        corpus = load_corpus(config.corpus, schema)
    with _stage("validate"):
        report = validate_corpus(corpus)
        if report.errors:
            raise DataError(f"corpus failed validation with {len(report.errors)} errors")
    with _stage("split"):
        train_corpus, val_corpus = stratified_split(
            corpus, config.validation_fraction, config.seed
        )
        train_records = sentence_records(train_corpus)
        val_records = sentence_records(val_corpus)
    gazetteer = None
    with _stage("augment"):
        if config.augment:
            gazetteer = resolve_gazetteer(config)
            augment_records(train_records, gazetteer)
            augment_records(val_records, gazetteer)
    with _stage("train"):
        training_meta = {
            "schema": schema.name,
            "augmented": config.augment,
            "gazetteer_terms": _gazetteer_terms(gazetteer) if gazetteer else None,
            "corpus_fingerprint": corpus_fingerprint(corpus),
            "train_fingerprint": corpus_fingerprint(train_corpus),
            "validation_fingerprint": corpus_fingerprint(val_corpus),
        }
        handle = train(
            config.backend,
            schema,
            [TrainingSentence(tuple(r.input_tokens), tuple(r.input_labels)) for r in train_records],
            [TrainingSentence(tuple(r.input_tokens), tuple(r.input_labels)) for r in val_records],
            hyper,
            command=config.backend_command,
            training_meta=training_meta,
        )
    try:
        with _stage("write"):
            save_model(handle, out_dir / "model.rhtm")
            summary = {
                "backend_id": handle.backend_id,
                "config": config.to_dict(schema),
                "dev_f1_per_epoch": handle.training_meta.get("dev_f1_per_epoch", []),
            }
            _write_json(out_dir / "training.json", summary)
    finally:
        if handle.client is not None:
            handle.client.close()
    return summary


def predict_only(
    model_path: Union[str, Path], corpus_path: Union[str, Path], out_dir: Union[str, Path]
) -> list[dict]:
    """Tag a corpus with a saved model; augmentation follows the model's meta."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with _stage("load"):
        model_path = Path(model_path)
        if not model_path.exists():
            raise UsageError(f"model file not found: {model_path}")
        handle = load_model(model_path)
        corpus = load_corpus(corpus_path, handle.schema)
        records = sentence_records(corpus)
    with _stage("augment"):
        if handle.training_meta.get("augmented"):
            terms = handle.training_meta.get("gazetteer_terms") or {}
            gazetteer = Gazetteer(
                frozenset(terms.get("disease", [])), frozenset(terms.get("chemical", []))
            )
            augment_records(records, gazetteer)
    with _stage("predict"):
        raw = predict(handle, [r.input_tokens for r in records])
    with _stage("project"):
        projected = [
            project_back(rec.aug, labels) if rec.aug is not None else list(labels)
            for rec, labels in zip(records, raw)
        ]
    with _stage("write"):
        _write_predictions(out_dir, records, projected)
    return [_prediction_record(rec, labels) for rec, labels in zip(records, projected)]


def evaluate_predictions(
    predictions_path: Union[str, Path],
    schema_name: str,
    out_dir: Union[str, Path],
    figures: bool = True,
) -> dict:
    """Metrics, confusion CSV, and figures from a predictions.jsonl file.

    Sentence-level gold classes are derived from the gold label sequences
    here (majority type, schema-order ties); the run pipeline derives them
    from the original spans, which agrees on everything the encoder emits.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    schema = get_schema(schema_name)
    records = load_predictions(predictions_path)
    if not records:
        raise DataError(f"no prediction records in {predictions_path}")
    gold = [list(r["gold"]) for r in records]
    pred = [list(r["pred"]) for r in records]
    with _stage("evaluate"):
        matrix = token_confusion(gold, pred, schema)
        token_report = token_prf(matrix)
        metrics = {"token_level": token_report.to_dict(), "sentence_level": None}
        if schema.name == "subtask1":
            gold_classes = sentence_pred_classes(gold, schema)
            pred_classes = sentence_pred_classes(pred, schema)
            metrics["sentence_level"] = sentence_prf(gold_classes, pred_classes, schema).to_dict()
    with _stage("write"):
        _write_json(out_dir / "metrics.json", metrics)
        with open(out_dir / "confusion.csv", "w", encoding="utf-8", newline="") as fp:
            matrix.write_csv(fp)
        if figures:
            _render_figures(out_dir, matrix, token_report, [])
    return metrics


def augment_to_files(
    corpus_path: Union[str, Path],
    schema_name: str,
    gazetteer_path: Optional[Union[str, Path]],
    out_dir: Union[str, Path],
) -> int:
    """Write gazetteer-augmented sentences as JSONL + CoNLL; returns sentence count."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    schema = get_schema(schema_name)
    corpus = load_corpus(corpus_path, schema)
    gazetteer = load_gazetteer(gazetteer_path) if gazetteer_path else default_gazetteer()
    records = sentence_records(corpus)
    augment_records(records, gazetteer)
    with open(out_dir / "augmented.jsonl", "w", encoding="utf-8") as fp:
        for rec in records:
            fp.write(
                json.dumps(
                    {
                        "post_id": rec.post.post_id,
                        "sentence": rec.index,
                        "tokens": list(rec.aug.tokens),
                        "labels": list(rec.aug.labels),
                        "origin": list(rec.aug.origin),
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    with open(out_dir / "augmented.conll", "w", encoding="utf-8") as fp:
        write_conll(((list(r.aug.tokens), list(r.aug.labels)) for r in records), fp)
    return len(records)


def compare(
    run_dir_a: Union[str, Path],
    run_dir_b: Union[str, Path],
    resamples: int,
    seed: int,
    out_dir: Union[str, Path],
    workers: int = 1,
) -> BootstrapResult:
    """Paired bootstrap between two finished runs on the same validation set."""
    run_dir_a, run_dir_b = Path(run_dir_a), Path(run_dir_b)
    manifests = []
    for d in (run_dir_a, run_dir_b):
        path = d / "manifest.json"
        if not path.exists():
            raise UsageError(f"no manifest.json in {d}")
        manifests.append(json.loads(path.read_text(encoding="utf-8")))
    fp_a = manifests[0].get("validation_fingerprint")
    fp_b = manifests[1].get("validation_fingerprint")
    if not fp_a or fp_a != fp_b:
        raise CompareMismatchError(
            "runs were not evaluated on the same validation corpus "
            f"(fingerprints {fp_a!r} vs {fp_b!r})"
        )

    preds_a = {(r["post_id"], r["sentence"]): r for r in load_predictions(run_dir_a / "predictions.jsonl")}
    preds_b = {(r["post_id"], r["sentence"]): r for r in load_predictions(run_dir_b / "predictions.jsonl")}
    if set(preds_a) != set(preds_b):
        raise CompareMismatchError("runs cover different sentences")
    units = []
    for key in sorted(preds_a):
        a, b = preds_a[key], preds_b[key]
        if a["gold"] != b["gold"]:
            raise CompareMismatchError(f"gold labels differ for sentence {key}")
        units.append(BootstrapUnit(tuple(a["gold"]), tuple(a["pred"]), tuple(b["pred"])))

    result = paired_bootstrap(units, resamples=resamples, seed=seed, workers=workers)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = result.to_dict()
    payload.update(
        {
            "metric": "micro_f1",
            "run_a": str(run_dir_a),
            "run_b": str(run_dir_b),
            "units": len(units),
        }
    )
    _write_json(out_dir / "bootstrap.json", payload)
    return result
