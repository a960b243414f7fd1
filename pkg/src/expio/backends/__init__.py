"""Trainable token-classifier contract and its two implementations.

`train`/`predict` dispatch on a backend id: "perceptron" is the built-in
averaged structured perceptron; "external" drives a child process speaking
the line-JSON wire protocol. Both produce ModelHandles that save/load
through the same binary container.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..errors import BackendError, UsageError
from ..schema import LabelSchema
from ..tokenization import is_well_formed
from .decoding import tag_space, viterbi_decode
from .external import ExternalBackendClient
from .model_io import load_model, save_model
from .perceptron import PerceptronModel, train_perceptron

__all__ = [
    "HyperParams",
    "TrainingSentence",
    "ModelHandle",
    "train",
    "predict",
    "save_model",
    "load_model",
    "tag_space",
    "viterbi_decode",
    "default_epochs",
    "ExternalBackendClient",
]

PERCEPTRON = "perceptron"
EXTERNAL_PREFIX = "external:"


def default_epochs(schema: LabelSchema) -> int:
    return 20 if schema.name == "subtask2" else 10


@dataclass(frozen=True)
class HyperParams:
    train_batch_size: int = 64
    eval_batch_size: int = 16
    max_sequence_length_tokens: int = 256
    dropout: float = 0.2
    learning_rate: float = 5e-5
    epochs: int = 10
    seed: int = 42

    def __post_init__(self):
        for name in ("train_batch_size", "eval_batch_size", "max_sequence_length_tokens"):
            if getattr(self, name) <= 0:
                raise UsageError(f"{name} must be positive")
        if not 0 <= self.dropout < 1:
            raise UsageError("dropout must be in [0, 1)")
        if self.learning_rate <= 0:
            raise UsageError("learning_rate must be positive")
        if self.epochs < 1:
            raise UsageError("epochs must be >= 1")

    def to_dict(self) -> dict:
        return {
            "train_batch_size": self.train_batch_size,
            "eval_batch_size": self.eval_batch_size,
            "max_sequence_length_tokens": self.max_sequence_length_tokens,
            "dropout": self.dropout,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class TrainingSentence:
    tokens: tuple[str, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.labels):
            raise ValueError(
                f"{len(self.tokens)} tokens but {len(self.labels)} labels"
            )
        if not is_well_formed(self.labels):
            raise ValueError(f"labels not well-formed BIO: {list(self.labels)}")


@dataclass
class ModelHandle:
    backend_id: str
    schema: LabelSchema
    parameters: dict
    training_meta: dict
    client: Optional[ExternalBackendClient] = field(default=None, repr=False, compare=False)


def _truncate_pair(
    sentence: TrainingSentence, max_len: int
) -> TrainingSentence:
    if len(sentence.tokens) <= max_len:
        return sentence
    return TrainingSentence(sentence.tokens[:max_len], sentence.labels[:max_len])


def _check_schema_labels(
    sentences: Sequence[TrainingSentence], schema: LabelSchema
) -> None:
    valid = set(tag_space(schema))
    for sent in sentences:
        for label in sent.labels:
            if label not in valid:
                raise BackendError(
                    "label_outside_schema",
                    f"label {label!r} not in schema {schema.name!r}",
                )


def train(
    backend: str,
    schema: LabelSchema,
    train_sentences: Sequence[TrainingSentence],
    dev_sentences: Sequence[TrainingSentence],
    hyper: HyperParams,
    command: Optional[Sequence[str]] = None,
    training_meta: Optional[dict] = None,
) -> ModelHandle:
    if not train_sentences:
        raise BackendError("empty_training_set", "no training sentences")
    _check_schema_labels(train_sentences, schema)
    _check_schema_labels(dev_sentences, schema)
    max_len = hyper.max_sequence_length_tokens
    train_cut = [_truncate_pair(s, max_len) for s in train_sentences]
    dev_cut = [_truncate_pair(s, max_len) for s in dev_sentences]
    meta = dict(training_meta or {})
    meta["hyperparams"] = hyper.to_dict()

    if backend == PERCEPTRON:
        pairs = [(list(s.tokens), list(s.labels)) for s in train_cut]
        dev_pairs = [(list(s.tokens), list(s.labels)) for s in dev_cut]
        model, dev_curve = train_perceptron(
            schema, pairs, dev_pairs, epochs=hyper.epochs, seed=hyper.seed
        )
        meta["dev_f1_per_epoch"] = dev_curve
        return ModelHandle(PERCEPTRON, schema, model.to_params(), meta)

    if backend == "external":
        if not command:
            raise UsageError("external backend requires a command")
        client = ExternalBackendClient(command)
        reply = client.request(
            {
                "op": "train",
                "schema": list(schema.labels),
                "hyper": hyper.to_dict(),
                "train": [
                    {"tokens": list(s.tokens), "labels": list(s.labels)} for s in train_cut
                ],
                "dev": [
                    {"tokens": list(s.tokens), "labels": list(s.labels)} for s in dev_cut
                ],
            }
        )
        model_ref = reply.get("model_ref")
        if not isinstance(model_ref, str) or not model_ref:
            client.close()
            raise BackendError("protocol", "train reply missing model_ref")
        meta["dev_f1_per_epoch"] = reply.get("dev_f1_per_epoch", [])
        return ModelHandle(
            f"{EXTERNAL_PREFIX}{client.backend_name}",
            schema,
            {"command": list(command), "model_ref": model_ref},
            meta,
            client=client,
        )

    raise UsageError(f"unknown backend {backend!r}")


def predict(model: ModelHandle, sentences: Sequence[Sequence[str]]) -> list[list[str]]:
    if not sentences:
        return []
    max_len = int(
        model.training_meta.get("hyperparams", {}).get("max_sequence_length_tokens", 256)
    )
    truncated: list[list[str]] = []
    tails: list[int] = []
    for i, tokens in enumerate(sentences):
        tokens = list(tokens)
        if len(tokens) > max_len:
            warnings.warn(
                f"sentence {i} has {len(tokens)} tokens; truncating to {max_len}, "
                "tail labeled O"
            )
            tails.append(len(tokens) - max_len)
            truncated.append(tokens[:max_len])
        else:
            tails.append(0)
            truncated.append(tokens)

    if model.backend_id == PERCEPTRON:
        net = PerceptronModel.from_params(model.schema, model.parameters)
        labels = [net.decode(tokens) for tokens in truncated]
    elif model.backend_id.startswith(EXTERNAL_PREFIX) or model.backend_id == "external":
        labels = _predict_external(model, truncated)
    else:
        raise BackendError("unknown_backend", f"cannot predict with {model.backend_id!r}")

    out = []
    for sent_labels, tail in zip(labels, tails):
        out.append(list(sent_labels) + ["O"] * tail)
    return out


def _predict_external(
    model: ModelHandle, sentences: Sequence[Sequence[str]]
) -> list[list[str]]:
    from ..tokenization import repair_bio

    client = model.client
    owned = False
    if client is None or client._proc.poll() is not None:
        command = model.parameters.get("command")
        if not command:
            raise BackendError("unreachable", "external model has no command recorded")
        client = ExternalBackendClient(command)
        owned = True
    try:
        reply = client.request(
            {
                "op": "predict",
                "model_ref": model.parameters.get("model_ref", ""),
                "sentences": [list(s) for s in sentences],
            }
        )
    finally:
        if owned:
            client.close()
    labels = reply.get("labels")
    if not isinstance(labels, list) or len(labels) != len(sentences):
        raise BackendError("protocol", "predict reply has wrong sentence count")
    valid = set(tag_space(model.schema))
    out = []
    for i, (tokens, sent_labels) in enumerate(zip(sentences, labels)):
        if not isinstance(sent_labels, list) or len(sent_labels) != len(tokens):
            raise BackendError("protocol", f"label count mismatch in sentence {i}")
        for label in sent_labels:
            if label not in valid:
                raise BackendError("protocol", f"label {label!r} outside tag space")
        out.append(repair_bio(sent_labels))
    return out
