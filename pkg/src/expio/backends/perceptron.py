"""Averaged structured perceptron with BIO-constrained Viterbi decoding.

A deterministic, dependency-light reference backend: sparse indicator
features per token, one weight vector per tag, plus a transition matrix
keyed on the previous tag. Averaging uses the usual lazy-update trick so
training stays linear in the number of updates.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from ..augment import MARKER_TOKENS
from ..errors import BackendError
from ..schema import LabelSchema
from .decoding import _decode, tag_space

_LEFT_PAD = "<s>"
_RIGHT_PAD = "</s>"
_START = "<start>"


def word_shape(token: str) -> str:
    """Run-length-compressed character class sketch, e.g. "Gout-1" -> "Xx-d"."""
    out = []
    for ch in token:
        if ch.isupper():
            cls = "X"
        elif ch.islower():
            cls = "x"
        elif ch.isdigit():
            cls = "d"
        else:
            cls = ch
        if not out or out[-1] != cls:
            out.append(cls)
    return "".join(out)


def token_features(tokens: Sequence[str], i: int) -> list[str]:
    token = tokens[i]
    lower = token.lower()
    feats = [
        f"w={lower}",
        f"suf3={lower[-3:]}",
        f"suf4={lower[-4:]}",
        f"shape={word_shape(token)}",
    ]
    if token in MARKER_TOKENS:
        feats.append(f"mark={token}")
    for off in (-2, -1, 1, 2):
        j = i + off
        if 0 <= j < len(tokens):
            neighbor = tokens[j].lower()
        else:
            neighbor = _LEFT_PAD if off < 0 else _RIGHT_PAD
        feats.append(f"w{off:+d}={neighbor}")
    return feats


class PerceptronModel:
    """Trained weights; immutable in practice once training returns."""

    def __init__(
        self,
        schema: LabelSchema,
        feature_weights: dict[str, np.ndarray],
        transitions: np.ndarray,
        start_scores: np.ndarray,
    ):
        self.schema = schema
        self.tags = tag_space(schema)
        self.feature_weights = feature_weights
        self.transitions = transitions
        self.start_scores = start_scores

    def emissions(self, tokens: Sequence[str]) -> np.ndarray:
        scores = np.zeros((len(tokens), len(self.tags)))
        for i in range(len(tokens)):
            for feat in token_features(tokens, i):
                vec = self.feature_weights.get(feat)
                if vec is not None:
                    scores[i] += vec
        return scores

    def decode(self, tokens: Sequence[str]) -> list[str]:
        if not tokens:
            return []
        path = _decode(
            self.emissions(tokens).tolist(),
            self.tags,
            self.transitions.tolist(),
            self.start_scores.tolist(),
        )
        return [self.tags[t] for t in path]

    def to_params(self) -> dict:
        return {
            "feature_weights": {f: v.tolist() for f, v in self.feature_weights.items()},
            "transitions": self.transitions.tolist(),
            "start_scores": self.start_scores.tolist(),
            "tags": list(self.tags),
        }

    @classmethod
    def from_params(cls, schema: LabelSchema, params: dict) -> "PerceptronModel":
        expected = tag_space(schema)
        if list(params.get("tags", [])) != expected:
            raise BackendError("schema_mismatch", "model tag space does not match schema")
        return cls(
            schema,
            {f: np.asarray(v, dtype=float) for f, v in params["feature_weights"].items()},
            np.asarray(params["transitions"], dtype=float),
            np.asarray(params["start_scores"], dtype=float),
        )


class _AveragedWeights:
    """Current weights plus running totals for averaging, updated lazily."""

    def __init__(self, n_tags: int):
        self.n_tags = n_tags
        self.current: dict[str, np.ndarray] = {}
        self.totals: dict[str, np.ndarray] = {}
        self.stamps: dict[str, int] = {}

    def add(self, feat: str, tag: int, delta: float, step: int) -> None:
        if feat not in self.current:
            self.current[feat] = np.zeros(self.n_tags)
            self.totals[feat] = np.zeros(self.n_tags)
            self.stamps[feat] = step
        else:
            self.totals[feat] += self.current[feat] * (step - self.stamps[feat])
            self.stamps[feat] = step
        self.current[feat][tag] += delta

    def score(self, feat: str) -> Optional[np.ndarray]:
        return self.current.get(feat)

    def averaged(self, final_step: int) -> dict[str, np.ndarray]:
        if final_step <= 0:
            return {f: v.copy() for f, v in self.current.items()}
        out = {}
        for feat, vec in self.current.items():
            total = self.totals[feat] + vec * (final_step - self.stamps[feat])
            out[feat] = total / final_step
        return out


def _trans_feature(prev_tag_index: int, tags: Sequence[str]) -> str:
    return f"prev={_START if prev_tag_index < 0 else tags[prev_tag_index]}"


def train_perceptron(
    schema: LabelSchema,
    train: Sequence[tuple[Sequence[str], Sequence[str]]],
    dev: Sequence[tuple[Sequence[str], Sequence[str]]],
    epochs: int,
    seed: int,
) -> tuple[PerceptronModel, list[float]]:
    """Returns the averaged model and per-epoch dev micro-F1 snapshots."""
    if not train:
        raise BackendError("empty_training_set", "no training sentences")
    tags = tag_space(schema)
    tag_index = {t: i for i, t in enumerate(tags)}
    for tokens, labels in list(train) + list(dev):
        for label in labels:
            if label not in tag_index:
                raise BackendError(
                    "label_outside_schema", f"label {label!r} not in schema {schema.name!r}"
                )

    weights = _AveragedWeights(len(tags))
    feature_cache = [
        [token_features(tokens, i) for i in range(len(tokens))] for tokens, _ in train
    ]
    gold_paths = [[tag_index[l] for l in labels] for _, labels in train]

    step = 0
    dev_curve: list[float] = []
    for epoch in range(epochs):
        order = np.random.default_rng((seed, epoch)).permutation(len(train))
        for si in order:
            tokens, _ = train[si]
            feats = feature_cache[si]
            gold = gold_paths[si]
            step += 1
            if not tokens:
                continue
            emissions = np.zeros((len(tokens), len(tags)))
            for i, row in enumerate(feats):
                for feat in row:
                    vec = weights.score(feat)
                    if vec is not None:
                        emissions[i] += vec
            trans, start = _transition_matrices(weights, tags)
            pred = _decode(emissions.tolist(), tags, trans.tolist(), start.tolist())
            if pred == gold:
                continue
            for i in range(len(tokens)):
                if pred[i] != gold[i]:
                    for feat in feats[i]:
                        weights.add(feat, gold[i], 1.0, step)
                        weights.add(feat, pred[i], -1.0, step)
                g_prev = gold[i - 1] if i else -1
                p_prev = pred[i - 1] if i else -1
                if (g_prev, gold[i]) != (p_prev, pred[i]):
                    weights.add(_trans_feature(g_prev, tags), gold[i], 1.0, step)
                    weights.add(_trans_feature(p_prev, tags), pred[i], -1.0, step)
        dev_curve.append(_dev_micro_f1(schema, weights.averaged(step), tags, dev))

    model = _materialize(schema, weights.averaged(step), tags)
    return model, dev_curve


def _transition_matrices(
    weights: _AveragedWeights, tags: Sequence[str]
) -> tuple[np.ndarray, np.ndarray]:
    n = len(tags)
    trans = np.zeros((n, n))
    for t in range(n):
        vec = weights.score(_trans_feature(t, tags))
        if vec is not None:
            trans[t] = vec
    vec = weights.score(_trans_feature(-1, tags))
    start = vec.copy() if vec is not None else np.zeros(n)
    return trans, start


def _materialize(
    schema: LabelSchema, averaged: dict[str, np.ndarray], tags: Sequence[str]
) -> PerceptronModel:
    n = len(tags)
    trans = np.zeros((n, n))
    start = np.zeros(n)
    feature_weights = {}
    for feat, vec in averaged.items():
        if feat == _trans_feature(-1, tags):
            start = vec
        elif feat.startswith("prev="):
            trans[tags.index(feat[len("prev="):])] = vec
        else:
            feature_weights[feat] = vec
    return PerceptronModel(schema, feature_weights, trans, start)


def _dev_micro_f1(
    schema: LabelSchema,
    averaged: dict[str, np.ndarray],
    tags: Sequence[str],
    dev: Sequence[tuple[Sequence[str], Sequence[str]]],
) -> float:
    from ..evaluation import token_confusion, token_prf

    if not dev:
        return 0.0
    model = _materialize(schema, averaged, tags)
    gold = [list(labels) for _, labels in dev]
    pred = [model.decode(list(tokens)) for tokens, _ in dev]
    return token_prf(token_confusion(gold, pred, schema)).micro.f1
