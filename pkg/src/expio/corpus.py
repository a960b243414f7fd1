"""Span-annotated corpus model: JSONL IO, validation, stats, stratified split.

The on-disk format is one post object per line:

    {"post_id": str, "condition": str, "text": str,
     "spans": [{"start": int, "end": int, "label": str}]}

`start` is inclusive, `end` exclusive, both in Unicode code-point units.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from .errors import DataError, UsageError
from .schema import LabelSchema
from .tokenization import whitespace_tokenize


@dataclass(frozen=True)
class AnnotatedSpan:
    start_char: int
    end_char: int
    label: str


@dataclass(frozen=True)
class Post:
    post_id: str
    condition: str
    text: str
    spans: tuple[AnnotatedSpan, ...]


@dataclass(frozen=True)
class Corpus:
    schema: LabelSchema
    posts: tuple[Post, ...]

    def __len__(self) -> int:
        return len(self.posts)


@dataclass(frozen=True)
class Finding:
    post_id: str
    code: str
    message: str


@dataclass
class ValidationReport:
    errors: list[Finding] = field(default_factory=list)
    warnings: list[Finding] = field(default_factory=list)

    @property
    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for finding in self.errors + self.warnings:
            out[finding.code] = out.get(finding.code, 0) + 1
        return dict(sorted(out.items()))

    def to_dict(self) -> dict:
        as_rows = lambda fs: [[f.post_id, f.code, f.message] for f in fs]
        return {
            "errors": as_rows(self.errors),
            "warnings": as_rows(self.warnings),
            "counts": self.counts,
        }


@dataclass
class CorpusStats:
    posts_per_condition: dict[str, int]
    entity_counts: dict[str, int]
    mean_entity_length_tokens: dict[str, float]
    overlap_fraction: float

    def to_dict(self) -> dict:
        return {
            "posts_per_condition": dict(sorted(self.posts_per_condition.items())),
            "entity_counts": self.entity_counts,
            "mean_entity_length_tokens": self.mean_entity_length_tokens,
            "overlap_fraction": self.overlap_fraction,
        }


def _span_from_json(raw: dict) -> AnnotatedSpan:
    return AnnotatedSpan(int(raw["start"]), int(raw["end"]), str(raw["label"]))


def load_corpus(path: Union[str, Path], schema: LabelSchema) -> Corpus:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"corpus file not found: {path}")
    posts: list[Post] = []
    with path.open("r", encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, 1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON: {exc}") from None
            try:
                post = Post(
                    post_id=str(raw["post_id"]),
                    condition=str(raw["condition"]),
                    text=str(raw["text"]),
                    spans=tuple(
                        sorted(
                            (_span_from_json(s) for s in raw.get("spans", [])),
                            key=lambda s: (s.start_char, s.end_char),
                        )
                    ),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: bad post record: {exc}") from None
            for span in post.spans:
                if span.label not in schema:
                    raise DataError(
                        f"{path}:{lineno}: unknown label {span.label!r} for schema {schema.name!r}"
                    )
                if not (0 <= span.start_char < span.end_char <= len(post.text)):
                    raise DataError(
                        f"{path}:{lineno}: span offsets [{span.start_char},{span.end_char}) out of "
                        f"range for post {post.post_id!r} (text length {len(post.text)})"
                    )
            posts.append(post)
    return Corpus(schema, tuple(posts))


def post_to_dict(post: Post) -> dict:
    return {
        "post_id": post.post_id,
        "condition": post.condition,
        "text": post.text,
        "spans": [{"start": s.start_char, "end": s.end_char, "label": s.label} for s in post.spans],
    }


def serialize_corpus(corpus: Corpus) -> str:
    return "".join(json.dumps(post_to_dict(p), ensure_ascii=False) + "\n" for p in corpus.posts)


def save_corpus(corpus: Corpus, path: Union[str, Path]) -> None:
    Path(path).write_text(serialize_corpus(corpus), encoding="utf-8")


def corpus_fingerprint(corpus: Corpus) -> str:
    return hashlib.sha256(serialize_corpus(corpus).encode("utf-8")).hexdigest()


def validate_corpus(corpus: Corpus) -> ValidationReport:
    """Collect every invariant violation; overlapping spans are warnings only."""
    report = ValidationReport()
    seen_ids: set[str] = set()
    for post in corpus.posts:
        if post.post_id in seen_ids:
            report.errors.append(
                Finding(post.post_id, "duplicate_post_id", f"post_id {post.post_id!r} repeats")
            )
        seen_ids.add(post.post_id)
        prev_start = -1
        for span in post.spans:
            if span.label not in corpus.schema:
                report.errors.append(
                    Finding(
                        post.post_id,
                        "unknown_label",
                        f"label {span.label!r} not in schema {corpus.schema.name!r}",
                    )
                )
            if not (0 <= span.start_char < span.end_char <= len(post.text)):
                report.errors.append(
                    Finding(
                        post.post_id,
                        "offset_out_of_range",
                        f"span [{span.start_char},{span.end_char}) outside text of length "
                        f"{len(post.text)}",
                    )
                )
            if span.start_char < prev_start:
                report.errors.append(
                    Finding(post.post_id, "spans_not_sorted", "spans not sorted by start_char")
                )
            prev_start = span.start_char
        for i, a in enumerate(post.spans):
            for b in post.spans[i + 1 :]:
                if b.start_char >= a.end_char:
                    break
                report.warnings.append(
                    Finding(
                        post.post_id,
                        "overlapping_spans",
                        f"[{a.start_char},{a.end_char}) {a.label} overlaps "
                        f"[{b.start_char},{b.end_char}) {b.label}",
                    )
                )
    return report


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """Entity frequency and mean length (in whitespace tokens), plus overlap rate.

    Only labels and conditions actually observed appear in the maps.
    """
    report = validate_corpus(corpus)
    if report.errors:
        raise DataError(
            f"corpus has {len(report.errors)} validation error(s); run validate_corpus first"
        )
    per_condition: dict[str, int] = {}
    counts: dict[str, int] = {}
    length_sums: dict[str, int] = {}
    total_spans = 0
    overlapping = 0
    for post in corpus.posts:
        per_condition[post.condition] = per_condition.get(post.condition, 0) + 1
        tokens = whitespace_tokenize(post.text)
        involved = [False] * len(post.spans)
        for i, span in enumerate(post.spans):
            counts[span.label] = counts.get(span.label, 0) + 1
            length_sums[span.label] = length_sums.get(span.label, 0) + sum(
                1 for t in tokens if span.start_char < t.end_char and t.start_char < span.end_char
            )
            for j in range(i + 1, len(post.spans)):
                other = post.spans[j]
                if other.start_char >= span.end_char:
                    break
                involved[i] = involved[j] = True
        total_spans += len(post.spans)
        overlapping += sum(involved)
    ordered = [l for l in corpus.schema.labels if l in counts]
    return CorpusStats(
        posts_per_condition=per_condition,
        entity_counts={l: counts[l] for l in ordered},
        mean_entity_length_tokens={l: length_sums[l] / counts[l] for l in ordered},
        overlap_fraction=(overlapping / total_spans) if total_spans else 0.0,
    )


def stratified_split(
    corpus: Corpus, validation_fraction: float, seed: int
) -> tuple[Corpus, Corpus]:
    """Greedy label-balancing partition into (train, validation).

    Posts are seed-shuffled, processed heaviest-first (span count), and each
    goes to the side that minimizes the summed per-label deviation
    |validation share - validation_fraction|. For corpora where every post
    carries at most one span this fills each label to within one post of the
    target.
    """
    if not (0.0 < validation_fraction < 1.0):
        raise UsageError(f"validation_fraction must be in (0,1), got {validation_fraction}")
    if len(corpus.posts) < 2:
        raise UsageError("stratified_split needs at least 2 posts")

    totals: dict[str, int] = {}
    for post in corpus.posts:
        for span in post.spans:
            totals[span.label] = totals.get(span.label, 0) + 1

    rng = np.random.default_rng(seed)
    order = list(rng.permutation(len(corpus.posts)))
    order.sort(key=lambda i: -len(corpus.posts[i].spans))

    n_posts = len(corpus.posts)
    val_counts = {label: 0 for label in totals}
    val_posts = 0
    to_validation: set[int] = set()

    def objective(counts: dict[str, int]) -> float:
        return sum(abs(counts[l] / totals[l] - validation_fraction) for l in totals)

    for idx in order:
        post = corpus.posts[idx]
        with_post = dict(val_counts)
        for span in post.spans:
            with_post[span.label] += 1
        gain_val = objective(with_post)
        gain_train = objective(val_counts)
        if gain_val < gain_train:
            choose_val = True
        elif gain_val > gain_train:
            choose_val = False
        else:
            # Label-indifferent post: balance overall post share, ties to train.
            choose_val = abs((val_posts + 1) / n_posts - validation_fraction) < abs(
                val_posts / n_posts - validation_fraction
            )
        if choose_val:
            to_validation.add(idx)
            val_counts = with_post
            val_posts += 1

    train = tuple(p for i, p in enumerate(corpus.posts) if i not in to_validation)
    validation = tuple(p for i, p in enumerate(corpus.posts) if i in to_validation)
    return Corpus(corpus.schema, train), Corpus(corpus.schema, validation)
