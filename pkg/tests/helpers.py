"""Shared test data: reference confusion matrices and random-case builders."""

from __future__ import annotations

import random

from expio.corpus import AnnotatedSpan, Corpus, Post
from expio.schema import get_schema

# Token-level confusion counts for the two reference systems, rows gold /
# columns predicted, last row/column the no-label class. All oracle P/R/F1
# constants in the tests are hand-derived fractions over these counts.
CM1_LABELS = ("claim", "claim_per_exp", "per_exp", "question")
CM1_COUNTS = (
    (525, 30, 170, 75, 1507),
    (37, 1964, 2762, 86, 3466),
    (26, 968, 20681, 403, 13202),
    (37, 19, 373, 10715, 1549),
    (639, 1678, 14009, 2184, 61036),
)
CM2_LABELS = ("population", "intervention", "outcome")
CM2_COUNTS = (
    (42, 1, 12, 51),
    (4, 67, 1, 136),
    (4, 0, 45, 120),
    (104, 128, 320, 18269),
)


def synthesize_streams(entity_labels, counts):
    """Gold/pred BIO sentence pairs whose token confusion equals `counts`.

    Cell (i, j) contributes one sentence of counts[i][j] tokens labeled
    B-gold_i / B-pred_j (O for the no-label row/column); B-only sequences
    are well-formed and each token lands in exactly one confusion cell.
    """
    classes = [f"B-{l}" for l in entity_labels] + ["O"]
    gold, pred = [], []
    for i, g in enumerate(classes):
        for j, p in enumerate(classes):
            n = counts[i][j]
            if n == 0:
                continue
            gold.append([g] * n)
            pred.append([p] * n)
    return gold, pred


def random_bio_labels(rng: random.Random, n: int, labels) -> list[str]:
    """Well-formed BIO sequence built run-by-run, independent of encode_bio."""
    out = []
    while len(out) < n:
        run = min(rng.randint(1, 4), n - len(out))
        if rng.random() < 0.45:
            label = rng.choice(list(labels))
            out.append(f"B-{label}")
            out.extend([f"I-{label}"] * (run - 1))
        else:
            out.extend(["O"] * run)
    return out


def random_tokens(rng: random.Random, n: int) -> list[str]:
    alphabet = "abcdefghijklmnop"
    return ["".join(rng.choice(alphabet) for _ in range(rng.randint(1, 7))) for _ in range(n)]


def make_post(post_id: str, text: str, spans, condition: str = "gout") -> Post:
    return Post(
        post_id,
        condition,
        text,
        tuple(AnnotatedSpan(s, e, l) for s, e, l in spans),
    )


def make_corpus(schema_name: str, posts) -> Corpus:
    return Corpus(get_schema(schema_name), tuple(posts))
