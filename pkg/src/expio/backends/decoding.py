"""BIO-constrained Viterbi decoding over per-token tag scores.

The tag space is O first, then B-x/I-x pairs in schema label order. That
ordering doubles as the tie-breaking rule: among equal-scoring valid paths
the decoder returns the one whose tag-index sequence is lexicographically
smallest, i.e. ties lean toward O, then toward earlier schema labels.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

from ..schema import LabelSchema
from ..tokenization import make_label, parse_label


def tag_space(schema: LabelSchema) -> list[str]:
    tags = [schema.outside_label]
    for label in schema.labels:
        tags.append(make_label("B", label))
        tags.append(make_label("I", label))
    return tags


def allowed_transition(prev_tag: Optional[str], tag: str) -> bool:
    """I-x is reachable only from B-x or I-x; everything else is free."""
    prefix, etype = parse_label(tag)
    if prefix != "I":
        return True
    if prev_tag is None:
        return False
    _, prev_type = parse_label(prev_tag)
    return prev_type == etype


def _successor_table(tags: Sequence[str]) -> list[list[int]]:
    return [
        [j for j, nxt in enumerate(tags) if allowed_transition(cur, nxt)]
        for cur in tags
    ]


def _check_scores(emissions: Sequence[Sequence[float]], n_tags: int) -> None:
    for i, row in enumerate(emissions):
        if len(row) != n_tags:
            raise ValueError(
                f"emission row {i} has {len(row)} scores, expected {n_tags}"
            )
        for score in row:
            if not math.isfinite(score):
                raise ValueError(f"non-finite emission score at row {i}")


def _decode(
    emissions: Sequence[Sequence[float]],
    tags: Sequence[str],
    transitions: Optional[Sequence[Sequence[float]]] = None,
    start_scores: Optional[Sequence[float]] = None,
) -> list[int]:
    """Best valid path as tag indices; lexicographic minimum among ties.

    suffix[i][t] is the best score of a valid path over positions i..n-1
    that starts in tag t. Filling it backwards and then walking forwards,
    always taking the smallest tag index that achieves the maximum, yields
    the lexicographically smallest optimal path.
    """
    n = len(emissions)
    if n == 0:
        return []
    t_count = len(tags)
    successors = _successor_table(tags)

    suffix = [[0.0] * t_count for _ in range(n)]
    suffix[n - 1] = [float(s) for s in emissions[n - 1]]
    for i in range(n - 2, -1, -1):
        nxt = suffix[i + 1]
        for t in range(t_count):
            best = -math.inf
            for u in successors[t]:
                score = nxt[u] + (transitions[t][u] if transitions is not None else 0.0)
                if score > best:
                    best = score
            suffix[i][t] = emissions[i][t] + best

    start_allowed = [t for t in range(t_count) if allowed_transition(None, tags[t])]
    path = []
    best_t = start_allowed[0]
    best_score = -math.inf
    for t in start_allowed:
        score = suffix[0][t] + (start_scores[t] if start_scores is not None else 0.0)
        if score > best_score:
            best_score, best_t = score, t
    path.append(best_t)
    for i in range(1, n):
        cur = path[-1]
        best_u = -1
        best_score = -math.inf
        for u in successors[cur]:
            score = suffix[i][u] + (transitions[cur][u] if transitions is not None else 0.0)
            if score > best_score:
                best_score, best_u = score, u
        path.append(best_u)
    return path


def viterbi_decode(
    emissions: Sequence[Sequence[float]], schema: LabelSchema
) -> list[str]:
    """Highest-scoring well-formed BIO path for a tokens x tags score matrix."""
    tags = tag_space(schema)
    _check_scores(emissions, len(tags))
    return [tags[t] for t in _decode(emissions, tags)]
