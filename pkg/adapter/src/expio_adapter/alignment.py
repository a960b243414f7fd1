"""First-subword alignment between whitespace tokens and encoder subwords.

The wire protocol is defined over whitespace tokens, one BIO label per
token. Subword tokenizers split those tokens further; during training only
the first subword of each word carries the label (continuations are masked
with IGNORE_INDEX) and at prediction time the label is read off the first
subword. Words removed entirely by truncation fall back to "O" upstream.
"""

from typing import Optional, Sequence

IGNORE_INDEX = -100


def first_subword_positions(word_ids: Sequence[Optional[int]]) -> dict[int, int]:
    """Map word index -> position of its first subword in the encoding."""
    firsts: dict[int, int] = {}
    for pos, word in enumerate(word_ids):
        if word is not None and word not in firsts:
            firsts[word] = pos
    return firsts


def align_labels(word_ids: Sequence[Optional[int]], label_ids: Sequence[int]) -> list[int]:
    """Per-position training targets; everything but first subwords is masked."""
    targets = [IGNORE_INDEX] * len(word_ids)
    for word, pos in first_subword_positions(word_ids).items():
        targets[pos] = label_ids[word]
    return targets
