"""Sentence segmentation, whitespace tokenization, and span<->BIO conversion.

BIO labels are plain strings: "O", or "B-<type>" / "I-<type>" where <type> is
a schema label. A sequence is well-formed iff every I-x follows a B-x or I-x
of the same type.

Offsets are Unicode code-point indices into the post text. Tokenization is
whitespace-maximal-run only; punctuation stays attached to tokens.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, TextIO

from .schema import OUTSIDE, LabelSchema

_TOKEN_RE = re.compile(r"\S+")

# Sentence boundary triggers. A boundary falls immediately after '.', '?', '!'
# when followed by whitespace and then an uppercase letter or digit (or only
# whitespace to end of text), and after a newline under the same lookahead but
# with the newline itself counting as the whitespace.
_PUNCT_TRIGGERS = ".?!"


@dataclass(frozen=True)
class Token:
    text: str
    start_char: int
    end_char: int


@dataclass(frozen=True)
class SentenceSpan:
    start_char: int
    end_char: int
    tokens: tuple[Token, ...] = field(default=())


def parse_label(label: str) -> tuple[str, Optional[str]]:
    """Split "B-claim" -> ("B", "claim"); "O" -> ("O", None)."""
    if label == OUTSIDE:
        return OUTSIDE, None
    tag, _, etype = label.partition("-")
    if tag not in ("B", "I") or not etype:
        raise ValueError(f"malformed BIO label {label!r}")
    return tag, etype


def make_label(tag: str, etype: Optional[str]) -> str:
    return OUTSIDE if tag == OUTSIDE else f"{tag}-{etype}"


def is_well_formed(labels: Sequence[str]) -> bool:
    prev_type: Optional[str] = None
    for label in labels:
        tag, etype = parse_label(label)
        if tag == "I" and etype != prev_type:
            return False
        prev_type = etype if tag in ("B", "I") else None
    return True


def whitespace_tokenize(sentence_text: str, base_offset: int = 0) -> list[Token]:
    """Maximal non-whitespace runs with absolute character offsets."""
    return [
        Token(m.group(), base_offset + m.start(), base_offset + m.end())
        for m in _TOKEN_RE.finditer(sentence_text)
    ]


def _is_boundary(text: str, i: int) -> bool:
    """True if a sentence boundary falls right after text[i]."""
    ch = text[i]
    j = i + 1
    if ch in _PUNCT_TRIGGERS:
        if j == len(text):
            return True
        if not text[j].isspace():
            return False
        while j < len(text) and text[j].isspace():
            j += 1
        return j == len(text) or text[j].isupper() or text[j].isdigit()
    if ch == "\n":
        while j < len(text) and text[j].isspace():
            j += 1
        return j == len(text) or text[j].isupper() or text[j].isdigit()
    return False


def segment_sentences(text: str) -> list[SentenceSpan]:
    """Rule-based sentence segmentation with whitespace tokenization.

    Each returned sentence is trimmed to its first/last non-whitespace
    character, so concatenating the sentence substrings plus the skipped
    inter-sentence whitespace reproduces the input.
    """
    sentences: list[SentenceSpan] = []
    start = 0
    for i in range(len(text)):
        if _is_boundary(text, i):
            _append_sentence(sentences, text, start, i + 1)
            start = i + 1
    _append_sentence(sentences, text, start, len(text))
    return sentences


def _append_sentence(out: list[SentenceSpan], text: str, start: int, end: int) -> None:
    chunk = text[start:end]
    stripped = chunk.strip()
    if not stripped:
        return
    lead = len(chunk) - len(chunk.lstrip())
    s = start + lead
    e = s + len(stripped)
    out.append(SentenceSpan(s, e, tuple(whitespace_tokenize(text[s:e], s))))


def encode_bio(sentence: SentenceSpan, spans: Sequence) -> list[str]:
    """Project character spans onto the sentence's tokens as BIO labels.

    A token takes a span's type iff their character ranges overlap by at
    least one character. When several spans claim a token, the span starting
    earlier wins; ties break by schema label order, carried here by the
    caller passing spans sorted accordingly, so resolution uses the spans'
    (start_char, position-in-list) order. Each maximal run of tokens won by
    the same span gets a fresh B- start.
    """
    winners: list[Optional[int]] = []
    for tok in sentence.tokens:
        best: Optional[int] = None
        for k, span in enumerate(spans):
            if span.start_char < tok.end_char and tok.start_char < span.end_char:
                if best is None or (span.start_char, k) < (spans[best].start_char, best):
                    best = k
        winners.append(best)

    labels: list[str] = []
    prev: Optional[int] = None
    for w in winners:
        if w is None:
            labels.append(OUTSIDE)
        elif w == prev:
            labels.append(make_label("I", spans[w].label))
        else:
            labels.append(make_label("B", spans[w].label))
        prev = w
    return labels


def sort_spans_for_encoding(spans: Sequence, schema: LabelSchema) -> list:
    """Order spans so encode_bio's positional tie-break equals schema order."""
    return sorted(spans, key=lambda s: (s.start_char, schema.label_index(s.label), s.end_char))


def decode_bio(sentence: SentenceSpan, labels: Sequence[str]):
    """Turn a well-formed label sequence back into character spans.

    Each maximal B-x (I-x)* run becomes one span from its first token's
    start_char to its last token's end_char.
    """
    from .corpus import AnnotatedSpan

    if len(labels) != len(sentence.tokens):
        raise ValueError(
            f"label/token length mismatch: {len(labels)} labels for {len(sentence.tokens)} tokens"
        )
    spans = []
    run_start: Optional[int] = None
    run_type: Optional[str] = None

    def close(last_index: int) -> None:
        if run_start is not None:
            spans.append(
                AnnotatedSpan(
                    sentence.tokens[run_start].start_char,
                    sentence.tokens[last_index].end_char,
                    run_type,
                )
            )

    for i, label in enumerate(labels):
        tag, etype = parse_label(label)
        if tag == "B":
            close(i - 1)
            run_start, run_type = i, etype
        elif tag == OUTSIDE:
            close(i - 1)
            run_start, run_type = None, None
        elif etype != run_type:
            raise ValueError(f"ill-formed sequence at position {i}: {label} after {run_type}")
    close(len(labels) - 1)
    return spans


def repair_bio(labels: Sequence[str]) -> list[str]:
    """Rewrite every I-x lacking a valid predecessor to B-x."""
    out: list[str] = []
    prev_type: Optional[str] = None
    for label in labels:
        tag, etype = parse_label(label)
        if tag == "I" and etype != prev_type:
            label = make_label("B", etype)
        out.append(label)
        prev_type = etype
    return out


def write_conll(sentences: Iterable[tuple[Sequence[str], Sequence[str]]], fp: TextIO) -> None:
    """CoNLL-style two-column interchange: token<TAB>tag, blank line between sentences."""
    first = True
    for tokens, labels in sentences:
        if not first:
            fp.write("\n")
        first = False
        for tok, lab in zip(tokens, labels):
            fp.write(f"{tok}\t{lab}\n")


def read_conll(fp: TextIO) -> list[tuple[list[str], list[str]]]:
    sentences: list[tuple[list[str], list[str]]] = []
    tokens: list[str] = []
    labels: list[str] = []
    for line in fp:
        line = line.rstrip("\n")
        if not line:
            if tokens:
                sentences.append((tokens, labels))
                tokens, labels = [], []
            continue
        tok, _, lab = line.partition("\t")
        tokens.append(tok)
        labels.append(lab)
    if tokens:
        sentences.append((tokens, labels))
    return sentences
