"""Gazetteer annotation and marker-token augmentation.

Disease mentions get bracketed with `$$` tokens and chemical mentions with
`@@`, inserted as separate whitespace tokens before and after the mention.
An origin index maps every augmented position back to the original token (or
to the marker kind), so predictions made on augmented text project back
losslessly.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .errors import DataError, UsageError
from .schema import OUTSIDE
from .tokenization import make_label, parse_label, repair_bio

DISEASE = "disease"
CHEMICAL = "chemical"

MARKERS = {DISEASE: "$$", CHEMICAL: "@@"}
MARKER_TOKENS = frozenset(MARKERS.values())

_EDGE_PUNCT = string.punctuation + "‘’“”"


@dataclass(frozen=True)
class KnowledgeSpan:
    first_token: int
    last_token: int
    kind: str


@dataclass(frozen=True)
class Gazetteer:
    disease_terms: frozenset[str]
    chemical_terms: frozenset[str]

    def __post_init__(self):
        for terms in (self.disease_terms, self.chemical_terms):
            if any(not t for t in terms):
                raise DataError("gazetteer contains an empty term")
        both = self.disease_terms & self.chemical_terms
        if both:
            raise DataError(f"terms listed as both disease and chemical: {sorted(both)}")

    @property
    def max_ngram(self) -> int:
        lengths = [len(t.split()) for t in self.disease_terms | self.chemical_terms]
        return max(lengths, default=0)


def normalize_term(term: str) -> str:
    words = [w.strip(_EDGE_PUNCT).lower() for w in term.split()]
    return " ".join(w for w in words if w)


def load_gazetteer(path: Union[str, Path]) -> Gazetteer:
    """Parse the one-term-per-line format with [disease] / [chemical] sections."""
    path = Path(path)
    if not path.exists():
        raise UsageError(f"gazetteer file not found: {path}")
    sections = {DISEASE: set(), CHEMICAL: set()}
    current: Optional[str] = None
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in sections:
                raise DataError(f"{path}:{lineno}: unknown gazetteer section [{name}]")
            current = name
            continue
        if current is None:
            raise DataError(f"{path}:{lineno}: term before any [disease]/[chemical] section")
        term = normalize_term(line)
        if term:
            sections[current].add(term)
    return Gazetteer(frozenset(sections[DISEASE]), frozenset(sections[CHEMICAL]))


def save_gazetteer(gazetteer: Gazetteer, path: Union[str, Path]) -> None:
    lines = ["[disease]"]
    lines += sorted(gazetteer.disease_terms)
    lines.append("[chemical]")
    lines += sorted(gazetteer.chemical_terms)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def default_gazetteer() -> Gazetteer:
    return load_gazetteer(Path(__file__).parent / "data" / "gazetteer_default.txt")


def _token_text(token) -> str:
    return token if isinstance(token, str) else token.text


def gazetteer_annotate(tokens: Sequence, gazetteer: Gazetteer) -> list[KnowledgeSpan]:
    """Leftmost-longest case-insensitive n-gram scan over the token stream.

    Token edges are stripped of punctuation before matching, so "gout." hits
    the term "gout". Matches never overlap.
    """
    norm = [normalize_term(_token_text(t)) for t in tokens]
    spans: list[KnowledgeSpan] = []
    i = 0
    max_n = gazetteer.max_ngram
    while i < len(norm):
        if not norm[i]:
            i += 1
            continue
        matched = 0
        kind = None
        for n in range(min(max_n, len(norm) - i), 0, -1):
            words = norm[i : i + n]
            if any(not w for w in words):
                continue
            candidate = " ".join(words)
            if candidate in gazetteer.disease_terms:
                matched, kind = n, DISEASE
                break
            if candidate in gazetteer.chemical_terms:
                matched, kind = n, CHEMICAL
                break
        if matched:
            spans.append(KnowledgeSpan(i, i + matched - 1, kind))
            i += matched
        else:
            i += 1
    return spans


@dataclass(frozen=True)
class AugmentedSentence:
    tokens: tuple[str, ...]
    labels: Optional[tuple[str, ...]]
    # Original token index, or the marker kind string for inserted markers.
    origin: tuple[Union[int, str], ...]

    def strip_markers(self) -> list[str]:
        return [t for t, o in zip(self.tokens, self.origin) if isinstance(o, int)]


def _marker_label(neighbor: Optional[str]) -> str:
    """Label for an inserted marker: continue an entity only next to its inside."""
    if neighbor is None:
        return OUTSIDE
    tag, etype = parse_label(neighbor)
    if tag == "I":
        return make_label("I", etype)
    return OUTSIDE


def augment(
    sentence_tokens: Sequence[str],
    bio_labels: Optional[Sequence[str]],
    kspans: Sequence[KnowledgeSpan],
) -> AugmentedSentence:
    """Bracket each knowledge span with its marker token on both sides.

    When labels are supplied, markers take O unless they fall strictly inside
    a labeled entity (the opening marker looks at the token after it, the
    closing marker at the next original token), which keeps the augmented
    sequence BIO-well-formed.
    """
    n = len(sentence_tokens)
    if bio_labels is not None and len(bio_labels) != n:
        raise ValueError(f"labels/token length mismatch: {len(bio_labels)} vs {n}")
    ordered = sorted(kspans, key=lambda k: k.first_token)
    prev_last = -1
    for k in ordered:
        if not (0 <= k.first_token <= k.last_token < n):
            raise ValueError(f"knowledge span {k} out of range for {n} tokens")
        if k.first_token <= prev_last:
            raise ValueError(f"overlapping knowledge spans at token {k.first_token}")
        prev_last = k.last_token

    opens = {k.first_token: k.kind for k in ordered}
    closes = {k.last_token: k.kind for k in ordered}

    tokens: list[str] = []
    labels: Optional[list[str]] = [] if bio_labels is not None else None
    origin: list[Union[int, str]] = []

    def emit_marker(kind: str, neighbor_label: Optional[str]) -> None:
        tokens.append(MARKERS[kind])
        origin.append(kind)
        if labels is not None:
            labels.append(_marker_label(neighbor_label))

    for i, tok in enumerate(sentence_tokens):
        if i in opens:
            emit_marker(opens[i], bio_labels[i] if bio_labels is not None else None)
        tokens.append(tok)
        origin.append(i)
        if labels is not None:
            labels.append(bio_labels[i])
        if i in closes:
            nxt = bio_labels[i + 1] if bio_labels is not None and i + 1 < n else None
            emit_marker(closes[i], nxt)

    return AugmentedSentence(
        tuple(tokens), tuple(labels) if labels is not None else None, tuple(origin)
    )


def project_back(aug: AugmentedSentence, predicted: Sequence[str]) -> list[str]:
    """Map labels predicted on augmented tokens back to the original stream."""
    if len(predicted) != len(aug.tokens):
        raise ValueError(
            f"predicted length {len(predicted)} != augmented length {len(aug.tokens)}"
        )
    kept = [lab for lab, o in zip(predicted, aug.origin) if isinstance(o, int)]
    return repair_bio(kept)
