"""Token- and sentence-level precision/recall/F1 and confusion matrices.

Token-level scoring collapses B-/I- prefixes to the entity type and maps O
to "no_label", matching how the shared task's confusion matrices are laid
out. Micro and macro aggregates pool over entity labels only; "no_label"
never counts as a positive.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, TextIO

from .corpus import AnnotatedSpan
from .schema import NO_LABEL, LabelSchema
from .tokenization import SentenceSpan, parse_label


class Prf(NamedTuple):
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


def _prf(tp: float, fp: float, fn: float) -> Prf:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return Prf(p, r, f1)


@dataclass
class ConfusionMatrix:
    labels: tuple[str, ...]  # schema labels + "no_label"; rows gold, columns predicted
    counts: list[list[int]]

    @property
    def grand_total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def row_total(self, i: int) -> int:
        return sum(self.counts[i])

    def col_total(self, j: int) -> int:
        return sum(row[j] for row in self.counts)

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "counts": [list(r) for r in self.counts]}

    def write_csv(self, fp: TextIO) -> None:
        writer = csv.writer(fp)
        writer.writerow(["gold\\predicted", *self.labels])
        for label, row in zip(self.labels, self.counts):
            writer.writerow([label, *row])


@dataclass
class MetricsReport:
    per_label: dict[str, Prf]
    micro: Prf
    macro: Prf
    support: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "per_label": {l: prf.to_dict() for l, prf in self.per_label.items()},
            "micro": self.micro.to_dict(),
            "macro": self.macro.to_dict(),
            "support": self.support,
        }


def _collapse(label: str) -> str:
    tag, etype = parse_label(label)
    return NO_LABEL if etype is None else etype


def token_confusion(
    gold: Sequence[Sequence[str]], pred: Sequence[Sequence[str]], schema: LabelSchema
) -> ConfusionMatrix:
    """One count per token at (gold type, predicted type)."""
    if len(gold) != len(pred):
        raise ValueError(f"sentence count mismatch: {len(gold)} gold vs {len(pred)} predicted")
    labels = (*schema.labels, NO_LABEL)
    index = {l: i for i, l in enumerate(labels)}
    counts = [[0] * len(labels) for _ in labels]
    for k, (g_sent, p_sent) in enumerate(zip(gold, pred)):
        if len(g_sent) != len(p_sent):
            raise ValueError(
                f"token count mismatch in sentence {k}: {len(g_sent)} vs {len(p_sent)}"
            )
        for g, p in zip(g_sent, p_sent):
            counts[index[_collapse(g)]][index[_collapse(p)]] += 1
    return ConfusionMatrix(labels, counts)


def class_confusion(
    gold: Sequence[str], pred: Sequence[str], schema: LabelSchema
) -> ConfusionMatrix:
    """Confusion over already-collapsed class names (entity types or no_label)."""
    if len(gold) != len(pred):
        raise ValueError(f"length mismatch: {len(gold)} vs {len(pred)}")
    labels = (*schema.labels, NO_LABEL)
    index = {l: i for i, l in enumerate(labels)}
    counts = [[0] * len(labels) for _ in labels]
    for g, p in zip(gold, pred):
        counts[index[g]][index[p]] += 1
    return ConfusionMatrix(labels, counts)


def prf_from_matrix(matrix: ConfusionMatrix) -> MetricsReport:
    """Per-label, micro, and macro P/R/F1 with "no_label" excluded from positives."""
    entity = [(i, l) for i, l in enumerate(matrix.labels) if l != NO_LABEL]
    per_label: dict[str, Prf] = {}
    support: dict[str, int] = {}
    tp_sum = fp_sum = fn_sum = 0
    for i, label in entity:
        tp = matrix.counts[i][i]
        fp = matrix.col_total(i) - tp
        fn = matrix.row_total(i) - tp
        per_label[label] = _prf(tp, fp, fn)
        support[label] = matrix.row_total(i)
        tp_sum, fp_sum, fn_sum = tp_sum + tp, fp_sum + fp, fn_sum + fn
    micro = _prf(tp_sum, fp_sum, fn_sum)
    k = len(entity)
    macro = Prf(
        sum(v.precision for v in per_label.values()) / k if k else 0.0,
        sum(v.recall for v in per_label.values()) / k if k else 0.0,
        sum(v.f1 for v in per_label.values()) / k if k else 0.0,
    )
    return MetricsReport(per_label, micro, macro, support)


def token_prf(matrix: ConfusionMatrix) -> MetricsReport:
    return prf_from_matrix(matrix)


def sentence_labels(
    sentence: SentenceSpan, labels_or_spans: Sequence, schema: Optional[LabelSchema] = None
) -> str:
    """Single class for a sentence, from gold spans or from predicted labels.

    Gold side: the class of the annotated span overlapping the most sentence
    tokens. Predicted side: the most frequent entity type among the
    sentence's token labels. Either way "no_label" when nothing applies;
    ties resolve to schema label order.
    """
    if schema is None:
        from .schema import get_schema

        schema = get_schema("subtask1")
    items = list(labels_or_spans)
    if items and isinstance(items[0], AnnotatedSpan):
        return _sentence_class_from_spans(sentence, items, schema)
    return _sentence_class_from_labels(items, schema)


def _sentence_class_from_spans(
    sentence: SentenceSpan, spans: Sequence[AnnotatedSpan], schema: LabelSchema
) -> str:
    ordered = sorted(spans, key=lambda s: schema.label_index(s.label))
    best: Optional[str] = None
    best_count = 0
    for span in ordered:
        count = sum(
            1
            for t in sentence.tokens
            if span.start_char < t.end_char and t.start_char < span.end_char
        )
        if count > best_count:
            best, best_count = span.label, count
    return best if best is not None else NO_LABEL


def _sentence_class_from_labels(labels: Sequence[str], schema: LabelSchema) -> str:
    counts = {l: 0 for l in schema.labels}
    for label in labels:
        _, etype = parse_label(label)
        if etype is not None:
            counts[etype] += 1
    top = max(counts.values(), default=0)
    if top == 0:
        return NO_LABEL
    return next(l for l in schema.labels if counts[l] == top)


def sentence_gold_classes(
    sentences: Sequence[SentenceSpan], spans: Sequence[AnnotatedSpan], schema: LabelSchema
) -> list[str]:
    return [_sentence_class_from_spans(sent, spans, schema) for sent in sentences]


def sentence_pred_classes(
    label_sequences: Sequence[Sequence[str]], schema: LabelSchema
) -> list[str]:
    return [_sentence_class_from_labels(labels, schema) for labels in label_sequences]


def sentence_prf(
    gold_classes: Sequence[str], pred_classes: Sequence[str], schema: LabelSchema
) -> MetricsReport:
    if len(gold_classes) != len(pred_classes):
        raise ValueError(
            f"length mismatch: {len(gold_classes)} gold vs {len(pred_classes)} predicted"
        )
    return prf_from_matrix(class_confusion(gold_classes, pred_classes, schema))
