"""Label schemas for the two annotation stages.

Stage 1 tags how users talk about treatments (claims, personal experiences,
claim-based personal experiences, questions); stage 2 tags the PIO entities
(population, intervention, outcome). The outside sentinel "O" is reserved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import UsageError

OUTSIDE = "O"
NO_LABEL = "no_label"


@dataclass(frozen=True)
class LabelSchema:
    name: str
    labels: tuple[str, ...]
    outside_label: str = field(default=OUTSIDE)

    def __post_init__(self):
        if not self.labels:
            raise UsageError(f"schema {self.name!r}: needs at least one label")
        if len(set(self.labels)) != len(self.labels):
            raise UsageError(f"schema {self.name!r}: duplicate labels")
        for label in self.labels:
            if not label or label == OUTSIDE:
                raise UsageError(f"schema {self.name!r}: invalid label {label!r}")

    def label_index(self, label: str) -> int:
        return self.labels.index(label)

    def __contains__(self, label: str) -> bool:
        return label in self.labels


SUBTASK1 = LabelSchema("subtask1", ("claim", "per_exp", "claim_per_exp", "question"))
SUBTASK2 = LabelSchema("subtask2", ("population", "intervention", "outcome"))

SCHEMAS = {s.name: s for s in (SUBTASK1, SUBTASK2)}


def get_schema(name: str) -> LabelSchema:
    try:
        return SCHEMAS[name]
    except KeyError:
        raise UsageError(f"unknown schema {name!r} (expected one of {sorted(SCHEMAS)})") from None
