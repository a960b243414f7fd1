"""Deterministic synthetic corpora for desk-scale testing and demos.

Every generated post carries at most one labeled span, built from template
sentences with seeded slot fillers. Question templates always end with "?".
The real shared-task labels are restricted, so all quality checks in this
package run against these corpora.
"""

from __future__ import annotations

import random

from .augment import Gazetteer
from .corpus import AnnotatedSpan, Corpus, Post
from .errors import UsageError
from .schema import SUBTASK1, SUBTASK2, LabelSchema

CONDITIONS = ["gout", "lupus", "POTS", "multiple sclerosis", "IBS", "cystic fibrosis", "T1D"]
DRUGS = [
    "allopurinol",
    "metoclopramide",
    "hydroxychloroquine",
    "pantoprazole",
    "tobramycin",
    "ibuprofen",
]
SYMPTOMS = ["swelling", "stiffness", "nausea", "fatigue", "tingling", "cramping"]

FILLERS = [
    "Quick update from me.",
    "Thanks to everyone who replied earlier.",
    "Long time lurker on this sub.",
    "Posting again per the weekly thread.",
    "Apologies if this was covered before.",
]

# (before, entity, after); the labeled span covers exactly the entity region.
TEMPLATES: dict[str, list[tuple[str, str, str]]] = {
    "question": [
        ("", "How do you deal with {cond} flares at work?", ""),
        ("", "Has anyone here tried {drug} for {cond}?", ""),
        ("", "What dose of {drug} worked for you?", ""),
        ("", "Is the burning from {cond} permanent?", ""),
    ],
    "claim": [
        ("", "Doctors say {drug} lowers the swelling for most people.", ""),
        ("", "Apparently {drug} reduces flare frequency a lot.", ""),
        ("", "Studies claim {drug} prevents long term damage.", ""),
        ("", "Supposedly a strict diet cures mild {cond}.", ""),
    ],
    "per_exp": [
        ("", "I took {drug} last month and my pain got better.", ""),
        ("", "My flare lasted two weeks despite rest.", ""),
        ("", "I felt dizzy after my second dose of {drug}.", ""),
        ("", "My ankle swelled up again over the weekend.", ""),
    ],
    "claim_per_exp": [
        ("", "I noticed {drug} helps my {cond} when I sleep early.", ""),
        ("", "For me cutting sugar stopped the flares completely.", ""),
        ("", "I find {drug} works better when taken with food.", ""),
        ("", "In my case stretching every morning keeps things calm.", ""),
    ],
    "population": [
        ("Support groups for ", "{cond} patients", " are hard to find."),
        ("Most ", "{cond} sufferers", " avoid the sun completely."),
        ("My cousin with ", "{cond}", " finally saw a specialist."),
    ],
    "intervention": [
        ("My doctor prescribed ", "{drug}", " this week."),
        ("They switched me to ", "{drug}", " after the relapse."),
        ("Starting ", "{drug}", " tomorrow morning."),
    ],
    "outcome": [
        ("The ", "{symptom}", " in my ankle faded after a month."),
        ("Noticed way less ", "{symptom}", " since the change."),
        ("My ", "{symptom}", " came back worse at night."),
    ],
}


def _infer_schema(labels: set[str]) -> LabelSchema:
    if not labels or labels <= set(SUBTASK1.labels):
        return SUBTASK1
    if labels <= set(SUBTASK2.labels):
        return SUBTASK2
    raise UsageError(f"cannot mix subtask-1 and subtask-2 labels in one corpus: {sorted(labels)}")


def _fill(template: str, rng: random.Random, slots: dict[str, str]) -> str:
    out = template
    for key, pool in (("cond", CONDITIONS), ("drug", DRUGS), ("symptom", SYMPTOMS)):
        token = "{%s}" % key
        while token in out:
            if key not in slots:
                slots[key] = rng.choice(pool)
            out = out.replace(token, slots[key], 1)
    return out


def generate_synthetic_corpus(spec: dict[str, int], seed: int) -> Corpus:
    """One post per requested span, label counts exactly as given in `spec`."""
    schema = _infer_schema(set(spec))
    rng = random.Random(seed)
    posts: list[Post] = []
    for label in sorted(spec):
        count = spec[label]
        if count < 0:
            raise UsageError(f"negative count for label {label!r}")
        for i in range(count):
            slots: dict[str, str] = {}
            before, entity, after = (
                _fill(part, rng, slots) for part in rng.choice(TEMPLATES[label])
            )
            sentence = before + entity + after
            span = AnnotatedSpan(len(before), len(before) + len(entity), label)
            parts = [sentence]
            offset = 0
            if rng.random() < 0.5:
                lead = rng.choice(FILLERS)
                parts.insert(0, lead)
                offset = len(lead) + 1
            if rng.random() < 0.3:
                parts.append(rng.choice(FILLERS))
            text = " ".join(parts)
            posts.append(
                Post(
                    post_id=f"synth-{label}-{i:04d}",
                    condition=slots.get("cond", rng.choice(CONDITIONS)),
                    text=text,
                    spans=(
                        AnnotatedSpan(span.start_char + offset, span.end_char + offset, label),
                    ),
                )
            )
    return Corpus(schema, tuple(posts))


_SYLLABLES = ["va", "lo", "tre", "mi", "ra", "zu", "ke", "do", "ni", "sa"]
_NAME_SUFFIXES = ["nib", "xate", "zole", "mab", "cin"]
_CONTEXTS = [
    ("I started ", " again yesterday."),
    ("They put me on ", " after the relapse."),
    ("We discussed ", " at my last visit."),
]


def marker_informative_corpus(n_entities: int, seed: int) -> tuple[Corpus, Gazetteer]:
    """Corpus where gazetteer markers are the only usable intervention signal.

    Chemical names and unlabeled decoy names share morphology and appear in
    identical contexts, and each name occurs exactly once, so a tagger
    without the marker tokens has nothing to generalize from. The returned
    gazetteer lists exactly the chemical names.
    """
    rng = random.Random(seed)
    names: set[str] = set()
    while len(names) < 2 * n_entities:
        names.add(
            "".join(rng.choice(_SYLLABLES) for _ in range(3)) + rng.choice(_NAME_SUFFIXES)
        )
    ordered = sorted(names)
    rng.shuffle(ordered)
    chems, decoys = ordered[:n_entities], ordered[n_entities:]

    posts: list[Post] = []
    for i in range(n_entities):
        for kind, name in (("chem", chems[i]), ("decoy", decoys[i])):
            before, after = rng.choice(_CONTEXTS)
            sentence = before + name + after
            parts = [sentence]
            offset = 0
            if rng.random() < 0.5:
                lead = rng.choice(FILLERS)
                parts.insert(0, lead)
                offset = len(lead) + 1
            spans = ()
            if kind == "chem":
                spans = (
                    AnnotatedSpan(
                        offset + len(before), offset + len(before) + len(name), "intervention"
                    ),
                )
            posts.append(
                Post(
                    post_id=f"{kind}-{i:04d}",
                    condition=rng.choice(CONDITIONS),
                    text=" ".join(parts),
                    spans=spans,
                )
            )
    return Corpus(SUBTASK2, tuple(posts)), Gazetteer(
        disease_terms=frozenset(), chemical_terms=frozenset(chems)
    )
