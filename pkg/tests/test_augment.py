"""Gazetteer matching and marker-token augmentation."""

import random

import pytest

from expio.augment import (
    CHEMICAL,
    DISEASE,
    MARKER_TOKENS,
    MARKERS,
    Gazetteer,
    KnowledgeSpan,
    augment,
    default_gazetteer,
    gazetteer_annotate,
    load_gazetteer,
    normalize_term,
    project_back,
    save_gazetteer,
)
from expio.errors import DataError
from expio.tokenization import is_well_formed, whitespace_tokenize

from helpers import random_bio_labels, random_tokens

GAZ = Gazetteer(
    frozenset({"gout", "multiple sclerosis", "ms"}),
    frozenset({"allopurinol", "tobramycin"}),
)


class TestGazetteerIO:
    def test_load_sections_comments_case(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text(
            "# header comment\n"
            "[disease]\n"
            "Gout  # inline comment\n"
            "Multiple Sclerosis\n"
            "\n"
            "[chemical]\n"
            "ALLOPURINOL\n",
            encoding="utf-8",
        )
        gaz = load_gazetteer(path)
        assert gaz.disease_terms == frozenset({"gout", "multiple sclerosis"})
        assert gaz.chemical_terms == frozenset({"allopurinol"})

    def test_save_round_trip(self, tmp_path):
        path = tmp_path / "g.txt"
        save_gazetteer(GAZ, path)
        assert load_gazetteer(path) == GAZ

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("[protein]\nfoo\n", encoding="utf-8")
        with pytest.raises(DataError, match="unknown gazetteer section"):
            load_gazetteer(path)

    def test_term_before_section_rejected(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("gout\n[disease]\n", encoding="utf-8")
        with pytest.raises(DataError, match="before any"):
            load_gazetteer(path)

    def test_overlapping_kinds_rejected(self):
        with pytest.raises(DataError, match="both disease and chemical"):
            Gazetteer(frozenset({"gout"}), frozenset({"gout"}))

    def test_default_gazetteer_loads(self):
        gaz = default_gazetteer()
        assert "gout" in gaz.disease_terms
        assert "allopurinol" in gaz.chemical_terms
        assert gaz.max_ngram >= 2

    def test_normalize_term(self):
        assert normalize_term("  Multiple   Sclerosis. ") == "multiple sclerosis"
        assert normalize_term('"Gout,"') == "gout"
        assert normalize_term("...") == ""

    def test_max_ngram(self):
        assert GAZ.max_ngram == 2
        assert Gazetteer(frozenset(), frozenset()).max_ngram == 0


class TestGazetteerAnnotate:
    def test_single_and_multi_word(self):
        tokens = "I have multiple sclerosis and gout".split()
        spans = gazetteer_annotate(tokens, GAZ)
        assert spans == [
            KnowledgeSpan(2, 3, DISEASE),
            KnowledgeSpan(5, 5, DISEASE),
        ]

    def test_leftmost_longest_beats_short(self):
        # "multiple sclerosis" must win over matching "ms" later; and the
        # bigram starting earlier wins over any unigram inside it.
        gaz = Gazetteer(frozenset({"ms", "multiple sclerosis", "sclerosis"}), frozenset({"x"}))
        spans = gazetteer_annotate("multiple sclerosis ms".split(), gaz)
        assert spans == [KnowledgeSpan(0, 1, DISEASE), KnowledgeSpan(2, 2, DISEASE)]

    def test_case_insensitive_and_edge_punctuation(self):
        tokens = "Diagnosed: GOUT, then (allopurinol).".split()
        spans = gazetteer_annotate(tokens, GAZ)
        assert spans == [
            KnowledgeSpan(1, 1, DISEASE),
            KnowledgeSpan(3, 3, CHEMICAL),
        ]

    def test_accepts_token_objects(self):
        tokens = whitespace_tokenize("gout and tobramycin")
        spans = gazetteer_annotate(tokens, GAZ)
        assert [s.kind for s in spans] == [DISEASE, CHEMICAL]

    def test_matches_never_overlap(self):
        gaz = Gazetteer(frozenset({"a b", "b c"}), frozenset({"q"}))
        spans = gazetteer_annotate("a b c".split(), gaz)
        assert spans == [KnowledgeSpan(0, 1, DISEASE)]

    def test_no_match(self):
        assert gazetteer_annotate("nothing here".split(), GAZ) == []

    def test_punctuation_only_token_skipped(self):
        assert gazetteer_annotate(["...", "gout"], GAZ) == [KnowledgeSpan(1, 1, DISEASE)]


class TestAugment:
    def test_worked_example(self):
        tokens = ["Gout", "flare", "after", "allopurinol"]
        labels = ["B-population", "O", "O", "B-intervention"]
        kspans = gazetteer_annotate(tokens, GAZ)
        aug = augment(tokens, labels, kspans)
        assert list(aug.tokens) == [
            "$$", "Gout", "$$", "flare", "after", "@@", "allopurinol", "@@",
        ]
        assert list(aug.labels) == [
            "O", "B-population", "O", "O", "O", "O", "B-intervention", "O",
        ]
        assert aug.origin == ("disease", 0, "disease", 1, 2, "chemical", 3, "chemical")

    def test_marker_inside_entity_continues_it(self):
        tokens = ["bad", "gout", "pain"]
        labels = ["B-per_exp", "I-per_exp", "I-per_exp"]
        aug = augment(tokens, labels, [KnowledgeSpan(1, 1, DISEASE)])
        assert list(aug.labels) == [
            "B-per_exp", "I-per_exp", "I-per_exp", "I-per_exp", "I-per_exp",
        ]
        assert is_well_formed(aug.labels)

    def test_opening_marker_before_b_stays_outside(self):
        aug = augment(["gout"], ["B-per_exp"], [KnowledgeSpan(0, 0, DISEASE)])
        assert list(aug.labels) == ["O", "B-per_exp", "O"]

    def test_no_labels_mode(self):
        aug = augment(["gout"], None, [KnowledgeSpan(0, 0, DISEASE)])
        assert aug.labels is None
        assert list(aug.tokens) == ["$$", "gout", "$$"]

    def test_adjacent_spans_back_to_back_markers(self):
        aug = augment(
            ["gout", "allopurinol"],
            ["O", "O"],
            [KnowledgeSpan(0, 0, DISEASE), KnowledgeSpan(1, 1, CHEMICAL)],
        )
        assert list(aug.tokens) == ["$$", "gout", "$$", "@@", "allopurinol", "@@"]

    def test_length_mismatch_raises(self):
        with pytest.raises(ValueError, match="length mismatch"):
            augment(["a", "b"], ["O"], [])

    def test_out_of_range_raises(self):
        with pytest.raises(ValueError, match="out of range"):
            augment(["a"], ["O"], [KnowledgeSpan(0, 1, DISEASE)])

    def test_overlapping_kspans_raise(self):
        with pytest.raises(ValueError, match="overlapping"):
            augment(
                ["a", "b", "c"],
                ["O", "O", "O"],
                [KnowledgeSpan(0, 1, DISEASE), KnowledgeSpan(1, 2, CHEMICAL)],
            )


class TestProjectBack:
    def test_identity_without_markers(self):
        aug = augment(["a", "b"], ["O", "B-claim"], [])
        assert project_back(aug, ["O", "B-claim"]) == ["O", "B-claim"]

    def test_marker_prediction_dropped_and_repaired(self):
        aug = augment(["gout", "now"], None, [KnowledgeSpan(0, 0, DISEASE)])
        # Model put the B on the opening marker; the survivor is repaired.
        assert project_back(aug, ["B-claim", "I-claim", "O", "O"]) == ["B-claim", "O"]

    def test_length_mismatch_raises(self):
        aug = augment(["a"], None, [])
        with pytest.raises(ValueError):
            project_back(aug, ["O", "O"])


def _random_kspans(rng: random.Random, n: int) -> list[KnowledgeSpan]:
    spans, i = [], 0
    while i < n:
        if rng.random() < 0.3:
            last = min(n - 1, i + rng.randint(0, 2))
            spans.append(KnowledgeSpan(i, last, rng.choice([DISEASE, CHEMICAL])))
            i = last + 1
        else:
            i += 1
    return spans


class TestRandomizedAugmentProperties:
    def test_round_trip_and_invariants(self, subtask1):
        rng = random.Random(20240817)
        for _ in range(300):
            n = rng.randint(1, 12)
            tokens = random_tokens(rng, n)
            labels = random_bio_labels(rng, n, subtask1.labels)
            kspans = _random_kspans(rng, n)
            aug = augment(tokens, labels, kspans)

            assert aug.strip_markers() == tokens
            assert is_well_formed(aug.labels)
            assert sum(t in MARKER_TOKENS for t in aug.tokens) == 2 * len(kspans)
            # Marker tokens match their span kind, in order.
            marker_kinds = [o for o in aug.origin if isinstance(o, str)]
            expected = []
            for k in sorted(kspans, key=lambda s: s.first_token):
                expected += [k.kind, k.kind]
            assert marker_kinds == expected
            for tok, o in zip(aug.tokens, aug.origin):
                if isinstance(o, str):
                    assert tok == MARKERS[o]
            assert [o for o in aug.origin if isinstance(o, int)] == list(range(n))
            assert project_back(aug, aug.labels) == labels
