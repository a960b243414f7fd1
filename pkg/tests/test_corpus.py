"""Corpus IO, validation, statistics, and the stratified split."""

import json

import pytest

from expio.corpus import (
    AnnotatedSpan,
    Corpus,
    corpus_fingerprint,
    corpus_stats,
    load_corpus,
    save_corpus,
    stratified_split,
    validate_corpus,
)
from expio.errors import DataError, UsageError
from expio.synthetic import generate_synthetic_corpus

from helpers import make_corpus, make_post


def _write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")


def _record(post_id="p1", condition="gout", text="My gout hurts", spans=()):
    return {
        "post_id": post_id,
        "condition": condition,
        "text": text,
        "spans": [{"start": s, "end": e, "label": l} for s, e, l in spans],
    }


class TestLoadCorpus:
    def test_round_trip(self, tmp_path, subtask2):
        path = tmp_path / "c.jsonl"
        _write_jsonl(
            path,
            [
                _record(spans=[(3, 7, "population")]),
                _record(post_id="p2", text="took allopurinol", spans=[(5, 16, "intervention")]),
            ],
        )
        corpus = load_corpus(path, subtask2)
        assert len(corpus.posts) == 2
        assert corpus.posts[0].spans[0] == AnnotatedSpan(3, 7, "population")
        out = tmp_path / "copy.jsonl"
        save_corpus(corpus, out)
        again = load_corpus(out, subtask2)
        assert again.posts == corpus.posts

    def test_missing_file_is_usage_error(self, subtask1):
        with pytest.raises(UsageError):
            load_corpus("/nonexistent/corpus.jsonl", subtask1)

    def test_malformed_json_reports_line(self, tmp_path, subtask1):
        path = tmp_path / "c.jsonl"
        path.write_text(json.dumps(_record()) + "\n{broken\n", encoding="utf-8")
        with pytest.raises(DataError, match=r":2:"):
            load_corpus(path, subtask1)

    def test_missing_field_reports_line(self, tmp_path, subtask1):
        path = tmp_path / "c.jsonl"
        _write_jsonl(path, [{"post_id": "a", "text": "x"}])
        with pytest.raises(DataError, match=r":1:.*bad post record"):
            load_corpus(path, subtask1)

    def test_unknown_label_rejected(self, tmp_path, subtask2):
        path = tmp_path / "c.jsonl"
        _write_jsonl(path, [_record(spans=[(0, 2, "claim")])])
        with pytest.raises(DataError, match="unknown label"):
            load_corpus(path, subtask2)

    def test_out_of_range_span_rejected(self, tmp_path, subtask2):
        path = tmp_path / "c.jsonl"
        _write_jsonl(path, [_record(text="short", spans=[(0, 99, "population")])])
        with pytest.raises(DataError, match="out of range"):
            load_corpus(path, subtask2)

    def test_spans_sorted_on_load(self, tmp_path, subtask2):
        path = tmp_path / "c.jsonl"
        _write_jsonl(
            path,
            [
                _record(
                    text="gout and allopurinol",
                    spans=[(9, 20, "intervention"), (0, 4, "population")],
                )
            ],
        )
        corpus = load_corpus(path, subtask2)
        assert [s.start_char for s in corpus.posts[0].spans] == [0, 9]

    def test_blank_lines_skipped(self, tmp_path, subtask1):
        path = tmp_path / "c.jsonl"
        path.write_text("\n" + json.dumps(_record()) + "\n\n", encoding="utf-8")
        assert len(load_corpus(path, subtask1).posts) == 1


class TestValidateCorpus:
    def test_clean_corpus(self, subtask2):
        corpus = make_corpus(
            "subtask2", [make_post("a", "gout is here", [(0, 4, "population")])]
        )
        report = validate_corpus(corpus)
        assert report.errors == [] and report.warnings == []

    def test_duplicate_post_id(self):
        corpus = make_corpus(
            "subtask1", [make_post("a", "text one", []), make_post("a", "text two", [])]
        )
        report = validate_corpus(corpus)
        assert [f.code for f in report.errors] == ["duplicate_post_id"]

    def test_offset_and_label_errors_collected(self):
        corpus = make_corpus(
            "subtask2",
            [make_post("a", "tiny", [(0, 99, "population"), (1, 3, "banana")])],
        )
        codes = {f.code for f in validate_corpus(corpus).errors}
        assert codes == {"offset_out_of_range", "unknown_label"}

    def test_unsorted_spans_flagged(self):
        corpus = make_corpus(
            "subtask2",
            [make_post("a", "gout and meds", [(9, 13, "intervention"), (0, 4, "population")])],
        )
        assert "spans_not_sorted" in {f.code for f in validate_corpus(corpus).errors}

    def test_overlap_is_warning_with_both_extents(self):
        corpus = make_corpus(
            "subtask2",
            [make_post("a", "gout medicine", [(0, 8, "population"), (5, 13, "outcome")])],
        )
        report = validate_corpus(corpus)
        assert report.errors == []
        assert len(report.warnings) == 1
        w = report.warnings[0]
        assert w.code == "overlapping_spans"
        assert "[0,8)" in w.message and "[5,13)" in w.message

    def test_report_dict_counts(self):
        corpus = make_corpus(
            "subtask1", [make_post("a", "x y", []), make_post("a", "x y", [])]
        )
        d = validate_corpus(corpus).to_dict()
        assert d["counts"]["duplicate_post_id"] == 1


class TestCorpusStats:
    def test_counts_and_mean_length(self):
        corpus = make_corpus(
            "subtask2",
            [
                make_post("a", "my gout flare today", [(3, 13, "population")], "gout"),
                make_post("b", "took allopurinol", [(5, 16, "intervention")], "gout"),
                make_post("c", "lupus is hard", [(0, 5, "population")], "lupus"),
            ],
        )
        stats = corpus_stats(corpus)
        assert stats.posts_per_condition == {"gout": 2, "lupus": 1}
        assert stats.entity_counts == {"population": 2, "intervention": 1}
        # "gout flare" overlaps 2 tokens, "lupus" 1 token -> mean 1.5
        assert stats.mean_entity_length_tokens["population"] == pytest.approx(1.5)
        assert stats.mean_entity_length_tokens["intervention"] == pytest.approx(1.0)
        assert stats.overlap_fraction == 0.0

    def test_overlap_fraction(self):
        corpus = make_corpus(
            "subtask2",
            [
                make_post(
                    "a",
                    "gout medicine now",
                    [(0, 8, "population"), (5, 13, "outcome"), (14, 17, "intervention")],
                )
            ],
        )
        assert corpus_stats(corpus).overlap_fraction == pytest.approx(2 / 3)

    def test_label_order_follows_schema(self):
        corpus = make_corpus(
            "subtask2",
            [make_post("a", "meds gout", [(0, 4, "intervention"), (5, 9, "population")])],
        )
        stats = corpus_stats(corpus)
        assert list(stats.entity_counts) == ["population", "intervention"]
        assert list(stats.mean_entity_length_tokens) == ["population", "intervention"]

    def test_invalid_corpus_refused(self):
        corpus = make_corpus("subtask2", [make_post("a", "x", [(0, 99, "population")])])
        with pytest.raises(DataError):
            corpus_stats(corpus)

    def test_empty_corpus(self, subtask1):
        stats = corpus_stats(Corpus(subtask1, ()))
        assert stats.entity_counts == {} and stats.overlap_fraction == 0.0


class TestFingerprint:
    def test_stable_and_sensitive(self, subtask1):
        c1 = make_corpus("subtask1", [make_post("a", "Hello there", [])])
        c2 = make_corpus("subtask1", [make_post("a", "Hello there", [])])
        c3 = make_corpus("subtask1", [make_post("a", "Hello there!", [])])
        assert corpus_fingerprint(c1) == corpus_fingerprint(c2)
        assert corpus_fingerprint(c1) != corpus_fingerprint(c3)


class TestStratifiedSplit:
    def test_partition_is_disjoint_and_complete(self):
        corpus = generate_synthetic_corpus({"question": 40, "claim": 40}, seed=2)
        train, val = stratified_split(corpus, 0.25, seed=9)
        train_ids = {p.post_id for p in train.posts}
        val_ids = {p.post_id for p in val.posts}
        assert train_ids.isdisjoint(val_ids)
        assert len(train_ids) + len(val_ids) == len(corpus.posts)

    def test_deterministic(self):
        corpus = generate_synthetic_corpus({"question": 30, "per_exp": 30}, seed=4)
        a = stratified_split(corpus, 0.2, seed=5)
        b = stratified_split(corpus, 0.2, seed=5)
        assert [p.post_id for p in a[1].posts] == [p.post_id for p in b[1].posts]
        c = stratified_split(corpus, 0.2, seed=6)
        assert [p.post_id for p in a[1].posts] != [p.post_id for p in c[1].posts]

    def test_label_balance_within_one_post(self):
        corpus = generate_synthetic_corpus(
            {"question": 50, "claim": 30, "per_exp": 20}, seed=7
        )
        train, val = stratified_split(corpus, 0.2, seed=1)
        val_counts = {}
        for post in val.posts:
            for span in post.spans:
                val_counts[span.label] = val_counts.get(span.label, 0) + 1
        totals = {"question": 50, "claim": 30, "per_exp": 20}
        for label, total in totals.items():
            target = 0.2 * total
            assert abs(val_counts.get(label, 0) - target) <= 1.0

    def test_bad_fraction_rejected(self, subtask1):
        corpus = generate_synthetic_corpus({"question": 4}, seed=1)
        for bad in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(UsageError):
                stratified_split(corpus, bad, seed=1)

    def test_tiny_corpus_rejected(self, subtask1):
        corpus = make_corpus("subtask1", [make_post("a", "only one", [])])
        with pytest.raises(UsageError):
            stratified_split(corpus, 0.5, seed=1)
