"""Command-line interface: exit codes, artifacts, config precedence."""

import json
from pathlib import Path

import pytest

from expio.augment import save_gazetteer
from expio.cli import main
from expio.corpus import save_corpus
from expio.synthetic import generate_synthetic_corpus, marker_informative_corpus


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "corpus.jsonl"
    corpus = generate_synthetic_corpus({"question": 15, "claim": 15, "per_exp": 15}, seed=3)
    save_corpus(corpus, path)
    return path


@pytest.fixture(scope="module")
def finished_run(tmp_path_factory, small_corpus):
    out = tmp_path_factory.mktemp("runs") / "base"
    code = main(
        [
            "run",
            str(small_corpus),
            "--schema",
            "subtask1",
            "--epochs",
            "2",
            "--seed",
            "5",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    return out


class TestExitCodes:
    def test_unknown_schema_is_usage_error(self, small_corpus, tmp_path, capsys):
        code = main(
            ["validate", str(small_corpus), "--schema", "banana", "--out", str(tmp_path)]
        )
        assert code == 2
        assert "unknown schema" in capsys.readouterr().err

    def test_missing_corpus_is_usage_error(self, tmp_path):
        code = main(
            ["validate", "/no/such/file.jsonl", "--schema", "subtask1", "--out", str(tmp_path)]
        )
        assert code == 2

    def test_schema_required(self, small_corpus, tmp_path, capsys):
        code = main(["validate", str(small_corpus), "--out", str(tmp_path)])
        assert code == 2
        assert "--schema is required" in capsys.readouterr().err

    def test_bad_data_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text(
            json.dumps(
                {
                    "post_id": "a",
                    "condition": "gout",
                    "text": "some text",
                    "spans": [{"start": 0, "end": 4, "label": "banana"}],
                }
            )
            + "\n",
            encoding="utf-8",
        )
        code = main(["validate", str(bad), "--schema", "subtask1", "--out", str(tmp_path)])
        assert code == 1

    def test_unreachable_backend_is_exit_3(self, small_corpus, tmp_path, capsys):
        code = main(
            [
                "run",
                str(small_corpus),
                "--schema",
                "subtask1",
                "--backend",
                "external",
                "--backend-command",
                "/nonexistent/adapter",
                "--out",
                str(tmp_path / "out"),
            ]
        )
        assert code == 3
        assert "failed at stage train" in capsys.readouterr().err

    def test_no_command_is_exit_2(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2


class TestValidateStatsSplit:
    def test_validate_clean(self, small_corpus, tmp_path, capsys):
        code = main(
            ["validate", str(small_corpus), "--schema", "subtask1", "--out", str(tmp_path)]
        )
        assert code == 0
        assert "0 errors" in capsys.readouterr().out
        report = json.loads((tmp_path / "validation.json").read_text())
        assert report["errors"] == []

    def test_validate_duplicate_ids_exits_1(self, tmp_path, capsys):
        record = {
            "post_id": "dup",
            "condition": "gout",
            "text": "gout hurts",
            "spans": [],
        }
        path = tmp_path / "dup.jsonl"
        path.write_text(json.dumps(record) + "\n" + json.dumps(record) + "\n", encoding="utf-8")
        code = main(["validate", str(path), "--schema", "subtask1", "--out", str(tmp_path)])
        assert code == 1
        err = capsys.readouterr().err
        assert "duplicate_post_id" in err

    def test_stats_writes_report(self, small_corpus, tmp_path, capsys):
        code = main(["stats", str(small_corpus), "--schema", "subtask1", "--out", str(tmp_path)])
        assert code == 0
        stats = json.loads((tmp_path / "stats.json").read_text())
        assert stats["entity_counts"]["question"] == 15
        assert json.loads(capsys.readouterr().out)["entity_counts"]["claim"] == 15

    def test_split_partition(self, small_corpus, tmp_path, capsys):
        code = main(
            [
                "split",
                str(small_corpus),
                "--schema",
                "subtask1",
                "--validation-fraction",
                "0.2",
                "--seed",
                "7",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == 0
        split = json.loads((tmp_path / "split.json").read_text())
        assert split["train_posts"] + split["validation_posts"] == 45
        assert (tmp_path / "train.jsonl").exists()
        assert (tmp_path / "validation.jsonl").exists()


class TestAugmentCommand:
    def test_augment_writes_both_formats(self, tmp_path):
        corpus, gazetteer = marker_informative_corpus(10, seed=2)
        corpus_path = tmp_path / "c.jsonl"
        gaz_path = tmp_path / "g.txt"
        save_corpus(corpus, corpus_path)
        save_gazetteer(gazetteer, gaz_path)
        out = tmp_path / "aug"
        code = main(
            [
                "augment",
                str(corpus_path),
                "--schema",
                "subtask2",
                "--gazetteer",
                str(gaz_path),
                "--out",
                str(out),
            ]
        )
        assert code == 0
        lines = (out / "augmented.jsonl").read_text().splitlines()
        assert lines
        assert any("@@" in line for line in lines)
        assert (out / "augmented.conll").exists()

    def test_augment_missing_gazetteer(self, small_corpus, tmp_path):
        code = main(
            [
                "augment",
                str(small_corpus),
                "--schema",
                "subtask1",
                "--gazetteer",
                "/no/such/gazetteer.txt",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == 2


class TestTrainPredictEvaluate:
    def test_full_manual_pipeline(self, small_corpus, tmp_path, capsys):
        train_out = tmp_path / "train"
        code = main(
            [
                "train",
                str(small_corpus),
                "--schema",
                "subtask1",
                "--epochs",
                "2",
                "--seed",
                "5",
                "--out",
                str(train_out),
            ]
        )
        assert code == 0
        assert (train_out / "model.rhtm").exists()
        training = json.loads((train_out / "training.json").read_text())
        assert len(training["dev_f1_per_epoch"]) == 2

        predict_out = tmp_path / "pred"
        code = main(
            [
                "predict",
                str(small_corpus),
                "--model",
                str(train_out / "model.rhtm"),
                "--out",
                str(predict_out),
            ]
        )
        assert code == 0
        predictions = predict_out / "predictions.jsonl"
        assert predictions.exists()
        first = json.loads(predictions.read_text().splitlines()[0])
        assert set(first) >= {"post_id", "sentence", "tokens", "gold", "pred"}

        eval_out = tmp_path / "eval"
        code = main(
            [
                "evaluate",
                str(predictions),
                "--schema",
                "subtask1",
                "--out",
                str(eval_out),
            ]
        )
        assert code == 0
        metrics = json.loads((eval_out / "metrics.json").read_text())
        assert "token_level" in metrics and "micro" in metrics["token_level"]
        out = capsys.readouterr().out
        assert "token micro" in out


class TestRunCommand:
    def test_artifacts_present(self, finished_run):
        for name in (
            "manifest.json",
            "metrics.json",
            "confusion.csv",
            "model.rhtm",
            "predictions.jsonl",
            "predictions.conll",
            "predicted_spans.jsonl",
            "train.jsonl",
            "validation.jsonl",
            "run.log",
        ):
            assert (finished_run / name).exists(), name
        for fig in ("confusion.png", "prf.png", "support.png", "epochs.png"):
            assert (finished_run / "figures" / fig).exists(), fig

    def test_no_figures_flag(self, tmp_path, small_corpus):
        out = tmp_path / "nofigs"
        code = main(
            [
                "run",
                str(small_corpus),
                "--schema",
                "subtask1",
                "--epochs",
                "1",
                "--no-figures",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        assert not (out / "figures").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert "figures" not in manifest["artifacts"]
        assert "metrics.json" in manifest["artifacts"]

    def test_manifest_echoes_config(self, finished_run):
        manifest = json.loads((finished_run / "manifest.json").read_text())
        assert manifest["config"]["schema"] == "subtask1"
        assert manifest["config"]["hyper"]["epochs"] == 2
        assert manifest["config"]["seed"] == 5
        assert manifest["backend_id"] == "perceptron"
        assert len(manifest["dev_f1_per_epoch"]) == 2
        assert set(manifest["metrics_summary"]) == {"token_micro_f1", "token_macro_f1"}

    def test_same_seed_reproduces_bytes(self, small_corpus, finished_run, tmp_path):
        out = tmp_path / "again"
        code = main(
            [
                "run",
                str(small_corpus),
                "--schema",
                "subtask1",
                "--epochs",
                "2",
                "--seed",
                "5",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        assert (out / "metrics.json").read_bytes() == (finished_run / "metrics.json").read_bytes()
        assert (out / "manifest.json").read_bytes() == (finished_run / "manifest.json").read_bytes()

    def test_rerun_from_manifest_config(self, finished_run, tmp_path, capsys):
        out = tmp_path / "replay"
        code = main(
            ["run", "--config", str(finished_run / "manifest.json"), "--out", str(out)]
        )
        assert code == 0
        assert (out / "metrics.json").read_bytes() == (finished_run / "metrics.json").read_bytes()

    def test_cli_overrides_config_file(self, small_corpus, tmp_path):
        config = {
            "schema": "subtask1",
            "corpus": str(small_corpus),
            "seed": 5,
            "hyper": {"epochs": 1},
        }
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(config), encoding="utf-8")
        out = tmp_path / "out"
        code = main(
            ["run", "--config", str(config_path), "--epochs", "2", "--out", str(out)]
        )
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["hyper"]["epochs"] == 2

    def test_unknown_config_key_rejected(self, small_corpus, tmp_path, capsys):
        config_path = tmp_path / "config.json"
        config_path.write_text(
            json.dumps({"schema": "subtask1", "corpus": str(small_corpus), "typo_key": 1}),
            encoding="utf-8",
        )
        code = main(["run", "--config", str(config_path), "--out", str(tmp_path / "o")])
        assert code == 2


class TestCompareCommand:
    def test_self_comparison_p_one(self, small_corpus, finished_run, tmp_path, capsys):
        twin = tmp_path / "twin"
        assert (
            main(
                [
                    "run",
                    str(small_corpus),
                    "--schema",
                    "subtask1",
                    "--epochs",
                    "2",
                    "--seed",
                    "5",
                    "--out",
                    str(twin),
                ]
            )
            == 0
        )
        out = tmp_path / "cmp"
        code = main(
            [
                "compare",
                str(finished_run),
                str(twin),
                "--resamples",
                "99",
                "--seed",
                "1",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        assert "p 1.000000" in capsys.readouterr().out
        payload = json.loads((out / "bootstrap.json").read_text())
        assert payload["p_value"] == 1.0
        assert payload["observed_delta"] == 0.0

    def test_corpus_mismatch_is_exit_4(self, finished_run, tmp_path, capsys):
        other_corpus = tmp_path / "other.jsonl"
        save_corpus(generate_synthetic_corpus({"question": 8, "claim": 8}, seed=9), other_corpus)
        other_run = tmp_path / "other_run"
        assert (
            main(
                [
                    "run",
                    str(other_corpus),
                    "--schema",
                    "subtask1",
                    "--epochs",
                    "1",
                    "--seed",
                    "5",
                    "--out",
                    str(other_run),
                ]
            )
            == 0
        )
        code = main(
            [
                "compare",
                str(finished_run),
                str(other_run),
                "--resamples",
                "9",
                "--out",
                str(tmp_path / "cmp"),
            ]
        )
        assert code == 4

    def test_missing_manifest_is_usage_error(self, finished_run, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        code = main(
            [
                "compare",
                str(finished_run),
                str(empty),
                "--out",
                str(tmp_path / "cmp"),
            ]
        )
        assert code == 2
