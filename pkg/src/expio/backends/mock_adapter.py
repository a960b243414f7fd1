"""Reference external backend: serves the wire protocol over stdio.

Wraps the built-in perceptron behind the same line-JSON contract a real
out-of-process backend would implement, so the client, the conformance
suite, and the end-to-end comparison path can be exercised without extra
dependencies. Models live in memory unless --model-dir is given, in which
case they persist as container files and survive process restarts.

Run as: python -m expio.backends.mock_adapter [--model-dir DIR]
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from ..errors import BackendError, ExpioError
from ..schema import LabelSchema
from . import HyperParams, ModelHandle, TrainingSentence, predict, train
from .model_io import load_model, save_model

BACKEND_NAME = "mock-perceptron"


def _schema_from_wire(labels) -> LabelSchema:
    if not isinstance(labels, list) or not all(isinstance(l, str) for l in labels):
        raise BackendError("bad_request", "schema must be a list of label strings")
    try:
        return LabelSchema(name="wire", labels=tuple(labels))
    except ExpioError as exc:
        raise BackendError("bad_request", str(exc)) from exc


def _hyper_from_wire(raw) -> HyperParams:
    if raw is None:
        return HyperParams()
    if not isinstance(raw, dict):
        raise BackendError("bad_request", "hyper must be an object")
    known = {
        "train_batch_size",
        "eval_batch_size",
        "max_sequence_length_tokens",
        "dropout",
        "learning_rate",
        "epochs",
        "seed",
    }
    try:
        return HyperParams(**{k: v for k, v in raw.items() if k in known})
    except ExpioError as exc:
        raise BackendError("bad_request", str(exc)) from exc


def _sentences_from_wire(raw, what: str) -> list[TrainingSentence]:
    if not isinstance(raw, list):
        raise BackendError("bad_request", f"{what} must be a list")
    out = []
    for i, rec in enumerate(raw):
        if not isinstance(rec, dict) or "tokens" not in rec or "labels" not in rec:
            raise BackendError("bad_request", f"{what}[{i}] needs tokens and labels")
        try:
            out.append(TrainingSentence(tuple(rec["tokens"]), tuple(rec["labels"])))
        except (ValueError, TypeError) as exc:
            raise BackendError("bad_request", f"{what}[{i}]: {exc}") from exc
    return out


class AdapterServer:
    def __init__(self, model_dir: Optional[Path] = None):
        self.model_dir = model_dir
        self.models: dict[str, ModelHandle] = {}
        self.counter = 0

    def handle(self, message: dict) -> dict:
        op = message.get("op")
        if op == "hello":
            return {"ok": True, "backend": BACKEND_NAME, "protocol": 1}
        if op == "train":
            return self._train(message)
        if op == "predict":
            return self._predict(message)
        raise BackendError("bad_request", f"unknown op {op!r}")

    def _train(self, message: dict) -> dict:
        schema = _schema_from_wire(message.get("schema"))
        hyper = _hyper_from_wire(message.get("hyper"))
        train_sents = _sentences_from_wire(message.get("train", []), "train")
        dev_sents = _sentences_from_wire(message.get("dev", []), "dev")
        try:
            handle = train("perceptron", schema, train_sents, dev_sents, hyper)
        except ExpioError as exc:
            code = getattr(exc, "code", "train_failed")
            raise BackendError(code, str(exc)) from exc
        self.counter += 1
        ref = f"model-{self.counter:04d}"
        if self.model_dir is not None:
            self.model_dir.mkdir(parents=True, exist_ok=True)
            save_model(handle, self.model_dir / f"{ref}.rhtm")
        else:
            self.models[ref] = handle
        return {
            "ok": True,
            "model_ref": ref,
            "dev_f1_per_epoch": handle.training_meta.get("dev_f1_per_epoch", []),
        }

    def _predict(self, message: dict) -> dict:
        ref = message.get("model_ref")
        sentences = message.get("sentences")
        if not isinstance(sentences, list):
            raise BackendError("bad_request", "sentences must be a list")
        handle = self._resolve(ref)
        labels = predict(handle, sentences)
        return {"ok": True, "labels": labels}

    def _resolve(self, ref) -> ModelHandle:
        if isinstance(ref, str) and ref in self.models:
            return self.models[ref]
        if isinstance(ref, str) and self.model_dir is not None:
            path = self.model_dir / f"{ref}.rhtm"
            if path.exists():
                handle = load_model(path)
                self.models[ref] = handle
                return handle
        raise BackendError("untrained", f"no model with ref {ref!r}")


def serve(stdin=None, stdout=None, model_dir: Optional[Path] = None) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    server = AdapterServer(model_dir)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            message = json.loads(line)
            if not isinstance(message, dict):
                raise BackendError("bad_request", "request must be a JSON object")
            reply = server.handle(message)
        except BackendError as exc:
            reply = {"ok": False, "code": exc.code, "message": str(exc)}
        except json.JSONDecodeError as exc:
            reply = {"ok": False, "code": "bad_request", "message": f"invalid JSON: {exc}"}
        except Exception as exc:  # keep serving; the client sees a structured error
            reply = {"ok": False, "code": "internal", "message": str(exc)}
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="stdio tagging backend (perceptron)")
    parser.add_argument("--model-dir", type=Path, default=None)
    args = parser.parse_args(argv)
    serve(model_dir=args.model_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
