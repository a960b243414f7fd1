"""stdio server: the tagging wire protocol in front of TokenTagger.

Run as: python -m expio_adapter --model NAME_OR_PATH [--device DEV]
        [--model-dir DIR] [--markers-in-vocab]

One JSON request per line on stdin, one JSON reply per line on stdout.
Bad input produces {"ok": false, "code": ..., "message": ...}; the loop
never dies on a request.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

import torch

from .errors import WireError
from .model import AdapterHyper, TokenTagger

BACKEND_NAME = "transformer"


def _tags_from_wire(labels) -> list[str]:
    if (
        not isinstance(labels, list)
        or not labels
        or not all(isinstance(l, str) and l for l in labels)
    ):
        raise WireError("bad_request", "schema must be a non-empty list of label strings")
    if len(set(labels)) != len(labels):
        raise WireError("bad_request", "schema labels must be unique")
    tags = ["O"]
    for label in labels:
        tags.extend((f"B-{label}", f"I-{label}"))
    return tags


def _sentences_from_wire(raw, what: str, tags: list[str]) -> list[tuple[list[str], list[str]]]:
    if not isinstance(raw, list):
        raise WireError("bad_request", f"{what} must be a list")
    tag_set = set(tags)
    out = []
    for i, rec in enumerate(raw):
        if not isinstance(rec, dict) or "tokens" not in rec or "labels" not in rec:
            raise WireError("bad_request", f"{what}[{i}] needs tokens and labels")
        tokens, labels = list(rec["tokens"]), list(rec["labels"])
        if len(tokens) != len(labels):
            raise WireError(
                "bad_request", f"{what}[{i}]: {len(tokens)} tokens vs {len(labels)} labels"
            )
        bad = [l for l in labels if l not in tag_set]
        if bad:
            raise WireError("bad_request", f"{what}[{i}]: labels outside tag space: {bad[:3]!r}")
        out.append((tokens, labels))
    return out


class AdapterServer:
    def __init__(
        self,
        pretrained: str,
        device: str = "cpu",
        model_dir: Optional[Path] = None,
        markers_in_vocab: bool = False,
    ):
        self.pretrained = pretrained
        self.device = device
        self.model_dir = model_dir
        self.markers_in_vocab = markers_in_vocab
        self.models: dict[str, TokenTagger] = {}
        self.counter = 0

    def handle(self, message: dict) -> dict:
        op = message.get("op")
        if op == "hello":
            return {"ok": True, "backend": BACKEND_NAME, "protocol": 1}
        if op == "train":
            return self._train(message)
        if op == "predict":
            return self._predict(message)
        raise WireError("bad_request", f"unknown op {op!r}")

    def _train(self, message: dict) -> dict:
        tags = _tags_from_wire(message.get("schema"))
        hyper = AdapterHyper.from_wire(message.get("hyper"))
        train_sents = _sentences_from_wire(message.get("train", []), "train", tags)
        dev_sents = _sentences_from_wire(message.get("dev", []), "dev", tags)
        if not train_sents:
            raise WireError("empty_training_set", "no training sentences")
        torch.manual_seed(hyper.seed)
        try:
            tagger = TokenTagger.from_pretrained(
                self.pretrained,
                tags,
                device=self.device,
                max_len=hyper.max_sequence_length_tokens,
                dropout=hyper.dropout,
                markers_in_vocab=self.markers_in_vocab,
            )
        except WireError:
            raise
        except (OSError, ValueError) as exc:
            raise WireError(
                "model_load", f"cannot load encoder {self.pretrained!r}: {exc}"
            ) from exc
        try:
            curve = tagger.fine_tune(train_sents, dev_sents, hyper)
        except RuntimeError as exc:
            raise WireError("train_failed", str(exc)) from exc
        self.counter += 1
        ref = f"model-{self.counter:04d}"
        if self.model_dir is not None:
            tagger.save(self.model_dir / ref)
        self.models[ref] = tagger
        return {"ok": True, "model_ref": ref, "dev_f1_per_epoch": curve}

    def _predict(self, message: dict) -> dict:
        sentences = message.get("sentences")
        if not isinstance(sentences, list) or not all(isinstance(s, list) for s in sentences):
            raise WireError("bad_request", "sentences must be a list of token lists")
        tagger = self._resolve(message.get("model_ref"))
        return {"ok": True, "labels": tagger.predict(sentences)}

    def _resolve(self, ref) -> TokenTagger:
        if isinstance(ref, str) and ref in self.models:
            return self.models[ref]
        if isinstance(ref, str) and self.model_dir is not None:
            path = self.model_dir / ref
            if path.is_dir():
                try:
                    tagger = TokenTagger.load(path, device=self.device)
                except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
                    raise WireError("model_load", f"cannot load model {ref!r}: {exc}") from exc
                self.models[ref] = tagger
                return tagger
        raise WireError("untrained", f"no model with ref {ref!r}")


def serve(stdin=None, stdout=None, **server_kwargs) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    server = AdapterServer(**server_kwargs)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            message = json.loads(line)
            if not isinstance(message, dict):
                raise WireError("bad_request", "request must be a JSON object")
            reply = server.handle(message)
        except WireError as exc:
            reply = {"ok": False, "code": exc.code, "message": str(exc)}
        except json.JSONDecodeError as exc:
            reply = {"ok": False, "code": "bad_request", "message": f"invalid JSON: {exc}"}
        except Exception as exc:  # keep serving; the client sees a structured error
            reply = {"ok": False, "code": "internal", "message": str(exc)}
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="expio-adapter",
        description="stdio tagging backend that fine-tunes a transformer encoder",
    )
    parser.add_argument(
        "--model",
        default="bert-base-uncased",
        help="pretrained encoder name or local path (default: bert-base-uncased)",
    )
    parser.add_argument("--device", default="cpu", help="torch device (default: cpu)")
    parser.add_argument(
        "--model-dir",
        type=Path,
        default=None,
        help="persist trained models here; refs survive process restarts",
    )
    parser.add_argument(
        "--markers-in-vocab",
        action="store_true",
        help="add the $$ and @@ marker tokens to the tokenizer vocabulary",
    )
    args = parser.parse_args(argv)
    serve(
        pretrained=args.model,
        device=args.device,
        model_dir=args.model_dir,
        markers_in_vocab=args.markers_in_vocab,
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
