"""Pretrained encoder + linear head for BIO token classification."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import torch
from transformers import AutoModelForTokenClassification, AutoTokenizer

from .alignment import align_labels, first_subword_positions
from .errors import WireError

# Marker tokens the upstream augmentation inserts; with --markers-in-vocab
# they become dedicated vocabulary entries instead of raw subword splits.
MARKER_TOKENS = ("$$", "@@")

_INT_FIELDS = {"train_batch_size", "eval_batch_size", "max_sequence_length_tokens", "epochs", "seed"}
_FLOAT_FIELDS = {"dropout", "learning_rate"}


@dataclass
class AdapterHyper:
    train_batch_size: int = 64
    eval_batch_size: int = 16
    max_sequence_length_tokens: int = 256
    dropout: float = 0.2
    learning_rate: float = 5e-5
    epochs: int = 10
    seed: int = 42

    def __post_init__(self):
        for name in ("train_batch_size", "eval_batch_size", "max_sequence_length_tokens"):
            if getattr(self, name) <= 0:
                raise WireError("bad_request", f"{name} must be positive")
        if not 0 <= self.dropout < 1:
            raise WireError("bad_request", "dropout must be in [0, 1)")
        if self.learning_rate <= 0:
            raise WireError("bad_request", "learning_rate must be positive")
        if self.epochs < 1:
            raise WireError("bad_request", "epochs must be >= 1")

    @classmethod
    def from_wire(cls, raw) -> "AdapterHyper":
        if raw is None:
            return cls()
        if not isinstance(raw, dict):
            raise WireError("bad_request", "hyper must be an object")
        values = {}
        for field in fields(cls):
            if field.name not in raw:
                continue
            value = raw[field.name]
            if field.name in _INT_FIELDS and not isinstance(value, int):
                raise WireError("bad_request", f"{field.name} must be an integer")
            if field.name in _FLOAT_FIELDS and not isinstance(value, (int, float)):
                raise WireError("bad_request", f"{field.name} must be a number")
            values[field.name] = value
        return cls(**values)


class TokenTagger:
    """A fine-tunable tagger: encoder, fast tokenizer, and a BIO tag set."""

    def __init__(self, model, tokenizer, tags: Sequence[str], device: str, max_len: int):
        self.device = torch.device(device)
        self.model = model.to(self.device)
        self.tokenizer = tokenizer
        self.tags = list(tags)
        self.tag_to_id = {t: i for i, t in enumerate(self.tags)}
        self.max_len = max_len

    @classmethod
    def from_pretrained(
        cls,
        name_or_path: Union[str, Path],
        tags: Sequence[str],
        device: str = "cpu",
        max_len: int = 256,
        dropout: float = 0.2,
        markers_in_vocab: bool = False,
    ) -> "TokenTagger":
        tags = list(tags)
        tokenizer = AutoTokenizer.from_pretrained(str(name_or_path), use_fast=True)
        if not tokenizer.is_fast:
            raise WireError("model_load", "encoder needs a fast tokenizer for word alignment")
        model = AutoModelForTokenClassification.from_pretrained(
            str(name_or_path),
            num_labels=len(tags),
            id2label={i: t for i, t in enumerate(tags)},
            label2id={t: i for i, t in enumerate(tags)},
            classifier_dropout=dropout,
        )
        if markers_in_vocab:
            added = tokenizer.add_tokens(list(MARKER_TOKENS))
            if added:
                model.resize_token_embeddings(len(tokenizer))
        return cls(model, tokenizer, tags, device, max_len)

    def save(self, path: Union[str, Path]) -> None:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        self.model.save_pretrained(path)
        self.tokenizer.save_pretrained(path)
        meta = {"tags": self.tags, "max_len": self.max_len}
        (path / "adapter_meta.json").write_text(
            json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path: Union[str, Path], device: str = "cpu") -> "TokenTagger":
        path = Path(path)
        meta = json.loads((path / "adapter_meta.json").read_text(encoding="utf-8"))
        tokenizer = AutoTokenizer.from_pretrained(str(path), use_fast=True)
        model = AutoModelForTokenClassification.from_pretrained(str(path))
        return cls(model, tokenizer, meta["tags"], device, meta["max_len"])

    def encode(self, sentences: Sequence[Sequence[str]], labels=None):
        enc = self.tokenizer(
            [list(s) for s in sentences],
            is_split_into_words=True,
            truncation=True,
            max_length=self.max_len,
            padding=True,
            return_tensors="pt",
        )
        if labels is not None:
            targets = []
            for i, tag_seq in enumerate(labels):
                ids = [self.tag_to_id[t] for t in tag_seq]
                targets.append(align_labels(enc.word_ids(batch_index=i), ids))
            enc["labels"] = torch.tensor(targets, dtype=torch.long)
        return enc.to(self.device)

    def loss(self, enc) -> torch.Tensor:
        out = self.model(
            input_ids=enc["input_ids"],
            attention_mask=enc["attention_mask"],
            labels=enc["labels"],
        )
        return out.loss

    def training_step(self, optimizer, enc) -> float:
        self.model.train()
        loss = self.loss(enc)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        return float(loss.item())

    def fine_tune(
        self,
        train_sentences: Sequence[tuple[Sequence[str], Sequence[str]]],
        dev_sentences: Sequence[tuple[Sequence[str], Sequence[str]]],
        hyper: AdapterHyper,
    ) -> list[float]:
        """Run the training loop; returns per-epoch dev micro-F1."""
        torch.manual_seed(hyper.seed)
        rng = np.random.default_rng(hyper.seed)
        optimizer = torch.optim.AdamW(self.model.parameters(), lr=hyper.learning_rate)
        curve = []
        n = len(train_sentences)
        for _ in range(hyper.epochs):
            order = rng.permutation(n)
            for start in range(0, n, hyper.train_batch_size):
                chunk = [train_sentences[j] for j in order[start : start + hyper.train_batch_size]]
                enc = self.encode([c[0] for c in chunk], [c[1] for c in chunk])
                self.training_step(optimizer, enc)
            curve.append(self.dev_f1(dev_sentences, batch_size=hyper.eval_batch_size))
        return curve

    def dev_f1(self, dev_sentences, batch_size: int = 16) -> float:
        """Token micro-F1 over entity types (B/I collapsed), O excluded."""
        if not dev_sentences:
            return 0.0
        hyp = self.predict([tokens for tokens, _ in dev_sentences], batch_size=batch_size)
        tp = fp = fn = 0
        for (_, gold), pred in zip(dev_sentences, hyp):
            for g_raw, p_raw in zip(gold, pred):
                g = None if g_raw == "O" else g_raw.split("-", 1)[1]
                p = None if p_raw == "O" else p_raw.split("-", 1)[1]
                if p is not None and p == g:
                    tp += 1
                else:
                    if p is not None:
                        fp += 1
                    if g is not None:
                        fn += 1
        if tp == 0:
            return 0.0
        precision = tp / (tp + fp)
        recall = tp / (tp + fn)
        return 2 * precision * recall / (precision + recall)

    def predict(self, sentences: Sequence[Sequence[str]], batch_size: int = 16) -> list[list[str]]:
        """One tag per input token; truncated-away words fall back to O."""
        self.model.eval()
        results: list[Optional[list[str]]] = [None] * len(sentences)
        nonempty = []
        for i, sent in enumerate(sentences):
            tokens = list(sent)
            if tokens:
                nonempty.append((i, tokens))
            else:
                results[i] = []
        for start in range(0, len(nonempty), batch_size):
            chunk = nonempty[start : start + batch_size]
            enc = self.encode([tokens for _, tokens in chunk])
            with torch.no_grad():
                logits = self.model(
                    input_ids=enc["input_ids"], attention_mask=enc["attention_mask"]
                ).logits
            best = logits.argmax(dim=-1).tolist()
            for bi, (orig, tokens) in enumerate(chunk):
                firsts = first_subword_positions(enc.word_ids(batch_index=bi))
                results[orig] = [
                    self.tags[best[bi][firsts[w]]] if w in firsts else "O"
                    for w in range(len(tokens))
                ]
        return results  # type: ignore[return-value]
