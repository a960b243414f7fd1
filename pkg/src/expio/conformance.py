"""Wire-protocol conformance suite for external tagging backends.

Drives an adapter executable through hello/train/predict plus the error
paths the protocol requires it to survive, and reports one pass/fail entry
per check. Intended both for this package's own stdio adapter and for
out-of-tree adapters that want to verify compatibility.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .backends.decoding import tag_space
from .schema import LabelSchema


@dataclass
class ConformanceCheck:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ConformanceReport:
    backend: Optional[str]
    checks: list[ConformanceCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[ConformanceCheck]:
        return [c for c in self.checks if not c.passed]


class _RawSession:
    """Line-level talk to an adapter process, with read timeouts."""

    def __init__(self, command: Sequence[str]):
        self.proc = subprocess.Popen(
            list(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def send_line(self, text: str) -> None:
        self.proc.stdin.write(text + "\n")
        self.proc.stdin.flush()

    def read_reply(self, timeout: float):
        """Parsed JSON object, or None on timeout/EOF/non-JSON output."""
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            return None
        if line is None:
            return None
        try:
            parsed = json.loads(line)
        except json.JSONDecodeError:
            return None
        return parsed if isinstance(parsed, dict) else None

    def rpc(self, message: dict, timeout: float):
        self.send_line(json.dumps(message))
        return self.read_reply(timeout)

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()


def toy_wire_data(
    schema: LabelSchema, n_train: int = 20, n_dev: int = 4
) -> tuple[list[dict], list[dict]]:
    """Small deterministic train/dev sentences valid for any schema."""
    def sentence(i: int) -> dict:
        label = schema.labels[i % len(schema.labels)]
        tokens = ["the", f"thing{i}", "was", f"entity{i % 7}", "today"]
        labels = ["O", "O", "O", f"B-{label}", "O"]
        return {"tokens": tokens, "labels": labels}

    return [sentence(i) for i in range(n_train)], [sentence(i) for i in range(n_dev)]


def run_conformance_suite(
    command: Sequence[str],
    schema: LabelSchema,
    train_sentences: Optional[list[dict]] = None,
    dev_sentences: Optional[list[dict]] = None,
    epochs: int = 1,
    hyper_overrides: Optional[dict] = None,
    timeout: float = 60.0,
    train_timeout: float = 300.0,
) -> ConformanceReport:
    if train_sentences is None or dev_sentences is None:
        default_train, default_dev = toy_wire_data(schema)
        train_sentences = train_sentences or default_train
        dev_sentences = dev_sentences or default_dev
    report = ConformanceReport(backend=None)
    checks = report.checks

    session = _RawSession(command)
    try:
        reply = session.rpc({"op": "hello"}, timeout)
        ok = (
            reply is not None
            and reply.get("ok") is True
            and isinstance(reply.get("backend"), str)
            and reply.get("backend")
            and reply.get("protocol") == 1
        )
        if ok:
            report.backend = reply["backend"]
        checks.append(
            ConformanceCheck("hello_shape", bool(ok), "" if ok else f"reply: {reply!r}")
        )

        reply = session.rpc(
            {"op": "predict", "model_ref": "no-such-model", "sentences": [["a", "b"]]},
            timeout,
        )
        ok = reply is not None and reply.get("ok") is False and reply.get("code") == "untrained"
        checks.append(
            ConformanceCheck(
                "predict_untrained", bool(ok), "" if ok else f"reply: {reply!r}"
            )
        )

        session.send_line("this is {not json")
        session.send_line(json.dumps({"op": "hello"}))
        ok = False
        detail = "no reply after malformed line"
        for _ in range(2):
            reply = session.read_reply(timeout)
            if reply is None:
                detail = "adapter stopped answering after malformed input"
                break
            if reply.get("ok") is True and reply.get("protocol") == 1:
                ok = True
                break
            detail = f"unexpected reply: {reply!r}"
        checks.append(ConformanceCheck("bad_json_survival", ok, "" if ok else detail))

        reply = session.rpc({"op": "frobnicate"}, timeout)
        ok = reply is not None and reply.get("ok") is False and isinstance(reply.get("code"), str)
        checks.append(
            ConformanceCheck("unknown_op", bool(ok), "" if ok else f"reply: {reply!r}")
        )

        hyper = {"epochs": epochs, "seed": 7}
        hyper.update(hyper_overrides or {})
        reply = session.rpc(
            {
                "op": "train",
                "schema": list(schema.labels),
                "hyper": hyper,
                "train": train_sentences,
                "dev": dev_sentences,
            },
            train_timeout,
        )
        model_ref = None
        curve = None
        ok = reply is not None and reply.get("ok") is True
        if ok:
            model_ref = reply.get("model_ref")
            curve = reply.get("dev_f1_per_epoch")
            ok = (
                isinstance(model_ref, str)
                and model_ref != ""
                and isinstance(curve, list)
                and len(curve) == epochs
                and all(isinstance(v, (int, float)) and 0 <= v <= 1 for v in curve)
            )
        checks.append(
            ConformanceCheck("train_shape", bool(ok), "" if ok else f"reply: {reply!r}")
        )

        if model_ref:
            sentences = [
                ["one"],
                ["two", "tokens"],
                ["a", "longer", "sentence", "for", "the", "label", "count", "check"],
            ]
            reply = session.rpc(
                {"op": "predict", "model_ref": model_ref, "sentences": sentences},
                train_timeout,
            )
            valid_tags = set(tag_space(schema))
            ok = reply is not None and reply.get("ok") is True
            detail = "" if ok else f"reply: {reply!r}"
            if ok:
                labels = reply.get("labels")
                ok = isinstance(labels, list) and len(labels) == len(sentences)
                if ok:
                    for sent, sent_labels in zip(sentences, labels):
                        if not isinstance(sent_labels, list) or len(sent_labels) != len(sent):
                            ok, detail = False, f"label count mismatch: {sent_labels!r}"
                            break
                        bad = [l for l in sent_labels if l not in valid_tags]
                        if bad:
                            ok, detail = False, f"labels outside tag space: {bad!r}"
                            break
                else:
                    detail = f"labels shape: {labels!r}"
            checks.append(ConformanceCheck("predict_label_contract", bool(ok), detail))

            reply = session.rpc(
                {"op": "predict", "model_ref": model_ref, "sentences": []}, timeout
            )
            ok = reply is not None and reply.get("ok") is True and reply.get("labels") == []
            checks.append(
                ConformanceCheck(
                    "predict_empty", bool(ok), "" if ok else f"reply: {reply!r}"
                )
            )
        else:
            checks.append(
                ConformanceCheck("predict_label_contract", False, "no model_ref from train")
            )
            checks.append(ConformanceCheck("predict_empty", False, "no model_ref from train"))
    finally:
        session.close()
    return report


def assert_conformant(command: Sequence[str], schema: LabelSchema, **kwargs) -> ConformanceReport:
    report = run_conformance_suite(command, schema, **kwargs)
    if not report.passed:
        lines = [f"{c.name}: {c.detail}" for c in report.failures()]
        raise AssertionError("conformance failures:\n" + "\n".join(lines))
    return report
