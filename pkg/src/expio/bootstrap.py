"""Paired bootstrap significance test over per-sentence predictions.

Tests whether system A's micro-F1 advantage over system B on the same
sentences is larger than resampling noise. Each resample draws sentences
with replacement and recomputes the score delta from per-sentence
sufficient statistics; the p-value counts resampled deltas at least twice
the observed one.

Resample i uses its own generator seeded with (seed, i), so results do not
depend on how resamples are batched across worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tokenization import parse_label


@dataclass(frozen=True)
class BootstrapUnit:
    """Gold and both systems' predicted label sequences for one sentence."""

    gold: tuple[str, ...]
    pred_a: tuple[str, ...]
    pred_b: tuple[str, ...]


@dataclass(frozen=True)
class BootstrapResult:
    observed_delta: float
    resamples: int
    p_value: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "observed_delta": self.observed_delta,
            "resamples": self.resamples,
            "p_value": self.p_value,
            "seed": self.seed,
        }


def _collapse(label: str) -> str | None:
    _, etype = parse_label(label)
    return etype


def _sentence_stats(gold: Sequence[str], pred: Sequence[str]) -> tuple[int, int, int]:
    """Token-level (tp, fp, fn) over entity classes for one sentence."""
    if len(gold) != len(pred):
        raise ValueError(f"token count mismatch: {len(gold)} vs {len(pred)}")
    tp = fp = fn = 0
    for g_raw, p_raw in zip(gold, pred):
        g, p = _collapse(g_raw), _collapse(p_raw)
        if p is not None and p == g:
            tp += 1
        else:
            if p is not None:
                fp += 1
            if g is not None:
                fn += 1
    return tp, fp, fn


def _micro_f1(tp: float, fp: float, fn: float) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def paired_bootstrap(
    units: Sequence[BootstrapUnit],
    metric: str = "micro_f1",
    resamples: int = 10000,
    seed: int = 42,
    workers: int = 1,
) -> BootstrapResult:
    """p-value for "A beats B by luck" under sentence-level resampling."""
    if metric != "micro_f1":
        raise ValueError(f"unsupported metric: {metric!r}")
    if not units:
        raise ValueError("paired_bootstrap needs at least one unit")
    if resamples < 1:
        raise ValueError(f"resamples must be >= 1, got {resamples}")

    n = len(units)
    stats_a = np.array([_sentence_stats(u.gold, u.pred_a) for u in units], dtype=np.int64)
    stats_b = np.array([_sentence_stats(u.gold, u.pred_b) for u in units], dtype=np.int64)

    total_a = stats_a.sum(axis=0)
    total_b = stats_b.sum(axis=0)
    observed = _micro_f1(*total_a) - _micro_f1(*total_b)

    def delta_of(batch: range) -> int:
        wins = 0
        for i in batch:
            rng = np.random.default_rng((seed, i))
            idx = rng.integers(0, n, n)
            a = stats_a[idx].sum(axis=0)
            b = stats_b[idx].sum(axis=0)
            delta = _micro_f1(*a) - _micro_f1(*b)
            if delta >= 2 * observed:
                wins += 1
        return wins

    if workers > 1:
        step = (resamples + workers - 1) // workers
        batches = [range(lo, min(lo + step, resamples)) for lo in range(0, resamples, step)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            exceeding = sum(pool.map(delta_of, batches))
    else:
        exceeding = delta_of(range(resamples))

    p_value = (1 + exceeding) / (resamples + 1)
    return BootstrapResult(observed, resamples, p_value, seed)
