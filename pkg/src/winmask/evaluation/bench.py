"""Wall-clock cost of scoring one sentence, per regime and sentence length."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..model import TransformerLM
from ..representations import lm_score
from ..rng import make_rng
from ..tokenizer import END, SPECIAL_IDS, START

BENCH_HEADER = ("regime", "n", "mean_ms", "passes")
WARMUP_CALLS = 2


class BenchError(ValueError):
    pass


@dataclass
class BenchRow:
    regime: str
    n: int
    mean_ms: float
    passes: int

    def as_tuple(self) -> tuple:
        return (self.regime, self.n, self.mean_ms, self.passes)


def synthetic_sentence(vocab_size: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """START + (n - 2) random non-special ids + END."""
    body = rng.integers(len(SPECIAL_IDS), vocab_size, size=n - 2)
    return np.concatenate([[START], body, [END]]).astype(np.int64)


def runtime_bench(models: Sequence[TransformerLM], lengths: Sequence[int], trials: int = 20,
                  seed: int = 0) -> list[BenchRow]:
    """Mean lm_score time over ``trials`` sentences, after two discarded warmup calls."""
    if trials < 5:
        raise BenchError(f"trials must be >= 5, got {trials}")
    rows = []
    for model in models:
        for n in lengths:
            if not 3 <= n <= model.config.max_len:
                raise BenchError(f"length {n} outside [3, {model.config.max_len}]")
            rng = make_rng(seed, "bench", n)
            sents = [synthetic_sentence(model.config.vocab_size, n, rng) for _ in range(trials)]
            for s in sents[:WARMUP_CALLS]:
                lm_score(model, s)
            elapsed = []
            passes = set()
            for s in sents:
                t0 = time.perf_counter_ns()
                score = lm_score(model, s)
                elapsed.append(time.perf_counter_ns() - t0)
                passes.add(score.passes)
            if len(passes) != 1:
                raise BenchError(f"pass count varied across sentences of length {n}: {sorted(passes)}")
            rows.append(BenchRow(model.regime.value, n, float(np.mean(elapsed)) / 1e6, passes.pop()))
    return rows
