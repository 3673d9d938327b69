"""Unsupervised sentence-similarity evaluation (STS benchmark / SICK layout)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from ..model import TransformerLM
from ..representations import ReprLevel, sentence_vector
from ..tokenizer import TokenizerError, Vocabulary, encode
from .io import ScoredPair
from .metrics import cosine_similarity, pearson_r

PAIR_HEADER = ("level", "index", "gold", "predicted")
SUMMARY_HEADER = ("level", "pearson_r", "pairs", "skipped")


@dataclass
class StsReport:
    level: ReprLevel
    pearson: float
    rows: list[tuple[str, int, float, float]] = field(default_factory=list)
    skipped: int = 0

    def summary_row(self) -> tuple:
        return (self.level.label(), self.pearson, len(self.rows), self.skipped)


def sts_eval(model: TransformerLM, vocab: Vocabulary, pairs: Sequence[ScoredPair],
             level: ReprLevel) -> StsReport:
    """Pearson r between gold scores and cosines of mean-pooled sentence vectors.

    Pairs where either side has no tokens are skipped and counted.
    """
    max_len = model.config.max_len
    rows, gold, pred = [], [], []
    skipped = 0
    for idx, pair in enumerate(pairs):
        try:
            a = encode(vocab, pair.sentence_a, max_len)
            b = encode(vocab, pair.sentence_b, max_len)
        except TokenizerError:
            skipped += 1
            continue
        sim = cosine_similarity(sentence_vector(model, a, level).values,
                                sentence_vector(model, b, level).values)
        rows.append((level.label(), idx, pair.gold, sim))
        gold.append(pair.gold)
        pred.append(sim)
    return StsReport(level, pearson_r(pred, gold), rows, skipped)
