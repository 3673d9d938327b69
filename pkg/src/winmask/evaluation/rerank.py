"""N-best reranking by interpolating decoder and language-model scores."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..model import TransformerLM
from ..representations import lm_score
from ..tokenizer import Vocabulary, encode
from .io import NBestEntry
from .metrics import corpus_bleu

SELECTION_HEADER = ("entry", "source", "selected_rank", "s2s_score", "lm_score", "combined", "text")
SUMMARY_HEADER = ("lambda", "entries", "bleu_reranked", "bleu_beam_1best", "lm_passes")


class RerankError(ValueError):
    pass


@dataclass(frozen=True)
class RerankConfig:
    lam: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise RerankError(f"lambda must be in [0, 1], got {self.lam}")


@dataclass
class Selection:
    index: int
    text: str
    s2s_score: float
    lm_score: float
    combined: float


def combined_score(s2s: float, lm: float, lam: float) -> float:
    return (1.0 - lam) * s2s + lam * lm


def select(s2s_scores: Sequence[float], lm_scores: Sequence[float], lam: float) -> tuple[int, float]:
    """Argmax of the interpolated score; the earliest (best beam) index wins ties."""
    if not s2s_scores:
        raise RerankError("empty candidate list")
    if len(s2s_scores) != len(lm_scores):
        raise RerankError("score lists differ in length")
    best, best_score = 0, combined_score(s2s_scores[0], lm_scores[0], lam)
    for i in range(1, len(s2s_scores)):
        s = combined_score(s2s_scores[i], lm_scores[i], lam)
        if s > best_score:
            best, best_score = i, s
    return best, best_score


@dataclass
class RerankResult:
    selections: list[Selection]
    bleu_reranked: float
    bleu_beam: float
    lm_passes: int


def rerank(model: TransformerLM, vocab: Vocabulary, entries: Sequence[NBestEntry],
           cfg: RerankConfig = RerankConfig()) -> RerankResult:
    max_len = model.config.max_len
    selections = []
    passes = 0
    for entry in entries:
        if not entry.candidates:
            raise RerankError(f"entry {entry.source!r} has no candidates")
        s2s = [c.s2s_score for c in entry.candidates]
        lms = []
        for c in entry.candidates:
            score = lm_score(model, encode(vocab, c.text, max_len))
            lms.append(score.log_likelihood)
            passes += score.passes
        idx, comb = select(s2s, lms, cfg.lam)
        selections.append(Selection(idx, entry.candidates[idx].text, s2s[idx], lms[idx], comb))
    refs = [e.reference for e in entries]
    beam_best = [beam_one_best(e).text for e in entries]
    return RerankResult(selections, corpus_bleu([s.text for s in selections], refs),
                        corpus_bleu(beam_best, refs), passes)


def beam_one_best(entry: NBestEntry):
    idx, _ = select([c.s2s_score for c in entry.candidates], [0.0] * len(entry.candidates), 0.0)
    return entry.candidates[idx]
