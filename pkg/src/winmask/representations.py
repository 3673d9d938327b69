"""Token/sentence representations and sentence log-likelihood scoring."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import MaskRegime, TransformerLM
from .tokenizer import MASK, PAD


class ReprError(ValueError):
    pass


@dataclass(frozen=True)
class ReprLevel:
    """``embed``, ``context`` at a 1-based layer, or ``output``."""

    kind: str
    layer: int | None = None

    def __post_init__(self):
        if self.kind not in ("embed", "context", "output"):
            raise ReprError(f"unknown representation level {self.kind!r}")
        if self.kind == "context" and (self.layer is None or self.layer < 1):
            raise ReprError(f"context level needs a layer index >= 1, got {self.layer}")

    @classmethod
    def parse(cls, text: str, num_layers: int | None = None) -> "ReprLevel":
        """Parse ``embed``, ``output``, ``context`` (last layer) or ``context:k``."""
        text = text.strip().lower()
        if text in ("embed", "output"):
            return cls(text)
        if text == "context":
            if num_layers is None:
                raise ReprError("bare 'context' needs the model depth")
            return cls("context", num_layers)
        if text.startswith("context:"):
            try:
                return cls("context", int(text.split(":", 1)[1]))
            except ValueError:
                pass
        raise ReprError(f"invalid level {text!r}; expected one of embed, output, context, context:k")

    def label(self) -> str:
        return f"context:{self.layer}" if self.kind == "context" else self.kind


@dataclass
class SentenceVector:
    values: np.ndarray
    level: ReprLevel
    pooling: str = "mean"


def token_representations(model: TransformerLM, ids: Sequence[int], level: ReprLevel) -> np.ndarray:
    """(n, d) token vectors at ``level`` from a single inference pass."""
    if level.kind == "context" and level.layer > model.config.num_layers:
        raise ReprError(f"layer {level.layer} out of range 1..{model.config.num_layers}")
    acts = model.forward(np.asarray(ids), training=False)
    if level.kind == "embed":
        return acts.embed_out.data
    if level.kind == "output":
        return acts.output_hidden.data
    return acts.context_out[level.layer - 1].data


def pool_sentence(tokens: np.ndarray, method: str = "mean", level: ReprLevel | None = None,
                  ids: Sequence[int] | None = None) -> SentenceVector:
    """Mean over the interior rows (START, END and any PAD rows dropped)."""
    tokens = np.asarray(tokens)
    if method != "mean":
        raise ReprError(f"unsupported pooling {method!r}")
    n = tokens.shape[0]
    keep = np.zeros(n, dtype=bool)
    keep[1:n - 1] = True
    if ids is not None:
        keep &= np.asarray(ids) != PAD
    if not keep.any():
        raise ReprError("no non-special positions to pool")
    pooled = tokens[keep].astype(np.float64).mean(axis=0)
    return SentenceVector(pooled, level or ReprLevel("embed"), method)


def sentence_vector(model: TransformerLM, ids: Sequence[int], level: ReprLevel) -> SentenceVector:
    return pool_sentence(token_representations(model, ids, level), "mean", level)


def _log_probs(logits: np.ndarray) -> np.ndarray:
    z = logits.astype(np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


@dataclass
class LMScore:
    log_likelihood: float
    passes: int


def lm_score(model: TransformerLM, ids: Sequence[int]) -> LMScore:
    """Sum of token log-probabilities and the number of forward passes used.

    causal: one pass, log p(t[i+1] | t[..i]) for i in 0..n-2.
    window: one pass, log p(t[i] | everything but i) for i in 1..n-1.
    mlm:    pseudo-log-likelihood, one pass per interior position with that
            position replaced by MASK.
    """
    ids = np.asarray(ids, dtype=np.int64)
    n = len(ids)
    regime = model.regime
    if regime is MaskRegime.MLM:
        total, passes = 0.0, 0
        for i in range(1, n - 1):
            masked = ids.copy()
            masked[i] = MASK
            logp = _log_probs(model.forward(masked).logits.data)
            total += logp[i, ids[i]]
            passes += 1
        return LMScore(float(total), passes)
    logp = _log_probs(model.forward(ids).logits.data)
    if regime is MaskRegime.CAUSAL:
        total = logp[np.arange(n - 1), ids[1:]].sum()
    else:
        total = logp[np.arange(1, n), ids[1:]].sum()
    return LMScore(float(total), 1)
