from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

import numpy as np


class MetricError(ValueError):
    pass


class UndefinedSimilarityError(MetricError):
    pass


class UndefinedCorrelationError(MetricError):
    pass


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise MetricError(f"cosine: shapes {u.shape} and {v.shape} differ")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise UndefinedSimilarityError("cosine similarity of a zero vector is undefined")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def pearson_r(pred: Sequence[float], gold: Sequence[float]) -> float:
    """Sample Pearson correlation; raises on constant input."""
    x = np.asarray(pred, dtype=np.float64)
    y = np.asarray(gold, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise MetricError(f"pearson: need two equal-length 1-D sequences, got {x.shape} and {y.shape}")
    if len(x) < 2:
        raise MetricError("pearson: need at least two points")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise UndefinedCorrelationError("pearson correlation is undefined for zero-variance input")
    xc = x - x.mean()
    yc = y - y.mean()
    r = np.dot(xc, yc) / math.sqrt(np.dot(xc, xc) * np.dot(yc, yc))
    return float(np.clip(r, -1.0, 1.0))


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(selected: Sequence[str], references: Sequence[str], max_order: int = 4,
                epsilon: float = 1e-9) -> float:
    """Corpus BLEU with uniform weights, brevity penalty and whitespace tokens.

    Clipped match counts and candidate n-gram totals are summed over the
    corpus before dividing. An order with matches == 0 uses ``epsilon`` as its
    numerator. Orders for which the candidates contain no n-grams at all are
    left out of the geometric mean. No unigram overlap gives exactly 0.
    """
    if len(selected) != len(references):
        raise MetricError(f"bleu: {len(selected)} candidates vs {len(references)} references")
    if not selected:
        raise MetricError("bleu: empty corpus")
    matches = [0] * max_order
    totals = [0] * max_order
    cand_len = ref_len = 0
    for cand, ref in zip(selected, references):
        c, r = cand.split(), ref.split()
        cand_len += len(c)
        ref_len += len(r)
        for n in range(1, max_order + 1):
            cg, rg = _ngrams(c, n), _ngrams(r, n)
            matches[n - 1] += sum(min(k, rg[g]) for g, k in cg.items())
            totals[n - 1] += max(len(c) - n + 1, 0)
    if cand_len == 0:
        return 1.0 if ref_len == 0 else 0.0
    if matches[0] == 0:
        return 0.0
    logs = [math.log((m if m > 0 else epsilon) / t) for m, t in zip(matches, totals) if t > 0]
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return bp * math.exp(sum(logs) / len(logs))


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int]) -> np.ndarray:
    """2x2 counts, rows = true class, columns = predicted class (0, 1)."""
    t = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    if t.shape != p.shape:
        raise MetricError("confusion matrix: length mismatch")
    if np.any((t < 0) | (t > 1) | (p < 0) | (p > 1)):
        raise MetricError("confusion matrix: labels must be 0 or 1")
    cm = np.zeros((2, 2), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm
