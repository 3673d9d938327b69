"""Deterministic toy datasets in the file shapes the evaluation harnesses read.

These stand in for the real corpora (Wikipedia, STSb, SICK, SMS Spam
Collection, Anki N-best lists) so every pipeline can be exercised end to end
on a laptop.
"""

from __future__ import annotations

import numpy as np

from .rng import make_rng

DETS = ["the", "a"]
ADJS = ["big", "small", "red", "old"]
NOUNS = ["cat", "dog", "bird", "fox", "man", "girl"]
VERBS = ["sees", "likes", "chases", "finds"]
PLACES = ["park", "house", "garden"]

HAM_WORDS = ["meeting", "lunch", "home", "tomorrow", "call", "mum", "dinner", "later", "sorry", "ok"]
SPAM_WORDS = ["win", "free", "prize", "claim", "cash", "urgent", "offer", "txt", "winner", "reward"]
SHARED_WORDS = ["you", "now", "the", "to", "your", "for", "is", "a", "me", "today"]


def _pick(rng: np.random.Generator, words: list[str]) -> str:
    return words[int(rng.integers(len(words)))]


def grammar_sentence(rng: np.random.Generator) -> str:
    words = [_pick(rng, DETS), _pick(rng, ADJS), _pick(rng, NOUNS), _pick(rng, VERBS),
             "the", _pick(rng, NOUNS)]
    if rng.random() < 0.5:
        words += ["in", "the", _pick(rng, PLACES)]
    return " ".join(words) + " ."


def grammar_corpus(n: int, seed: int = 0) -> list[str]:
    rng = make_rng(seed, "grammar")
    return [grammar_sentence(rng) for _ in range(n)]


def sts_pairs(n: int, seed: int = 0) -> list[tuple[float, str, str]]:
    """(gold, a, b) triples; gold in [0, 5] tracks how many slots were changed."""
    rng = make_rng(seed, "sts")
    out = []
    for _ in range(n):
        a = grammar_sentence(rng).split()
        b = list(a)
        slots = [1, 2, 3, 5]
        changes = int(rng.integers(0, len(slots) + 1))
        for pos in rng.permutation(slots)[:changes]:
            pool = {1: ADJS, 2: NOUNS, 3: VERBS, 5: NOUNS}[int(pos)]
            b[pos] = _pick(rng, [w for w in pool if w != a[pos]])
        gold = 5.0 * (1 - changes / len(slots))
        out.append((gold, " ".join(a), " ".join(b)))
    return out


def sms_messages(n: int, seed: int = 0, spam_rate: float = 0.3) -> list[tuple[str, str]]:
    """(label, text) pairs; spam draws most content words from a spam lexicon."""
    rng = make_rng(seed, "sms")
    out = []
    for _ in range(n):
        spam = rng.random() < spam_rate
        lexicon = SPAM_WORDS if spam else HAM_WORDS
        length = int(rng.integers(4, 10))
        words = [_pick(rng, lexicon) if rng.random() < 0.6 else _pick(rng, SHARED_WORDS)
                 for _ in range(length)]
        out.append(("spam" if spam else "ham", " ".join(words)))
    return out


def nbest_entries(n: int, seed: int = 0, beam: int = 20) -> list[dict]:
    """N-best records with grammatical references and perturbed candidates.

    Candidates are the reference with 0..3 word substitutions or swaps; the
    decoder score is a noisy function of the damage, so the beam 1-best is
    not always the reference.
    """
    rng = make_rng(seed, "nbest")
    vocab = ADJS + NOUNS + VERBS + PLACES
    out = []
    for i in range(n):
        ref = grammar_sentence(rng).split()
        cands = []
        for _ in range(beam):
            words = list(ref)
            damage = int(rng.integers(0, 4))
            for _ in range(damage):
                if rng.random() < 0.5:
                    words[int(rng.integers(len(words)))] = _pick(rng, vocab)
                else:
                    a, b = rng.choice(len(words) - 1, size=2, replace=False)
                    words[a], words[b] = words[b], words[a]
            score = -1.5 * damage - float(rng.exponential(1.5)) - 0.05 * len(words)
            cands.append({"text": " ".join(words), "s2s_score": round(score, 6)})
        cands.sort(key=lambda c: -c["s2s_score"])
        out.append({"source": f"src-{i}", "reference": " ".join(ref), "candidates": cands})
    return out
