"""Spam/ham probe: logistic regression on frozen sentence vectors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..model import TransformerLM
from ..representations import ReprLevel, sentence_vector
from ..rng import make_rng
from ..tokenizer import TokenizerError, Vocabulary, encode
from .io import LabeledMessage
from .metrics import confusion_matrix

REPORT_HEADER = ("level", "split_seed", "accuracy", "majority_rate", "tn", "fp", "fn", "tp",
                 "train", "test", "skipped")
LABELS = {"ham": 0, "spam": 1}


class ProbeError(ValueError):
    pass


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class LogisticRegression:
    weights: np.ndarray
    bias: float

    def predict_proba(self, features) -> np.ndarray:
        return _sigmoid(np.asarray(features, dtype=np.float64) @ self.weights + self.bias)

    def predict(self, features) -> np.ndarray:
        return (self.predict_proba(features) >= 0.5).astype(np.int64)


def logreg_train(features, labels, epochs: int = 500, lr: float = 0.5, seed: int = 0,
                 l2: float = 1e-4) -> LogisticRegression:
    """Full-batch gradient descent on mean logistic loss + (l2/2)|w|^2."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2 or len(x) != len(y):
        raise ProbeError(f"features {x.shape} do not match {len(y)} labels")
    counts = np.bincount(y.astype(np.int64), minlength=2)
    if len(counts) > 2 or counts.min() < 2:
        raise ProbeError(f"need at least two examples of each of two classes, got counts {counts.tolist()}")
    rng = make_rng(seed, "logreg")
    w = rng.normal(0.0, 0.01, size=x.shape[1])
    b = 0.0
    m = len(y)
    for _ in range(epochs):
        err = _sigmoid(x @ w + b) - y
        w -= lr * (x.T @ err / m + l2 * w)
        b -= lr * err.mean()
    return LogisticRegression(w, float(b))


def stratified_split(labels: Sequence[int], test_fraction: float = 0.2, seed: int = 0
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Index arrays (train, test), each class split in the same proportion."""
    labels = np.asarray(labels)
    rng = make_rng(seed, "split")
    train, test = [], []
    for cls in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        k = int(round(test_fraction * len(idx)))
        if len(idx) >= 2:
            k = min(max(k, 1), len(idx) - 1)
        test.extend(idx[:k])
        train.extend(idx[k:])
    return np.sort(np.array(train, dtype=np.int64)), np.sort(np.array(test, dtype=np.int64))


@dataclass
class SmsReport:
    level: ReprLevel
    split_seed: int
    accuracy: float
    majority_rate: float
    confusion: np.ndarray
    n_train: int
    n_test: int
    skipped: int = 0

    def row(self) -> tuple:
        (tn, fp), (fn, tp) = self.confusion.tolist()
        return (self.level.label(), self.split_seed, self.accuracy, self.majority_rate,
                tn, fp, fn, tp, self.n_train, self.n_test, self.skipped)


def probe_accuracy(features: np.ndarray, labels: np.ndarray, split_seed: int
                   ) -> tuple[float, float, np.ndarray, int, int]:
    """Split, standardize on the train part, fit, and score the test part."""
    train, test = stratified_split(labels, 0.2, split_seed)
    mu = features[train].mean(axis=0)
    sd = features[train].std(axis=0)
    sd[sd == 0] = 1.0
    z = (features - mu) / sd
    clf = logreg_train(z[train], labels[train], seed=split_seed)
    pred = clf.predict(z[test])
    cm = confusion_matrix(labels[test], pred)
    acc = float(np.trace(cm) / cm.sum())
    majority = float(np.bincount(labels[test], minlength=2).max() / len(test))
    return acc, majority, cm, len(train), len(test)


def sms_eval(model: TransformerLM, vocab: Vocabulary, messages: Sequence[LabeledMessage],
             level: ReprLevel, split_seed: int = 0) -> SmsReport:
    max_len = model.config.max_len
    feats, labels = [], []
    skipped = 0
    for msg in messages:
        try:
            ids = encode(vocab, msg.text, max_len)
        except TokenizerError:
            skipped += 1
            continue
        feats.append(sentence_vector(model, ids, level).values)
        labels.append(LABELS[msg.label])
    acc, majority, cm, n_train, n_test = probe_accuracy(np.array(feats), np.array(labels), split_seed)
    return SmsReport(level, split_seed, acc, majority, cm, n_train, n_test, skipped)
