"""Batching, the three training objectives, and the training loop."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import nncore as nn
from .model import MaskRegime, ModelConfig, TransformerLM, prediction_targets
from .rng import make_rng
from .tokenizer import END, MASK, PAD, START, Vocabulary

log = logging.getLogger(__name__)

LOSS_LOG_HEADER = ("step", "regime", "loss", "targets", "ms")


class TrainingError(ValueError):
    pass


class NonFiniteLossError(ArithmeticError):
    def __init__(self, step: int, value: float):
        super().__init__(f"non-finite loss {value} at step {step}")
        self.step = step
        self.value = value


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    steps: int = 5000
    lr: float = 1e-4
    seed: int = 0
    regime: MaskRegime = MaskRegime.WINDOW
    log_every: int = 100

    def __post_init__(self):
        object.__setattr__(self, "regime", MaskRegime(self.regime))
        if self.batch_size < 1 or self.steps < 1 or self.log_every < 1:
            raise TrainingError(f"invalid train config: {self}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["regime"] = self.regime.value
        return d


@dataclass
class Batch:
    ids: np.ndarray       # (B, n) original ids, PAD-filled
    valid: np.ndarray     # (B, n) True at real tokens
    inputs: np.ndarray    # ids fed to the model (MASK-corrupted under mlm)
    targets: np.ndarray   # (B, n)
    weights: np.ndarray   # (B, n) 0/1 loss weights

    @property
    def num_targets(self) -> int:
        return int(self.weights.sum())


@dataclass
class LossRow:
    step: int
    regime: str
    loss: float
    targets: int
    ms: float


@dataclass
class LossLog:
    rows: list[LossRow] = field(default_factory=list)

    def append(self, row: LossRow) -> None:
        if self.rows and row.step <= self.rows[-1].step:
            raise TrainingError(f"loss log steps must increase: {row.step} after {self.rows[-1].step}")
        self.rows.append(row)

    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOSS_LOG_HEADER)
        for r in self.rows:
            w.writerow([r.step, r.regime, repr(r.loss), r.targets, f"{r.ms:.3f}"])
        return buf.getvalue()

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


def pad_batch(sentences: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    if not sentences:
        raise TrainingError("empty batch")
    width = max(len(s) for s in sentences)
    ids = np.full((len(sentences), width), PAD, dtype=np.int64)
    for row, s in enumerate(sentences):
        ids[row, :len(s)] = s
    return ids, ids != PAD


def mlm_corrupt(ids: Sequence[int], p: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Replace each non-special position by MASK with probability ``p``.

    Returns (corrupted ids, 0/1 weights marking the replaced positions). When
    the draw selects nothing, one eligible position is forced.
    """
    if not 0 < p < 1:
        raise TrainingError(f"mlm probability must be in (0, 1), got {p}")
    ids = np.asarray(ids, dtype=np.int64)
    # UNK still stands for a word, so only the sentence frame is ineligible
    eligible = ~np.isin(ids, (PAD, START, END))
    chosen = (rng.random(ids.shape) < p) & eligible
    if not chosen.any() and eligible.any():
        positions = np.flatnonzero(eligible)
        chosen[positions[int(rng.integers(len(positions)))]] = True
    return np.where(chosen, MASK, ids), chosen.astype(np.float64)


def make_batch(sentences: Sequence[Sequence[int]], regime: MaskRegime, max_len: int = 64,
               mlm_prob: float = 0.15, rng: np.random.Generator | None = None) -> Batch:
    """Right-pad ``sentences`` and attach regime-specific inputs, targets and weights."""
    regime = MaskRegime(regime)
    for s in sentences:
        if len(s) > max_len:
            raise TrainingError(f"sentence of length {len(s)} exceeds max_len {max_len}")
    ids, valid = pad_batch(sentences)
    if regime is MaskRegime.MLM:
        if rng is None:
            raise TrainingError("mlm batches need a seeded generator")
        inputs = ids.copy()
        weights = np.zeros(ids.shape, dtype=np.float64)
        for row, s in enumerate(sentences):
            inputs[row, :len(s)], weights[row, :len(s)] = mlm_corrupt(s, mlm_prob, rng)
        targets = ids.copy()
    else:
        inputs = ids
        targets, weights = prediction_targets(regime, ids, valid)
    return Batch(ids, valid, inputs, targets, weights)


def sample_batch(corpus: Sequence[Sequence[int]], batch_size: int, rng: np.random.Generator
                 ) -> list[Sequence[int]]:
    """Uniform sampling with replacement."""
    return [corpus[int(i)] for i in rng.integers(len(corpus), size=batch_size)]


@dataclass
class StepResult:
    loss: float
    targets: int


def batch_loss(model: TransformerLM, batch: Batch, rng: np.random.Generator | None) -> nn.Tensor:
    """Weighted mean cross-entropy of a training-mode forward pass."""
    acts = model.forward(batch.inputs, training=True, rng=rng, valid=batch.valid)
    return nn.cross_entropy_logits(acts.logits, batch.targets, batch.weights)


def train_step(model: TransformerLM, batch: Batch, adam: nn.AdamConfig,
               rng: np.random.Generator | None) -> StepResult:
    """One forward/backward pass and one Adam update."""
    with nn.Graph() as graph:
        loss = batch_loss(model, batch, rng)
    nn.backward(graph, loss)
    nn.adam_step(model.parameters(), adam.lr, adam.beta1, adam.beta2, adam.eps)
    return StepResult(loss.item(), batch.num_targets)


@dataclass
class Checkpoint:
    model_config: ModelConfig
    train_config: TrainConfig | None
    vocab: Vocabulary
    params: dict[str, nn.Parameter]
    steps_done: int = 0

    @classmethod
    def from_model(cls, model: TransformerLM, vocab: Vocabulary,
                   train_config: TrainConfig | None = None, steps_done: int = 0) -> "Checkpoint":
        return cls(model.config, train_config, vocab, model.params, steps_done)

    def build_model(self) -> TransformerLM:
        model = TransformerLM.__new__(TransformerLM)
        model.config = self.model_config
        model.params = self.params
        return model


def train_loop(corpus: Sequence[Sequence[int]], model_config: ModelConfig, train_config: TrainConfig,
               vocab: Vocabulary, on_row: Callable[[LossRow], None] | None = None
               ) -> tuple[Checkpoint, LossLog]:
    """Train a fresh model on encoded sentences; returns the final checkpoint and loss log.

    Rows are logged at step 1 and at every multiple of ``log_every``.
    """
    if model_config.regime is not train_config.regime:
        raise TrainingError(f"model regime {model_config.regime.value} != train regime {train_config.regime.value}")
    if len(corpus) < train_config.batch_size:
        raise TrainingError(f"corpus has {len(corpus)} sentences, fewer than one batch of {train_config.batch_size}")
    for s in corpus:
        if len(s) < 3 or s[0] != START or s[-1] != END:
            raise TrainingError("corpus sentences must be encoded START ... END")

    seed = train_config.seed
    model = TransformerLM(model_config, seed=seed)
    batch_rng = make_rng(seed, "batches")
    mlm_rng = make_rng(seed, "mlm")
    dropout_rng = make_rng(seed, "dropout")
    adam = nn.AdamConfig(lr=train_config.lr)
    loss_log = LossLog()
    start = time.perf_counter()
    for step in range(1, train_config.steps + 1):
        batch = make_batch(sample_batch(corpus, train_config.batch_size, batch_rng),
                           model_config.regime, model_config.max_len, model_config.mlm_prob, mlm_rng)
        result = train_step(model, batch, adam, dropout_rng)
        if not math.isfinite(result.loss):
            raise NonFiniteLossError(step, result.loss)
        if step == 1 or step % train_config.log_every == 0:
            row = LossRow(step, model_config.regime.value, result.loss, result.targets,
                          (time.perf_counter() - start) * 1000.0)
            loss_log.append(row)
            log.info("step %d loss %.4f targets %d", step, row.loss, row.targets)
            if on_row is not None:
                on_row(row)
    return Checkpoint.from_model(model, vocab, train_config, train_config.steps), loss_log
