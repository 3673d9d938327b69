"""Transformer encoder with three attention-masking regimes.

* ``causal``: GPT-style lower-triangular mask, standard residual, predicts the
  next token.
* ``mlm``: no attention mask; inputs are corrupted with MASK and only the
  corrupted positions are predicted.
* ``window``: every position is blocked from attending to itself (diagonal
  mask) and the residual stream entering position ``i`` comes from position
  ``i - 1``. The query at ``i`` is also taken from the shifted stream. With
  one layer the prediction at ``i`` therefore never sees token ``i``; deeper
  layers let some of it back in through other positions' keys and values.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import nncore as nn
from .nncore import MASK_VALUE, Parameter, Tensor
from .rng import make_rng
from .tokenizer import PAD


class ModelError(ValueError):
    pass


class DegenerateSequenceError(ModelError):
    pass


class SequenceLengthError(ModelError):
    pass


class MaskRegime(str, enum.Enum):
    CAUSAL = "causal"
    WINDOW = "window"
    MLM = "mlm"


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    num_layers: int = 3
    model_dim: int = 64
    num_heads: int = 4
    ffn_dim: int = 2048
    max_len: int = 64
    dropout_rate: float = 0.2
    regime: MaskRegime = MaskRegime.WINDOW
    mlm_prob: float = 0.15

    def __post_init__(self):
        object.__setattr__(self, "regime", MaskRegime(self.regime))
        if self.model_dim % self.num_heads:
            raise ModelError(f"model_dim {self.model_dim} not divisible by num_heads {self.num_heads}")
        if self.num_layers < 1 or self.vocab_size < 6 or self.max_len < 3:
            raise ModelError(f"invalid config: {self}")
        if not 0 <= self.dropout_rate < 1:
            raise nn.ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.regime is MaskRegime.MLM and not 0 < self.mlm_prob < 1:
            raise ModelError(f"mlm regime needs 0 < mlm_prob < 1, got {self.mlm_prob}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["regime"] = self.regime.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class LayerActivations:
    embed_out: Tensor
    context_out: list[Tensor]
    final_hidden: Tensor
    output_hidden: Tensor
    logits: Tensor
    attention: list[np.ndarray] = field(default_factory=list)


def build_mask(regime: MaskRegime, n: int) -> np.ndarray:
    """Additive n x n attention mask (0 = visible, MASK_VALUE = blocked)."""
    regime = MaskRegime(regime)
    if n < 2:
        raise DegenerateSequenceError(f"sequence length must be >= 2, got {n}")
    if regime is MaskRegime.WINDOW:
        blocked = np.eye(n, dtype=bool)
    elif regime is MaskRegime.CAUSAL:
        blocked = np.triu(np.ones((n, n), dtype=bool), k=1)
    else:
        blocked = np.zeros((n, n), dtype=bool)
    return np.where(blocked, MASK_VALUE, 0.0).astype(np.float32)


def batch_mask(regime: MaskRegime, valid: np.ndarray) -> np.ndarray:
    """(B, 1, n, n) mask: regime mask plus blocked PAD keys."""
    n = valid.shape[1]
    base = build_mask(regime, n) < 0
    blocked = base[None, :, :] | ~valid[:, None, :]
    return np.where(blocked, MASK_VALUE, 0.0).astype(np.float32)[:, None, :, :]


def shift_rows(x: Tensor) -> Tensor:
    """Row i takes row i-1; row 0 keeps itself."""
    n = x.shape[-2]
    return nn.take(x, np.concatenate([[0], np.arange(n - 1)]), axis=-2)


def attention_layer(x: Tensor, mask: np.ndarray, p: dict, num_heads: int,
                    query: Tensor | None = None) -> tuple[Tensor, np.ndarray]:
    """Multi-head scaled dot-product attention over (B, n, d) input.

    ``query`` defaults to ``x``. Returns the projected output and the
    (B, heads, n, n) attention weights.
    """
    b, n, d = x.shape
    dh = d // num_heads
    q_in = x if query is None else query

    def heads(t):
        return nn.transpose(nn.reshape(t, (b, n, num_heads, dh)), (0, 2, 1, 3))

    q = heads(q_in @ p["wq"] + p["bq"])
    k = heads(x @ p["wk"] + p["bk"])
    v = heads(x @ p["wv"] + p["bv"])
    scores = nn.scale(q @ nn.transpose(k, (0, 1, 3, 2)), 1.0 / math.sqrt(dh))
    weights = nn.softmax_rows(scores, mask)
    ctx = nn.reshape(nn.transpose(weights @ v, (0, 2, 1, 3)), (b, n, d))
    return ctx @ p["wo"] + p["bo"], weights.data


def shifted_residual_combine(attn_out: Tensor, resid_in: Tensor, p: dict) -> Tensor:
    """LayerNorm(Linear_2d->d(concat(attn_out[i], resid_in[i-1])))."""
    if attn_out.shape != resid_in.shape:
        raise nn.ShapeError(f"combine: {attn_out.shape} vs {resid_in.shape}")
    joined = nn.concat([attn_out, shift_rows(resid_in)], axis=-1)
    return nn.layer_norm(joined @ p["wc"] + p["bc"], p["ln1_g"], p["ln1_b"])


def standard_residual_combine(attn_out: Tensor, resid_in: Tensor, p: dict) -> Tensor:
    return nn.layer_norm(resid_in + attn_out, p["ln1_g"], p["ln1_b"])


class TransformerLM:
    """Encoder stack + tied output head for one masking regime."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.params: dict[str, Parameter] = {}
        rng = make_rng(seed, "init")
        d, f, v = config.model_dim, config.ffn_dim, config.vocab_size

        def normal(name, shape, std):
            self.params[name] = Parameter(rng.normal(0.0, std, size=shape), name=name)

        def const(name, shape, value):
            self.params[name] = Parameter(np.full(shape, value), name=name)

        normal("tok_emb", (v, d), d ** -0.5)
        normal("pos_emb", (config.max_len, d), d ** -0.5)
        for layer in range(config.num_layers):
            pre = f"l{layer}."
            for m in ("q", "k", "v", "o"):
                normal(pre + "w" + m, (d, d), d ** -0.5)
                const(pre + "b" + m, (d,), 0.0)
            if config.regime is MaskRegime.WINDOW:
                normal(pre + "wc", (2 * d, d), (2 * d) ** -0.5)
                const(pre + "bc", (d,), 0.0)
            const(pre + "ln1_g", (d,), 1.0)
            const(pre + "ln1_b", (d,), 0.0)
            normal(pre + "w1", (d, f), d ** -0.5)
            const(pre + "b1", (f,), 0.0)
            normal(pre + "w2", (f, d), f ** -0.5)
            const(pre + "b2", (d,), 0.0)
            const(pre + "ln2_g", (d,), 1.0)
            const(pre + "ln2_b", (d,), 0.0)
        normal("head_w", (d, d), d ** -0.5)
        const("head_b", (d,), 0.0)
        const("head_ln_g", (d,), 1.0)
        const("head_ln_b", (d,), 0.0)
        const("out_b", (v,), 0.0)

    @property
    def regime(self) -> MaskRegime:
        return self.config.regime

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def layer_params(self, layer: int) -> dict[str, Parameter]:
        pre = f"l{layer}."
        return {k[len(pre):]: p for k, p in self.params.items() if k.startswith(pre)}

    def forward(self, ids, training: bool = False, rng: np.random.Generator | None = None,
                valid: np.ndarray | None = None, embed_offset: np.ndarray | None = None
                ) -> LayerActivations:
        """Run the stack on ``ids`` of shape (n,) or (B, n).

        ``valid`` marks real (non-PAD) positions; it defaults to ``ids != PAD``.
        ``embed_offset`` is added to the embedding output (used by the
        sensitivity probes). 1-D input yields tensors without the batch axis.
        """
        ids = np.asarray(ids, dtype=np.int64)
        single = ids.ndim == 1
        if single:
            ids = ids[None, :]
            if embed_offset is not None:
                embed_offset = np.asarray(embed_offset)[None]
        b, n = ids.shape
        if n > self.config.max_len:
            raise SequenceLengthError(f"sequence length {n} exceeds max_len {self.config.max_len}")
        if valid is None:
            valid = ids != PAD
        cfg = self.config
        p = self.params
        rate = cfg.dropout_rate

        x = nn.embedding(p["tok_emb"], ids) + nn.take(p["pos_emb"], np.arange(n), axis=0)
        if embed_offset is not None:
            x = x + Tensor(np.asarray(embed_offset, dtype=x.data.dtype))
        embed_out = x
        x = nn.dropout(x, rate, training, rng)
        mask = batch_mask(cfg.regime, valid)

        contexts, attn_maps = [], []
        for layer in range(cfg.num_layers):
            lp = self.layer_params(layer)
            if cfg.regime is MaskRegime.WINDOW:
                attn, w = attention_layer(x, mask, lp, cfg.num_heads, query=shift_rows(x))
                attn = nn.dropout(attn, rate, training, rng)
                h = shifted_residual_combine(attn, x, lp)
            else:
                attn, w = attention_layer(x, mask, lp, cfg.num_heads)
                attn = nn.dropout(attn, rate, training, rng)
                h = standard_residual_combine(attn, x, lp)
            ff = nn.relu(h @ lp["w1"] + lp["b1"]) @ lp["w2"] + lp["b2"]
            ff = nn.dropout(ff, rate, training, rng)
            x = nn.layer_norm(h + ff, lp["ln2_g"], lp["ln2_b"])
            contexts.append(x)
            attn_maps.append(w)

        z = nn.relu(x @ p["head_w"] + p["head_b"])
        z = nn.layer_norm(z, p["head_ln_g"], p["head_ln_b"])
        logits = z @ nn.transpose(p["tok_emb"], (1, 0)) + p["out_b"]

        acts = LayerActivations(embed_out, contexts, x, z, logits, attn_maps)
        if single:
            acts = _drop_batch(acts)
        return acts


def _drop_batch(acts: LayerActivations) -> LayerActivations:
    def sq(t: Tensor) -> Tensor:
        return nn.reshape(t, t.shape[1:])

    contexts = [sq(c) for c in acts.context_out]
    return LayerActivations(sq(acts.embed_out), contexts, contexts[-1], sq(acts.output_hidden),
                            sq(acts.logits), [w[0] for w in acts.attention])


def prediction_targets(regime: MaskRegime, ids: np.ndarray, valid: np.ndarray | None = None
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Targets and 0/1 loss weights for the causal and window objectives.

    causal: position i predicts ids[i+1] for every real i with a real successor.
    window: position i predicts ids[i] for every real i >= 1 (START excluded).
    """
    regime = MaskRegime(regime)
    ids = np.asarray(ids, dtype=np.int64)
    if valid is None:
        valid = ids != PAD
    weights = np.zeros(ids.shape, dtype=np.float64)
    if regime is MaskRegime.CAUSAL:
        targets = np.zeros_like(ids)
        targets[..., :-1] = ids[..., 1:]
        weights[..., :-1] = valid[..., 1:]
    elif regime is MaskRegime.WINDOW:
        targets = ids.copy()
        weights[..., 1:] = valid[..., 1:]
    else:
        raise ModelError("mlm targets come from input corruption, not from the sequence")
    return targets, weights
