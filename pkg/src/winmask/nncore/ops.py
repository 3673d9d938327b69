"""Differentiable primitives.

Each op computes its forward value with numpy and, when a tape is active and
an input requires grad, records a closure mapping the output adjoint to the
input adjoints. Leading batch axes are supported where the model needs them;
there is no general broadcasting beyond bias-style trailing-axis adds.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ContractError, DegenerateRowError, NoSignalError, ShapeError
from .tensor import Tensor, get_dtype, record

# Additive sentinel for masked attention scores; exp() of it underflows to 0.
MASK_VALUE = -1e9


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=get_dtype()))


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: cannot multiply shapes {a.shape} and {b.shape}")
    out = a.data @ b.data

    def grad(g):
        ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape) if a.requires_grad else None
        gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape) if b.requires_grad else None
        return ga, gb

    return record("matmul", out, (a, b), grad)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.data + b.data
    except ValueError as exc:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} do not broadcast") from exc
    return record("add", out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.data * b.data
    except ValueError as exc:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} do not broadcast") from exc

    def grad(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return record("mul", out, (a, b), grad)


def scale(x: Tensor, c: float) -> Tensor:
    c = x.data.dtype.type(c)
    return record("scale", x.data * c, (x,), lambda g: (g * c,))


def relu(x: Tensor) -> Tensor:
    pos = x.data > 0
    return record("relu", np.where(pos, x.data, 0).astype(x.data.dtype), (x,), lambda g: (g * pos,))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return record("tanh", y, (x,), lambda g: (g * (1 - y * y),))


def total(x: Tensor) -> Tensor:
    """Sum of all elements, as a 0-d tensor."""
    return record("sum", np.asarray(x.data.sum(), dtype=x.data.dtype), (x,),
                  lambda g: (np.broadcast_to(g, x.shape).astype(x.data.dtype),))


def reshape(x: Tensor, shape) -> Tensor:
    return record("reshape", x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes) -> Tensor:
    inverse = np.argsort(axes)
    return record("transpose", np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),))


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def grad(g):
        return tuple(np.split(g, bounds, axis=axis))

    return record("concat", out, tensors, grad)


def take(x: Tensor, index, axis: int) -> Tensor:
    """Gather slices of ``x`` along ``axis`` (repeats allowed)."""
    index = np.asarray(index, dtype=np.int64)
    out = np.take(x.data, index, axis=axis)

    def grad(g):
        gx = np.zeros_like(x.data)
        np.add.at(np.moveaxis(gx, axis, 0), index, np.moveaxis(g, axis, 0))
        return (gx,)

    return record("take", out, (x,), grad)


def embedding(table: Tensor, ids) -> Tensor:
    """Rows of ``table`` selected by integer ``ids`` (any shape)."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError(f"embedding: ids outside [0, {table.shape[0]})")
    out = table.data[ids]

    def grad(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        return (gt,)

    return record("embedding", out, (table,), grad)


def softmax_rows(scores: Tensor, mask) -> Tensor:
    """Softmax over the last axis of ``scores + mask``.

    ``mask`` is a constant additive array of 0 / MASK_VALUE entries that
    broadcasts against ``scores``. Masked entries come out exactly 0.
    """
    scores = _as_tensor(scores)
    mask = np.asarray(mask, dtype=scores.data.dtype)
    keep = mask > MASK_VALUE / 2
    if not keep.any(axis=-1).all():
        raise DegenerateRowError("softmax_rows: a row is fully masked (mask construction bug)")
    s = scores.data + mask
    s = s - s.max(axis=-1, keepdims=True)
    e = np.exp(s) * keep
    y = e / e.sum(axis=-1, keepdims=True)

    def grad(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return record("softmax_rows", y, (scores,), grad)


def log_softmax(x: Tensor) -> Tensor:
    s = x.data - x.data.max(axis=-1, keepdims=True)
    out = s - np.log(np.exp(s).sum(axis=-1, keepdims=True))
    p = np.exp(out)
    return record("log_softmax", out, (x,), lambda g: (g - p * g.sum(axis=-1, keepdims=True),))


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit population variance."""
    d = x.shape[-1]
    if d < 2:
        raise ShapeError(f"layer_norm: feature dim must be >= 2, got {d}")
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm: gain {gain.shape} / bias {bias.shape} vs features {d}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = (xc * inv).astype(x.data.dtype)
    out = xhat * gain.data + bias.data

    def grad(g):
        gx = g * gain.data
        dx = inv * (gx - gx.mean(axis=-1, keepdims=True)
                    - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
        lead = tuple(range(g.ndim - 1))
        return dx.astype(x.data.dtype), (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return record("layer_norm", out, (x, gain, bias), grad)


def cross_entropy_logits(logits: Tensor, targets, weights) -> Tensor:
    """Weighted mean of -log softmax(logits)[target] over positions.

    ``targets`` and ``weights`` have the shape of ``logits`` minus its last
    axis. The reduction is carried out in float64.
    """
    targets = np.asarray(targets, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    lead = logits.shape[:-1]
    if targets.shape != lead or weights.shape != lead:
        raise ShapeError(f"cross_entropy: logits {logits.shape}, targets {targets.shape}, weights {weights.shape}")
    denom = weights.sum()
    if denom <= 0:
        raise NoSignalError("cross_entropy: every position weight is zero")
    vocab = logits.shape[-1]
    live = weights > 0
    if np.any(targets[live] >= vocab) or np.any(targets[live] < 0):
        raise ContractError(f"cross_entropy: target id outside [0, {vocab})")
    safe_t = np.where(live, targets, 0)

    z = logits.data.astype(np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    picked = np.take_along_axis(logp, safe_t[..., None], axis=-1)[..., 0]
    loss = -(weights * picked).sum() / denom

    def grad(g):
        p = np.exp(logp)
        np.put_along_axis(p, safe_t[..., None], np.take_along_axis(p, safe_t[..., None], axis=-1) - 1.0, axis=-1)
        return ((p * (weights / denom)[..., None] * float(g)).astype(logits.data.dtype),)

    return record("cross_entropy", np.asarray(loss, dtype=logits.data.dtype), (logits,), grad)


def dropout(x: Tensor, rate: float, training: bool, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; identity outside training or at rate 0."""
    if not 0 <= rate < 1:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0:
        return x
    if rng is None:
        raise ConfigError("dropout in training mode needs a seeded generator")
    keep = (rng.random(x.shape) >= rate).astype(x.data.dtype) / x.data.dtype.type(1 - rate)
    return record("dropout", x.data * keep, (x,), lambda g: (g * keep,))
