"""Reference computations that share no code with the package under test."""

from __future__ import annotations

import contextlib
import math

import numpy as np


def central_difference(fn, tensor, h=1e-3, indices=None):
    """d fn() / d tensor.data by central differences, at the given flat indices."""
    flat = tensor.data.reshape(-1)
    if indices is None:
        indices = range(flat.size)
    out = {}
    for i in indices:
        orig = flat[i]
        flat[i] = orig + h
        up = float(fn())
        flat[i] = orig - h
        down = float(fn())
        flat[i] = orig
        out[i] = (up - down) / (2 * h)
    return out


@contextlib.contextmanager
def relu_signs():
    """Record the active/inactive pattern of every relu call made inside the block."""
    from winmask import nncore

    patterns = []
    original = nncore.relu

    def recording(x):
        patterns.append(x.data > 0)
        return original(x)

    nncore.relu = recording
    try:
        yield patterns
    finally:
        nncore.relu = original


def central_difference_kinks(fn, tensor, h=1e-3):
    """Central differences plus the flat indices whose +-h probes flip some relu."""
    flat = tensor.data.reshape(-1)
    numeric, kinked = {}, set()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        with relu_signs() as up_signs:
            up = float(fn())
        flat[i] = orig - h
        with relu_signs() as down_signs:
            down = float(fn())
        flat[i] = orig
        numeric[i] = (up - down) / (2 * h)
        if any(not np.array_equal(a, b) for a, b in zip(up_signs, down_signs)):
            kinked.add(i)
    return numeric, kinked


def grads_close(analytic, numeric, rtol=1e-2, atol=1e-4):
    """Elementwise |a - n| <= atol + rtol * |n| over the sampled indices."""
    bad = []
    for i, n in numeric.items():
        a = float(analytic.reshape(-1)[i])
        if abs(a - n) > atol + rtol * abs(n):
            bad.append((i, a, n))
    return bad


def brute_pearson(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    num = sum((a - mx) * (b - my) for a, b in zip(x, y))
    dx = math.sqrt(sum((a - mx) ** 2 for a in x))
    dy = math.sqrt(sum((b - my) ** 2 for b in y))
    return num / (dx * dy)


def brute_cosine(u, v):
    dot = sum(a * b for a, b in zip(u, v))
    return dot / (math.sqrt(sum(a * a for a in u)) * math.sqrt(sum(b * b for b in v)))


def brute_confusion(t, p):
    cm = [[0, 0], [0, 0]]
    for a, b in zip(t, p):
        cm[a][b] += 1
    return cm


def _count_ngrams(tokens, n):
    grams = []
    for i in range(len(tokens) - n + 1):
        grams.append(" ".join(tokens[i:i + n]))
    counts = {}
    for g in grams:
        counts[g] = counts.get(g, 0) + 1
    return counts, len(grams)


def brute_bleu(cands, refs, max_order=4, eps=1e-9):
    """Corpus BLEU with the same smoothing conventions, written longhand."""
    match = [0] * max_order
    total = [0] * max_order
    c_len = r_len = 0
    for c, r in zip(cands, refs):
        ct, rt = c.split(), r.split()
        c_len += len(ct)
        r_len += len(rt)
        for n in range(1, max_order + 1):
            cc, cnt = _count_ngrams(ct, n)
            rc, _ = _count_ngrams(rt, n)
            total[n - 1] += cnt
            for g, k in cc.items():
                match[n - 1] += min(k, rc.get(g, 0))
    if c_len == 0:
        return 1.0 if r_len == 0 else 0.0
    if match[0] == 0:
        return 0.0
    log_sum, orders = 0.0, 0
    for n in range(max_order):
        if total[n] == 0:
            continue
        num = match[n] if match[n] else eps
        log_sum += math.log(num / total[n])
        orders += 1
    bp = 1.0 if c_len > r_len else math.exp(1 - r_len / c_len)
    return bp * math.exp(log_sum / orders)


def numpy_reference_attention(x, wq, wk, wv, wo, mask, heads, query=None):
    """Plain-numpy multi-head attention without biases, for one sequence."""
    n, d = x.shape
    dh = d // heads
    q_src = x if query is None else query
    q, k, v = q_src @ wq, x @ wk, x @ wv
    out = np.zeros((n, d))
    for h in range(heads):
        sl = slice(h * dh, (h + 1) * dh)
        s = q[:, sl] @ k[:, sl].T / math.sqrt(dh) + mask
        s = s - s.max(axis=1, keepdims=True)
        w = np.exp(s)
        w /= w.sum(axis=1, keepdims=True)
        out[:, sl] = w @ v[:, sl]
    return out @ wo
