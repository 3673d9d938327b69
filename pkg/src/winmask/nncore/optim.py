from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import UnsteppedParameterError
from .tensor import Parameter


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: Iterable[Parameter], lr: float = 1e-4, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> None:
    """Bias-corrected Adam update; clears each gradient afterwards."""
    params = list(params)
    missing = [p.name or repr(p) for p in params if p.grad is None]
    if missing:
        raise UnsteppedParameterError(f"no gradient for: {', '.join(missing)}")
    for p in params:
        dt = p.data.dtype.type
        g = p.grad
        p.step_count += 1
        t = p.step_count
        p.adam_m = (dt(beta1) * p.adam_m + dt(1 - beta1) * g).astype(p.data.dtype)
        p.adam_v = (dt(beta2) * p.adam_v + dt(1 - beta2) * g * g).astype(p.data.dtype)
        m_hat = p.adam_m / dt(1 - beta1 ** t)
        v_hat = p.adam_v / dt(1 - beta2 ** t)
        p.data = (p.data - dt(lr) * m_hat / (np.sqrt(v_hat) + dt(eps))).astype(p.data.dtype)
        p.grad = None
