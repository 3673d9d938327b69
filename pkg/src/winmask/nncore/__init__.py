"""Small float32 tensor library with tape-based reverse-mode autodiff."""

from .errors import (
    ConfigError,
    ContractError,
    DegenerateRowError,
    NNCoreError,
    NoSignalError,
    ShapeError,
    UnsteppedParameterError,
)
from .ops import (
    MASK_VALUE,
    add,
    concat,
    cross_entropy_logits,
    dropout,
    embedding,
    layer_norm,
    log_softmax,
    matmul,
    mul,
    relu,
    reshape,
    scale,
    softmax_rows,
    take,
    tanh,
    total,
    transpose,
)
from .optim import AdamConfig, adam_step
from .tensor import Graph, Parameter, Tensor, backward, get_dtype, precision

__all__ = [
    "MASK_VALUE", "AdamConfig", "ConfigError", "ContractError", "DegenerateRowError",
    "Graph", "NNCoreError", "NoSignalError", "Parameter", "ShapeError", "Tensor",
    "UnsteppedParameterError", "adam_step", "add", "backward", "concat",
    "cross_entropy_logits", "dropout", "embedding", "get_dtype", "layer_norm",
    "log_softmax", "matmul", "mul", "precision", "relu", "reshape", "scale",
    "softmax_rows", "take", "tanh", "total", "transpose",
]
