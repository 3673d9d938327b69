"""Tensor, Parameter and the recording tape used for reverse-mode autodiff."""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, ShapeError

_DTYPE = [np.float32]


def get_dtype():
    return _DTYPE[-1]


@contextlib.contextmanager
def precision(dtype):
    """Temporarily change the dtype of newly created tensors.

    The library runs in float32; float64 exists for finite-difference checks.
    """
    _DTYPE.append(np.dtype(dtype).type)
    try:
        yield
    finally:
        _DTYPE.pop()


class Tensor:
    """Dense array plus an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        # float arrays keep their dtype (op outputs); everything else is cast
        if isinstance(data, np.ndarray) and data.dtype.kind == "f":
            self.data = data
        else:
            self.data = np.asarray(data, dtype=get_dtype())
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # Operator sugar; the implementations live in ops.
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)


class Parameter(Tensor):
    """Trainable tensor carrying its own Adam moments."""

    __slots__ = ("adam_m", "adam_v", "step_count")

    def __init__(self, data, name: str | None = None):
        super().__init__(np.array(data, dtype=get_dtype()), requires_grad=True, name=name)
        self.adam_m = np.zeros_like(self.data)
        self.adam_v = np.zeros_like(self.data)
        self.step_count = 0


class Node:
    __slots__ = ("out", "inputs", "backward_fn", "op")

    def __init__(self, op: str, out: Tensor, inputs: Sequence[Tensor], backward_fn: Callable):
        self.op = op
        self.out = out
        self.inputs = tuple(inputs)
        self.backward_fn = backward_fn


_ACTIVE: list["Graph"] = []


class Graph:
    """Tape of primitive operations, in recording order.

    Operations executed inside ``with Graph() as g:`` whose inputs require
    gradients are appended to ``g.nodes``. Outside any graph nothing is
    recorded, which is how inference runs.
    """

    def __init__(self):
        self.nodes: list[Node] = []

    def __enter__(self) -> "Graph":
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE.pop()

    def __len__(self) -> int:
        return len(self.nodes)


def active_graph() -> Graph | None:
    return _ACTIVE[-1] if _ACTIVE else None


def record(op: str, out_data: np.ndarray, inputs: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    """Wrap ``out_data`` and register it on the active tape when needed."""
    graph = active_graph()
    needs = graph is not None and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=needs)
    if needs:
        graph.nodes.append(Node(op, out, inputs, backward_fn))
    return out


def backward(graph: Graph, loss: Tensor) -> list[int]:
    """Propagate d(loss)/d(leaf) through ``graph``.

    Leaf tensors that require grad (Parameters, or tensors created with
    ``requires_grad=True``) get their ``grad`` accumulated. Returns the node
    indices in the order they were visited, which is always the exact reverse
    of the recording order.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    produced = {id(node.out) for node in graph.nodes}
    leaves: dict[int, Tensor] = {}
    visited = []
    for idx in range(len(graph.nodes) - 1, -1, -1):
        node = graph.nodes[idx]
        visited.append(idx)
        g_out = grads.pop(id(node.out), None)
        if g_out is None:
            continue
        in_grads = node.backward_fn(g_out)
        for tensor, g in zip(node.inputs, in_grads):
            if g is None or not tensor.requires_grad:
                continue
            if g.shape != tensor.shape:
                raise ShapeError(
                    f"{node.op}: gradient shape {g.shape} != input shape {tensor.shape}"
                )
            key = id(tensor)
            if key in grads:
                grads[key] = grads[key] + g
            else:
                grads[key] = g
            if key not in produced:
                leaves[key] = tensor
    for key, tensor in leaves.items():
        g = grads[key].astype(tensor.data.dtype, copy=False)
        tensor.grad = g if tensor.grad is None else tensor.grad + g
    return visited
