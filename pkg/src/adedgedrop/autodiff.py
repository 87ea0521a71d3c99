"""Define-by-run reverse-mode autodiff over dense float64 matrices.

Everything is 2-D (scalars are 1x1). Ops are free functions taking the tape
first; pass ``tape=None`` for inference-mode forwards that record nothing.
The op set is exactly what two-layer GCNs and their losses need.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, ShapeError
from .sparse import CsrMatrix

LOG_FLOOR = 1e-12


class Tensor:
    """Dense matrix with an optional gradient accumulator."""

    __slots__ = ("values", "requires_grad", "grad")

    def __init__(self, values, requires_grad: bool = False):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError("tensors are 2-D")
        if not np.isfinite(arr).all():
            raise ContractError("non-finite tensor values")
        self.values = arr
        self.requires_grad = requires_grad
        self.grad = None

    @property
    def shape(self):
        return self.values.shape

    def item(self) -> float:
        if self.values.size != 1:
            raise ContractError("item() on a non-scalar tensor")
        return float(self.values[0, 0])

    def accumulate_grad(self, g: np.ndarray) -> None:
        if g.shape != self.values.shape:
            raise ShapeError("gradient shape mismatch")
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None


class Parameter(Tensor):
    """Named trainable tensor; carries optimizer moment buffers."""

    __slots__ = ("name", "adam_m", "adam_v", "adam_t")

    def __init__(self, values, name: str):
        super().__init__(values, requires_grad=True)
        self.name = name
        self.adam_m = None
        self.adam_v = None
        self.adam_t = 0


class _Node:
    __slots__ = ("out", "inputs", "vjp")

    def __init__(self, out, inputs, vjp):
        self.out = out
        self.inputs = inputs
        self.vjp = vjp


class Tape:
    """Ordered record of executed ops; backward walks it in reverse."""

    def __init__(self):
        self.nodes: list[_Node] = []

    def record(self, out, inputs, vjp) -> None:
        self.nodes.append(_Node(out, inputs, vjp))


def _finish(tape, out_values, inputs, vjp) -> Tensor:
    """Wrap op output; record on the tape when any input needs gradients."""
    needs = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(out_values, requires_grad=needs)
    if needs:
        tape.record(out, inputs, vjp)
    return out


def matmul(tape, a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul {a.shape} x {b.shape}")
    av, bv = a.values, b.values

    def vjp(up):
        return up @ bv.T, av.T @ up

    return _finish(tape, av @ bv, (a, b), vjp)


def spmm(tape, sparse: CsrMatrix, dense: Tensor) -> Tensor:
    """Sparse @ dense; the sparse operand is a constant."""
    out_values = sparse.matmul(dense.values)

    def vjp(up):
        g = np.zeros_like(dense.values)
        sparse.t_matmul_add(up, g)
        return (g,)

    return _finish(tape, out_values, (dense,), vjp)


def add(tape, a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add; b may be a (1, m) row bias."""
    if a.shape == b.shape:
        def vjp(up):
            return up, up
    elif b.shape == (1, a.shape[1]):
        def vjp(up):
            return up, up.sum(axis=0, keepdims=True)
    else:
        raise ShapeError(f"add {a.shape} + {b.shape}")
    return _finish(tape, a.values + b.values, (a, b), vjp)


def mul(tape, a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mul {a.shape} * {b.shape}")
    av, bv = a.values, b.values

    def vjp(up):
        return up * bv, up * av

    return _finish(tape, av * bv, (a, b), vjp)


def relu(tape, a: Tensor) -> Tensor:
    mask = a.values > 0.0

    def vjp(up):
        return (up * mask,)

    return _finish(tape, np.where(mask, a.values, 0.0), (a,), vjp)


def sigmoid(tape, a: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-a.values))

    def vjp(up):
        return (up * s * (1.0 - s),)

    return _finish(tape, s, (a,), vjp)


def row_softmax(tape, a: Tensor) -> Tensor:
    shifted = a.values - a.values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=1, keepdims=True)

    def vjp(up):
        dot = (up * s).sum(axis=1, keepdims=True)
        return (s * (up - dot),)

    return _finish(tape, s, (a,), vjp)


def gather(tape, a: Tensor, rows, cols) -> Tensor:
    """Pick entries (rows[k], cols[k]) into a column vector."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    if rows.shape != cols.shape or rows.ndim != 1:
        raise ShapeError("gather indices must be matching 1-D arrays")
    picked = a.values[rows, cols].reshape(-1, 1)

    def vjp(up):
        g = np.zeros_like(a.values)
        np.add.at(g, (rows, cols), up[:, 0])
        return (g,)

    return _finish(tape, picked, (a,), vjp)


def log(tape, a: Tensor, floor: float = LOG_FLOOR) -> Tensor:
    """ln(max(a, floor)); entries at/below the floor get zero gradient."""
    clamped = np.maximum(a.values, floor)
    above = a.values > floor

    def vjp(up):
        return (np.where(above, up / clamped, 0.0),)

    return _finish(tape, np.log(clamped), (a,), vjp)


def sum_all(tape, a: Tensor) -> Tensor:
    shape = a.shape

    def vjp(up):
        return (np.full(shape, up[0, 0]),)

    return _finish(tape, a.values.sum().reshape(1, 1), (a,), vjp)


def scale(tape, a: Tensor, factor: float) -> Tensor:
    def vjp(up):
        return (up * factor,)

    return _finish(tape, a.values * factor, (a,), vjp)


def backward(tape: Tape, loss: Tensor) -> None:
    """Populate .grad on every requires_grad tensor reachable from loss.

    Repeated calls accumulate. Traversal follows exact reverse execution
    order and visits each recorded node once, so grads are deterministic.
    """
    if loss.values.shape != (1, 1):
        raise ContractError("backward requires a scalar loss")
    if not loss.requires_grad:
        raise ContractError("loss is not connected to any parameter")
    seed = np.ones((1, 1), dtype=np.float64)
    loss.accumulate_grad(seed)
    pending: dict[int, np.ndarray] = {id(loss): seed}
    for node in reversed(tape.nodes):
        up = pending.pop(id(node.out), None)
        if up is None:
            continue
        grads = node.vjp(up)
        for tensor, g in zip(node.inputs, grads):
            if g is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            if key in pending:
                pending[key] = pending[key] + g
            else:
                pending[key] = g
            tensor.accumulate_grad(np.asarray(g))


def zero_grads(params) -> None:
    for p in params:
        p.zero_grad()


def sgd_step(params, lr: float) -> None:
    """Plain gradient step: p <- p - lr * p.grad, then zero grads."""
    for p in params:
        if p.grad is None:
            raise ContractError(f"parameter {p.name!r} has no gradient")
    for p in params:
        p.values -= lr * p.grad
        p.zero_grad()


def adam_step(params, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """Adaptive step with standard defaults, then zero grads."""
    for p in params:
        if p.grad is None:
            raise ContractError(f"parameter {p.name!r} has no gradient")
    for p in params:
        if p.adam_m is None:
            p.adam_m = np.zeros_like(p.values)
            p.adam_v = np.zeros_like(p.values)
        p.adam_t += 1
        p.adam_m = beta1 * p.adam_m + (1.0 - beta1) * p.grad
        p.adam_v = beta2 * p.adam_v + (1.0 - beta2) * p.grad * p.grad
        m_hat = p.adam_m / (1.0 - beta1 ** p.adam_t)
        v_hat = p.adam_v / (1.0 - beta2 ** p.adam_t)
        p.values -= lr * m_hat / (np.sqrt(v_hat) + eps)
        p.zero_grad()
