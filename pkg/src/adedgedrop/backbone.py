"""Two-layer GCN classifier and its masked cross-entropy loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ContractError
from .graphs import LabelSplit
from .sparse import CsrMatrix


@dataclass
class GcnParams:
    """Weights of a two-layer graph convolution stack (no biases)."""

    w1: ad.Parameter
    w2: ad.Parameter
    hidden: int

    def parameters(self) -> list[ad.Parameter]:
        return [self.w1, self.w2]

    def copy_values(self) -> tuple[np.ndarray, np.ndarray]:
        return self.w1.values.copy(), self.w2.values.copy()

    def load_values(self, snapshot) -> None:
        w1, w2 = snapshot
        self.w1.values[...] = w1
        self.w2.values[...] = w2


def glorot_uniform(rng: np.random.Generator, fan_in: int,
                   fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_gcn_params(in_dim: int, hidden: int, out_dim: int,
                    rng: np.random.Generator, prefix: str) -> GcnParams:
    """Seeded Glorot-uniform initialization."""
    return GcnParams(
        w1=ad.Parameter(glorot_uniform(rng, in_dim, hidden), f"{prefix}.w1"),
        w2=ad.Parameter(glorot_uniform(rng, hidden, out_dim), f"{prefix}.w2"),
        hidden=hidden,
    )


def gcn_forward(tape, params: GcnParams, x: np.ndarray,
                prop: CsrMatrix) -> ad.Tensor:
    """logits = prop @ relu(prop @ x @ W1) @ W2."""
    x_t = ad.Tensor(x)
    h = ad.spmm(tape, prop, ad.matmul(tape, x_t, params.w1))
    h = ad.relu(tape, h)
    return ad.matmul(tape, ad.spmm(tape, prop, h), params.w2)


def classification_loss(tape, logits: ad.Tensor,
                        labels: LabelSplit) -> ad.Tensor:
    """Summed (unaveraged) cross entropy over the training nodes."""
    train_idx = np.nonzero(labels.train_mask)[0]
    if train_idx.size == 0:
        raise ContractError("training mask is empty")
    probs = ad.row_softmax(tape, logits)
    picked = ad.gather(tape, probs, train_idx, labels.labels[train_idx])
    return ad.scale(tape, ad.sum_all(tape, ad.log(tape, picked)), -1.0)


def accuracy(logits: np.ndarray, labels: LabelSplit, which: str) -> float:
    """Fraction of masked nodes classified correctly (argmax, ties to the
    lowest class index)."""
    mask = labels.mask(which)
    idx = np.nonzero(mask)[0]
    if idx.size == 0:
        raise ContractError(f"{which} mask is empty")
    pred = np.argmax(logits[idx], axis=1)
    return float(np.mean(pred == labels.labels[idx]))
