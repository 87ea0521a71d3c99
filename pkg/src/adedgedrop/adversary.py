"""The adversarial edge predictor and its perturbation machinery.

The predictor is the same two-layer GCN run over the line graph, emitting a
keep/drop logit pair per edge; a trainable offset bounded in l-infinity is
added to its output to make the supervision loss adversarial. Gradients
never flow through the discrete mask: edge decisions are taken on detached
probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .backbone import GcnParams, gcn_forward, init_gcn_params
from .errors import ContractError
from .graphs import Graph
from .sparse import CsrMatrix, csr_from_coo

# column of the keep/drop logit pair holding the keep probability
KEEP_COL = 0


@dataclass
class Perturbation:
    """Additive offset on the predictor output, kept inside the eps-ball."""

    tensor: ad.Tensor
    epsilon: float

    @property
    def values(self) -> np.ndarray:
        return self.tensor.values


@dataclass(frozen=True)
class EdgeMask:
    """Binary keep decision per edge."""

    values: np.ndarray   # (E,) uint8

    @property
    def keep_count(self) -> int:
        return int(self.values.sum())


@dataclass(frozen=True)
class CorruptedAdjacency:
    """Masked adjacency, tagged with the epoch/step that produced it."""

    adjacency: CsrMatrix
    epoch: int
    step: int


def init_edge_predictor(num_classes: int, hidden: int,
                        rng: np.random.Generator) -> GcnParams:
    """Predictor weights: input 2c, hidden h, output 2 (keep/drop)."""
    return init_gcn_params(2 * num_classes, hidden, 2, rng, prefix="omega")


def init_perturbation(shape: tuple[int, int], epsilon: float,
                      seed: int) -> Perturbation:
    """Uniform draw from the eps-ball, seeded."""
    if epsilon < 0.0:
        raise ContractError(f"epsilon must be non-negative, got {epsilon}")
    rng = np.random.default_rng(seed)
    values = rng.uniform(-epsilon, epsilon, size=shape) if epsilon > 0.0 \
        else np.zeros(shape)
    return Perturbation(tensor=ad.Tensor(values, requires_grad=True),
                        epsilon=float(epsilon))


def predict_edges(tape, omega: GcnParams, x_lg: np.ndarray,
                  a_lg_prop: CsrMatrix, delta: Perturbation) -> ad.Tensor:
    """Z_lg = GCN(X_lg, A_lg) + delta."""
    logits = gcn_forward(tape, omega, x_lg, a_lg_prop)
    return ad.add(tape, logits, delta.tensor)


def keep_probabilities(z_lg_values: np.ndarray) -> np.ndarray:
    """Softmax keep-column of the (detached) predictor output."""
    shifted = z_lg_values - z_lg_values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e[:, KEEP_COL] / e.sum(axis=1)


def compute_mask(keep_prob: np.ndarray, mu: float) -> EdgeMask:
    """c_p = 1 iff keep_prob_p >= mu (boundary inclusive)."""
    if not 0.0 <= mu <= 1.0:
        raise ContractError(f"mu must lie in [0, 1], got {mu}")
    return EdgeMask(values=(keep_prob >= mu).astype(np.uint8))


def corrupt_adjacency(g: Graph, mask: EdgeMask, epoch: int = 0,
                      step: int = 0) -> CorruptedAdjacency:
    """Keep both directed entries of edge p iff the mask keeps p."""
    if mask.values.shape[0] != g.num_edges:
        raise ContractError("mask length does not match edge count")
    kept = g.edges[mask.values.astype(bool)]
    rows = np.concatenate([kept[:, 0], kept[:, 1]])
    cols = np.concatenate([kept[:, 1], kept[:, 0]])
    adjacency = csr_from_coo((g.num_nodes, g.num_nodes), rows, cols,
                             np.ones(rows.shape[0]))
    return CorruptedAdjacency(adjacency=adjacency, epoch=epoch, step=step)


def line_graph_loss(tape, z_lg: ad.Tensor, positives: np.ndarray,
                    kappa: int) -> ad.Tensor:
    """Mean negative log keep-probability over the positive edges."""
    if kappa <= 0:
        raise ContractError("line-graph loss needs at least one positive")
    probs = ad.row_softmax(tape, z_lg)
    rows = np.nonzero(positives)[0]
    picked = ad.gather(tape, probs, rows,
                       np.full(rows.shape[0], KEEP_COL, dtype=np.int64))
    return ad.scale(tape, ad.sum_all(tape, ad.log(tape, picked)),
                    -1.0 / kappa)


def pgd_step(delta: Perturbation, grad_delta: np.ndarray,
             gamma: float) -> Perturbation:
    """Ascent: delta <- clip(delta + gamma * sign(grad), -eps, +eps)."""
    if gamma <= 0.0:
        raise ContractError(f"gamma must be positive, got {gamma}")
    eps = delta.epsilon
    values = np.clip(delta.values + gamma * np.sign(grad_delta), -eps, eps)
    return Perturbation(tensor=ad.Tensor(values, requires_grad=True),
                        epsilon=eps)
