"""Synthetic block-model graphs and random edge attacks for desk-scale
evaluation. Noise edges are injected across classes and recorded so the
harness can check whether the learned dropping targets them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .graphs import Graph, LabelSplit, graph_from_edges

TRAIN_PER_CLASS = 20
VAL_CAP = 500
VAL_FRACTION = 0.3


@dataclass(frozen=True)
class SbmSpec:
    """Stochastic block model with class-separated Gaussian features."""

    block_sizes: tuple[int, ...] = (100, 100)
    intra_p: float = 0.06
    inter_p: float = 0.005
    noise_edges: int = 150
    feature_dim: int = 16
    mean_separation: float = 1.0
    feature_std: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if len(self.block_sizes) < 2:
            raise ContractError("need at least 2 blocks")
        if any(b < 1 for b in self.block_sizes):
            raise ContractError("block sizes must be at least 1")
        for name, p in (("intra_p", self.intra_p), ("inter_p", self.inter_p)):
            if not 0.0 <= p <= 1.0:
                raise ContractError(f"{name} must lie in [0, 1], got {p}")
        if self.noise_edges < 0:
            raise ContractError("noise_edges must be non-negative")
        if self.feature_dim < len(self.block_sizes):
            raise ContractError("feature_dim must cover one axis per class")
        if self.feature_std < 0.0:
            raise ContractError("feature_std must be non-negative")


def gen_sbm(spec: SbmSpec) -> tuple[Graph, np.ndarray, LabelSplit,
                                    np.ndarray]:
    """Sample the graph, features, splits, and the injected noise edges.

    Noise edges are extra inter-class connections drawn from pairs the block
    model left unconnected; they are part of the returned graph and also
    reported separately as a canonical (k, 2) list.
    """
    rng = np.random.default_rng(spec.seed)
    sizes = np.asarray(spec.block_sizes, dtype=np.int64)
    n = int(sizes.sum())
    labels = np.repeat(np.arange(sizes.size, dtype=np.int64), sizes)

    iu, ju = np.triu_indices(n, k=1)
    same = labels[iu] == labels[ju]
    prob = np.where(same, spec.intra_p, spec.inter_p)
    drawn = rng.random(iu.shape[0]) < prob
    base_edges = np.stack([iu[drawn], ju[drawn]], axis=1)

    candidates = np.nonzero(~same & ~drawn)[0]
    if spec.noise_edges > candidates.size:
        raise ContractError(
            f"requested {spec.noise_edges} noise edges but only "
            f"{candidates.size} inter-class non-edges exist")
    picked = rng.choice(candidates, size=spec.noise_edges, replace=False)
    noise_edges = np.stack([iu[picked], ju[picked]], axis=1)

    g = graph_from_edges(n, np.concatenate([base_edges, noise_edges], axis=0))

    # Centered class means: mean_c = (sep/sqrt(2)) * (e_c - centroid of all
    # e_k), giving pairwise mean distance exactly `mean_separation` while the
    # population feature mean stays at the origin (no common offset shared by
    # every class).
    means = np.zeros((sizes.size, spec.feature_dim))
    for c in range(sizes.size):
        means[c, c] = spec.mean_separation / np.sqrt(2.0)
    means -= means.mean(axis=0, keepdims=True)
    x = means[labels] + spec.feature_std * rng.standard_normal(
        (n, spec.feature_dim))

    train_idx = []
    for c in range(sizes.size):
        members = np.nonzero(labels == c)[0]
        if members.size <= TRAIN_PER_CLASS:
            raise ContractError(
                f"class {c} has {members.size} nodes; need more than "
                f"{TRAIN_PER_CLASS} to split")
        train_idx.append(rng.choice(members, size=TRAIN_PER_CLASS,
                                    replace=False))
    train_idx = np.concatenate(train_idx)
    rest = rng.permutation(np.setdiff1d(np.arange(n), train_idx))
    n_val = min(VAL_CAP, int(VAL_FRACTION * n))
    val_idx, test_idx = rest[:n_val], rest[n_val:]

    def as_mask(idx: np.ndarray) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        m[idx] = True
        return m

    split = LabelSplit(labels=labels, train_mask=as_mask(train_idx),
                       val_mask=as_mask(val_idx), test_mask=as_mask(test_idx),
                       num_classes=int(sizes.size))
    return g, x, split, noise_edges


def attack_graph(g: Graph, kind: str, rate: float, seed: int) -> Graph:
    """Random structural attack: delete or insert floor(rate * |E|) edges."""
    if not 0.0 <= rate <= 1.0:
        raise ContractError(f"rate must lie in [0, 1], got {rate}")
    rng = np.random.default_rng(seed)
    k = int(np.floor(rate * g.num_edges + 1e-9))
    if kind == "remove":
        drop = rng.choice(g.num_edges, size=k, replace=False)
        keep = np.ones(g.num_edges, dtype=bool)
        keep[drop] = False
        return graph_from_edges(g.num_nodes, g.edges[keep])
    if kind == "add":
        n = g.num_nodes
        iu, ju = np.triu_indices(n, k=1)
        all_ids = iu * n + ju
        edge_ids = g.edges[:, 0] * n + g.edges[:, 1]
        non_edges = np.setdiff1d(all_ids, edge_ids, assume_unique=True)
        if k > non_edges.size:
            raise ContractError(
                f"cannot add {k} edges; only {non_edges.size} non-edges left")
        new_ids = non_edges[rng.choice(non_edges.size, size=k, replace=False)]
        new_edges = np.stack([new_ids // n, new_ids % n], axis=1)
        return graph_from_edges(n, np.concatenate([g.edges, new_edges],
                                                  axis=0))
    raise ContractError(f"unknown attack kind {kind!r}")
