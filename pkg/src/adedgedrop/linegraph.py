"""Line-graph construction and edge-feature maintenance.

The line graph has one node per undirected edge of the source graph; two
line-graph nodes are adjacent when their edges share exactly one endpoint.
For a simple graph that gives exactly ``sum_i d_i^2 / 2 - |E|`` undirected
line-graph edges, which the tests check against a brute-force construction.

Edge features start as the concatenated reduced features of the two
endpoints (truncated SVD down to the class count) and are then blended each
epoch with a softmax over the concatenated endpoint embeddings coming out of
the downstream network.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .graphs import Graph
from .sparse import CsrMatrix, csr_from_coo

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LineGraph:
    """Edge-adjacency structure of a Graph."""

    num_nodes: int             # |E| of the source graph
    adjacency: CsrMatrix       # symmetric 0/1
    edge_of_node: np.ndarray   # (|E|, 2): line-graph node p -> edge (i, j)

    def node_of_edge(self, i: int, j: int) -> int:
        lo, hi = (i, j) if i < j else (j, i)
        matches = np.nonzero(
            (self.edge_of_node[:, 0] == lo) & (self.edge_of_node[:, 1] == hi)
        )[0]
        if matches.size != 1:
            raise ContractError(f"({i}, {j}) is not an edge")
        return int(matches[0])


@dataclass
class LineGraphFeatures:
    """Per-edge feature rows, 2c wide; mutated only between epochs."""

    values: np.ndarray
    epoch_stamp: int = 0


def build_line_graph(g: Graph) -> LineGraph:
    """Construct the line graph via endpoint buckets, O(sum d_i^2)."""
    n_edges = g.num_edges
    if n_edges == 0:
        log.warning("building line graph of an edgeless graph")
        empty = csr_from_coo((0, 0), np.empty(0, np.int64),
                             np.empty(0, np.int64), np.empty(0))
        return LineGraph(num_nodes=0, adjacency=empty,
                         edge_of_node=g.edges.copy())

    incident: list[list[int]] = [[] for _ in range(g.num_nodes)]
    for p, (i, j) in enumerate(g.edges):
        incident[int(i)].append(p)
        incident[int(j)].append(p)

    rows: list[int] = []
    cols: list[int] = []
    for bucket in incident:
        for a_idx in range(len(bucket)):
            for b_idx in range(a_idx + 1, len(bucket)):
                p, q = bucket[a_idx], bucket[b_idx]
                rows.append(p)
                cols.append(q)
                rows.append(q)
                cols.append(p)
    adjacency = csr_from_coo(
        (n_edges, n_edges),
        np.asarray(rows, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.ones(len(rows)),
    )
    return LineGraph(num_nodes=n_edges, adjacency=adjacency,
                     edge_of_node=g.edges.copy())


def truncated_svd_embed(x: np.ndarray, rank: int, seed: int,
                        power_iters: int = 2,
                        oversample: int = 8) -> np.ndarray | None:
    """Rank-``rank`` row embedding of x via randomized SVD, or None if the
    matrix rank falls short."""
    n, m = x.shape
    if m < rank or n < rank:
        return None
    rng = np.random.default_rng(seed)
    k = min(rank + oversample, m)
    sketch = x @ rng.standard_normal((m, k))
    for _ in range(power_iters):
        sketch = x @ (x.T @ sketch)
    q, _ = np.linalg.qr(sketch)
    b = q.T @ x
    u_small, s, _ = np.linalg.svd(b, full_matrices=False)
    if s[rank - 1] <= 1e-10 * max(s[0], 1e-300):
        return None
    return (q @ u_small[:, :rank]) * s[:rank]


def init_features(g: Graph, x: np.ndarray, num_classes: int,
                  seed: int) -> LineGraphFeatures:
    """Initial edge features: concat of reduced endpoint features.

    The reducer maps node features to ``num_classes`` dimensions so the
    feature width (2c) matches what the per-epoch update produces. Falls
    back to a seeded random projection when the features are rank-deficient.
    """
    if num_classes < 2:
        raise ContractError("need at least 2 classes")
    reduced = truncated_svd_embed(x, num_classes, seed)
    if reduced is None:
        log.warning("feature rank below %d; using seeded random projection",
                    num_classes)
        rng = np.random.default_rng(seed)
        proj = rng.standard_normal((x.shape[1], num_classes))
        reduced = x @ (proj / np.sqrt(num_classes))
    left = reduced[g.edges[:, 0]]
    right = reduced[g.edges[:, 1]]
    return LineGraphFeatures(values=np.concatenate([left, right], axis=1),
                             epoch_stamp=0)


def update_features(prev: LineGraphFeatures, z: np.ndarray, alpha: float,
                    edges: np.ndarray, epoch: int) -> LineGraphFeatures:
    """Blend: alpha * previous + (1 - alpha) * softmax(concat(Z_i, Z_j)).

    The softmax runs over the whole concatenated 2c-vector.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ContractError(f"alpha must lie in [0, 1], got {alpha}")
    if 2 * z.shape[1] != prev.values.shape[1]:
        raise ContractError("embedding width does not match feature width")
    concat = np.concatenate([z[edges[:, 0]], z[edges[:, 1]]], axis=1)
    shifted = concat - concat.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    soft = e / e.sum(axis=1, keepdims=True)
    return LineGraphFeatures(
        values=alpha * prev.values + (1.0 - alpha) * soft,
        epoch_stamp=epoch,
    )
