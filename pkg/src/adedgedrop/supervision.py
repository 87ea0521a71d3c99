"""Edge-level supervision from node attribute similarity.

The keep/drop target for each edge comes from a Gaussian kernel over the
endpoint feature distance, thresholded at the same mu used by the edge mask.
A pre-dropping pass over the same similarities shrinks the line graph for
edge-dense inputs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .graphs import Graph, graph_from_edges

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EdgeSimilarity:
    """Gaussian-kernel similarity per undirected edge, in (0, 1]."""

    values: np.ndarray   # (E,) float64
    sigma: float


@dataclass(frozen=True)
class SupervisionSignal:
    """Binary keep target per line-graph node."""

    values: np.ndarray   # (E,) uint8
    kappa: int           # number of positives

    @property
    def degenerate(self) -> bool:
        return self.kappa == 0


@dataclass(frozen=True)
class PreDropMask:
    """Edges that survive similarity pre-dropping."""

    values: np.ndarray   # (E,) uint8
    p_pre: float


def gaussian_similarity(x: np.ndarray, edges: np.ndarray,
                        sigma: float | None = None) -> EdgeSimilarity:
    """sim_p = exp(-||X_i - X_j||^2 / (2 sigma^2)).

    With ``sigma=None`` the bandwidth defaults to the median endpoint
    distance over the edges (computed once); an all-zero median falls back
    to sigma=1.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    diff = x[edges[:, 0]] - x[edges[:, 1]]
    sq_dist = np.einsum("ij,ij->i", diff, diff)
    if sigma is None:
        med = float(np.median(np.sqrt(sq_dist))) if sq_dist.size else 0.0
        if med <= 0.0:
            log.warning("median edge distance is 0; falling back to sigma=1")
            sigma = 1.0
        else:
            sigma = med
    elif sigma <= 0.0:
        raise ContractError(f"sigma must be positive, got {sigma}")
    values = np.exp(-sq_dist / (2.0 * sigma * sigma))
    return EdgeSimilarity(values=values, sigma=float(sigma))


def build_supervision(sim: EdgeSimilarity, mu: float) -> SupervisionSignal:
    """S_p = 1 iff sim_p >= mu (boundary inclusive)."""
    if not 0.0 <= mu <= 1.0:
        raise ContractError(f"mu must lie in [0, 1], got {mu}")
    values = (sim.values >= mu).astype(np.uint8)
    kappa = int(values.sum())
    if kappa == 0:
        log.warning("supervision signal is degenerate (no positives)")
    return SupervisionSignal(values=values, kappa=kappa)


def pre_drop(g: Graph, sim: EdgeSimilarity,
             p_pre: float) -> tuple[PreDropMask, Graph]:
    """Drop edges with similarity below p_pre before line-graph construction.

    Returns the survival mask over the ORIGINAL edge list plus the reduced
    graph; callers keep the mask so the removed edges can still take part in
    ordinary per-epoch random dropping.
    """
    if not 0.0 <= p_pre <= 1.0:
        raise ContractError(f"p_pre must lie in [0, 1], got {p_pre}")
    values = (sim.values >= p_pre).astype(np.uint8)
    survivors = g.edges[values.astype(bool)]
    reduced = graph_from_edges(g.num_nodes, survivors)
    return PreDropMask(values=values, p_pre=float(p_pre)), reduced
