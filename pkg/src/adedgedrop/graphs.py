"""Undirected attributed graphs: loading, validation, GCN normalization.

File formats (all line-oriented TSV, ``#`` starts a comment line):

* ``edges.tsv``    — ``u<TAB>v`` per line, 0-based node ids
* ``features.tsv`` — node id, then the feature values
* ``labels.tsv``   — ``node<TAB>class``
* ``splits.tsv``   — ``node<TAB>{train|val|test}``
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ParseError
from .sparse import CsrMatrix, csr_from_coo

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph in CSR form.

    ``edges`` is the canonical list of undirected edges (i < j, lexsorted);
    the adjacency stores both directed entries of every edge and never stores
    self-loops.
    """

    num_nodes: int
    edges: np.ndarray          # (E, 2) int64, i < j
    adjacency: CsrMatrix       # symmetric 0/1, no self-loops
    degrees: np.ndarray        # (n,) int64

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])


@dataclass(frozen=True)
class LabelSplit:
    """Per-node class labels plus disjoint train/val/test masks."""

    labels: np.ndarray       # (n,) int64, -1 where unlabeled
    train_mask: np.ndarray   # (n,) bool
    val_mask: np.ndarray
    test_mask: np.ndarray
    num_classes: int = field(default=0)

    def __post_init__(self):
        n = self.labels.shape[0]
        for m in (self.train_mask, self.val_mask, self.test_mask):
            if m.shape != (n,):
                raise ContractError("split mask length does not match labels")
        if np.any(self.train_mask & self.val_mask) or \
           np.any(self.train_mask & self.test_mask) or \
           np.any(self.val_mask & self.test_mask):
            raise ContractError("train/val/test masks overlap")
        masked = self.train_mask | self.val_mask | self.test_mask
        if np.any(self.labels[masked] < 0):
            raise ContractError("masked node without a valid label")
        if self.num_classes <= 0:
            object.__setattr__(
                self, "num_classes", int(self.labels.max()) + 1
            )
        if np.any(self.labels[masked] >= self.num_classes):
            raise ContractError("label out of range for num_classes")

    def mask(self, which: str) -> np.ndarray:
        try:
            return {"train": self.train_mask, "val": self.val_mask,
                    "test": self.test_mask}[which]
        except KeyError:
            raise ContractError(f"unknown split {which!r}") from None


def graph_from_edges(num_nodes: int, pairs: np.ndarray) -> Graph:
    """Build a Graph from raw (u, v) pairs.

    Symmetrizes, canonicalizes to i < j, drops self-loops and duplicates.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.size and (pairs.min() < 0 or pairs.max() >= num_nodes):
        raise ContractError("edge endpoint out of range")
    keep = pairs[:, 0] != pairs[:, 1]
    pairs = pairs[keep]
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    edges = np.unique(np.stack([lo, hi], axis=1), axis=0) if lo.size else \
        np.empty((0, 2), dtype=np.int64)

    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    adj = csr_from_coo((num_nodes, num_nodes), rows, cols,
                       np.ones(rows.shape[0]))
    degrees = np.diff(adj.indptr).astype(np.int64)
    return Graph(num_nodes=num_nodes, edges=edges, adjacency=adj,
                 degrees=degrees)


def load_graph(edge_file, num_nodes: int) -> Graph:
    """Load an edges.tsv file into a symmetric, deduplicated Graph."""
    raw = []
    try:
        handle = open(edge_file, "r", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read edge file {edge_file}: {exc}") from exc
    with handle:
        for line_no, line in enumerate(handle, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split("\t") if "\t" in text else text.split()
            if len(parts) != 2:
                raise ParseError("expected 'u<TAB>v'", path=str(edge_file),
                                 line=line_no)
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"non-integer endpoint {text!r}",
                                 path=str(edge_file), line=line_no) from None
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                raise ParseError(
                    f"node index out of range: ({u}, {v}) with "
                    f"num_nodes={num_nodes}", path=str(edge_file),
                    line=line_no)
            if u != v:
                raw.append((u, v))
    pairs = np.asarray(raw, dtype=np.int64).reshape(-1, 2)
    g = graph_from_edges(num_nodes, pairs)
    merged = pairs.shape[0] - g.num_edges
    if merged:
        log.info("merged %d duplicate/reversed edge lines in %s",
                 merged, edge_file)
    return g


def save_edges(edges: np.ndarray, path) -> None:
    """Write a canonical edge list in edges.tsv format."""
    with open(path, "w", encoding="utf-8") as handle:
        for i, j in np.asarray(edges, dtype=np.int64):
            handle.write(f"{i}\t{j}\n")


def normalize_adjacency(adj: CsrMatrix, num_nodes: int) -> CsrMatrix:
    """Symmetric GCN normalization with injected self-loops.

    Returns ``Dhat^{-1/2} (A + I) Dhat^{-1/2}`` where ``Dhat`` is the degree
    matrix of ``A + I``. The input must be symmetric and self-loop-free;
    isolated nodes come out with a single self-entry of 1.
    """
    deg_hat = np.diff(adj.indptr).astype(np.float64) + 1.0
    inv_sqrt = 1.0 / np.sqrt(deg_hat)

    n_entries = adj.nnz + num_nodes
    rows = np.empty(n_entries, dtype=np.int64)
    cols = np.empty(n_entries, dtype=np.int64)
    row_counts = np.diff(adj.indptr)
    rows[:adj.nnz] = np.repeat(np.arange(num_nodes, dtype=np.int64),
                               row_counts)
    cols[:adj.nnz] = adj.indices
    rows[adj.nnz:] = np.arange(num_nodes, dtype=np.int64)
    cols[adj.nnz:] = np.arange(num_nodes, dtype=np.int64)
    # product of two identical inverse-sqrt factors: symmetric bit-for-bit
    vals = inv_sqrt[rows] * inv_sqrt[cols]
    return csr_from_coo((num_nodes, num_nodes), rows, cols, vals)


def load_features(path, num_nodes: int) -> np.ndarray:
    """Load features.tsv into a dense (n, m) float64 matrix."""
    values = {}
    width = None
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split("\t") if "\t" in text else text.split()
            try:
                node = int(parts[0])
                feats = [float(p) for p in parts[1:]]
            except ValueError:
                raise ParseError("bad feature row", path=str(path),
                                 line=line_no) from None
            if not (0 <= node < num_nodes):
                raise ParseError(f"node index {node} out of range",
                                 path=str(path), line=line_no)
            if width is None:
                width = len(feats)
            elif len(feats) != width:
                raise ParseError("inconsistent feature width",
                                 path=str(path), line=line_no)
            values[node] = feats
    if width is None:
        raise ParseError("no feature rows found", path=str(path))
    x = np.zeros((num_nodes, width), dtype=np.float64)
    for node, feats in values.items():
        x[node] = feats
    if not np.isfinite(x).all():
        raise ContractError("feature matrix contains non-finite values")
    return x


def _load_node_column(path, num_nodes: int):
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split("\t") if "\t" in text else text.split()
            if len(parts) != 2:
                raise ParseError("expected two columns", path=str(path),
                                 line=line_no)
            try:
                node = int(parts[0])
            except ValueError:
                raise ParseError("non-integer node id", path=str(path),
                                 line=line_no) from None
            if not (0 <= node < num_nodes):
                raise ParseError(f"node index {node} out of range",
                                 path=str(path), line=line_no)
            rows.append((node, parts[1], line_no))
    return rows


def load_labels(path, num_nodes: int) -> np.ndarray:
    """Load labels.tsv into a (n,) int64 vector, -1 where missing."""
    labels = np.full(num_nodes, -1, dtype=np.int64)
    for node, value, line_no in _load_node_column(path, num_nodes):
        try:
            labels[node] = int(value)
        except ValueError:
            raise ParseError("non-integer class", path=str(path),
                             line=line_no) from None
    return labels


def load_splits(path, num_nodes: int, labels: np.ndarray) -> LabelSplit:
    """Load splits.tsv and combine with labels into a LabelSplit."""
    masks = {"train": np.zeros(num_nodes, dtype=bool),
             "val": np.zeros(num_nodes, dtype=bool),
             "test": np.zeros(num_nodes, dtype=bool)}
    for node, value, line_no in _load_node_column(path, num_nodes):
        if value not in masks:
            raise ParseError(f"unknown split {value!r}", path=str(path),
                             line=line_no)
        masks[value][node] = True
    return LabelSplit(labels=labels, train_mask=masks["train"],
                      val_mask=masks["val"], test_mask=masks["test"])
