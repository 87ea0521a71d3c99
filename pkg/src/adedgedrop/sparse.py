"""Minimal CSR matrix used for graph propagation.

Only what the GCN forward/backward needs: construction from coordinate
triplets, matmul against a dense matrix, and the transposed matmul used when
backpropagating through the product. The heavy loops live in
:mod:`adedgedrop.kernels`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ShapeError


@dataclass(frozen=True)
class CsrMatrix:
    """Immutable CSR matrix with float64 values and int64 indices."""

    shape: tuple[int, int]
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.data.shape[0])

    def matmul(self, dense: np.ndarray) -> np.ndarray:
        """Return self @ dense."""
        if dense.ndim != 2 or dense.shape[0] != self.shape[1]:
            raise ShapeError(
                f"cannot multiply {self.shape} csr by dense {dense.shape}"
            )
        out = np.zeros((self.shape[0], dense.shape[1]), dtype=np.float64)
        kernels.csr_matmul(
            self.indptr, self.indices, self.data,
            np.ascontiguousarray(dense, dtype=np.float64), out,
        )
        return out

    def t_matmul_add(self, upstream: np.ndarray, out: np.ndarray) -> None:
        """Accumulate self.T @ upstream into out (backward of matmul)."""
        if upstream.shape[0] != self.shape[0] or out.shape[0] != self.shape[1]:
            raise ShapeError(
                f"transpose-multiply mismatch: csr {self.shape}, "
                f"upstream {upstream.shape}, out {out.shape}"
            )
        kernels.csr_t_matmul(
            self.indptr, self.indices, self.data,
            np.ascontiguousarray(upstream, dtype=np.float64), out,
        )

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.shape, dtype=np.float64)
        for i in range(self.shape[0]):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            dense[i, self.indices[lo:hi]] = self.data[lo:hi]
        return dense


def csr_from_coo(shape: tuple[int, int], rows: np.ndarray, cols: np.ndarray,
                 vals: np.ndarray) -> CsrMatrix:
    """Build a CSR matrix from coordinate triplets.

    Entries are sorted by (row, col); duplicates are not merged — callers are
    expected to pass deduplicated coordinates.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    indptr = np.zeros(shape[0] + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    np.cumsum(indptr, out=indptr)
    return CsrMatrix(shape=shape, indptr=indptr,
                     indices=np.ascontiguousarray(cols),
                     data=np.ascontiguousarray(vals))


def identity_csr(n: int) -> CsrMatrix:
    idx = np.arange(n, dtype=np.int64)
    return csr_from_coo((n, n), idx, idx, np.ones(n))
