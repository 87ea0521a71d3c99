# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled CSR kernels: the two products on the training hot path.

Both kernels accumulate into a caller-provided output buffer and run a fixed
sequential loop order, so results are deterministic.
"""

import numpy as np

cimport numpy as cnp

ctypedef cnp.int64_t idx_t


def csr_matmul(const idx_t[::1] indptr, const idx_t[::1] indices,
               const double[::1] data, const double[:, ::1] dense,
               double[:, ::1] out):
    """out += csr @ dense, row by row in index order."""
    cdef Py_ssize_t n_rows = indptr.shape[0] - 1
    cdef Py_ssize_t n_cols = dense.shape[1]
    cdef Py_ssize_t i, k, j, col
    cdef double v
    for i in range(n_rows):
        for k in range(indptr[i], indptr[i + 1]):
            col = indices[k]
            v = data[k]
            for j in range(n_cols):
                out[i, j] += v * dense[col, j]


def csr_t_matmul(const idx_t[::1] indptr, const idx_t[::1] indices,
                 const double[::1] data, const double[:, ::1] upstream,
                 double[:, ::1] out):
    """out += csr.T @ upstream (scatter form, index order)."""
    cdef Py_ssize_t n_rows = indptr.shape[0] - 1
    cdef Py_ssize_t n_cols = upstream.shape[1]
    cdef Py_ssize_t i, k, j, col
    cdef double v
    for i in range(n_rows):
        for k in range(indptr[i], indptr[i + 1]):
            col = indices[k]
            v = data[k]
            for j in range(n_cols):
                out[col, j] += v * upstream[i, j]
