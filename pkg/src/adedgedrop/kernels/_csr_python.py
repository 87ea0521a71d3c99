"""NumPy fallback for the CSR kernels.

Same contracts as the compiled versions: accumulate into ``out``, fixed
row-major traversal so results stay deterministic.
"""

import numpy as np


def csr_matmul(indptr, indices, data, dense, out):
    """out += csr @ dense."""
    for i in range(indptr.shape[0] - 1):
        lo, hi = indptr[i], indptr[i + 1]
        if lo != hi:
            out[i, :] += data[lo:hi] @ dense[indices[lo:hi], :]


def csr_t_matmul(indptr, indices, data, upstream, out):
    """out += csr.T @ upstream."""
    for i in range(indptr.shape[0] - 1):
        lo, hi = indptr[i], indptr[i + 1]
        if lo != hi:
            # column indices within one row are unique, so fancy += is safe
            out[indices[lo:hi], :] += data[lo:hi, None] * upstream[i, :]
