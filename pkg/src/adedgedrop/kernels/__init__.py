"""Kernel dispatch: compiled extension when available, NumPy fallback otherwise.

Set ``ADEDGEDROP_PURE_PYTHON=1`` to force the fallback (used by the benchmark
and by tests that compare the two backends).
"""

import os

if os.environ.get("ADEDGEDROP_PURE_PYTHON") == "1":
    from . import _csr_python as _impl

    BACKEND = "python"
else:
    try:
        from . import _csr_native as _impl

        BACKEND = "native"
    except ImportError:
        from . import _csr_python as _impl

        BACKEND = "python"

csr_matmul = _impl.csr_matmul
csr_t_matmul = _impl.csr_t_matmul

__all__ = ["BACKEND", "csr_matmul", "csr_t_matmul"]
