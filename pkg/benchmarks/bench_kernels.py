#!/usr/bin/env python3
"""Benchmark the compiled CSR kernels against the NumPy fallback.

Times the two products on the training hot path — ``csr_matmul``
(``out += A @ X``) and ``csr_t_matmul`` (``out += A.T @ G``) — on random
sparse matrices, checks that both backends produce identical results, and
prints a speedup table.

The package selects its backend at import time via the
``ADEDGEDROP_PURE_PYTHON=1`` environment variable; this script bypasses the
dispatch and imports both implementations directly so a single process can
compare them side by side.

Usage::

    python benchmarks/bench_kernels.py
    python benchmarks/bench_kernels.py --sizes 2000,20000 --dims 16,64 --repeats 5
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from adedgedrop.kernels import _csr_python
from adedgedrop.sparse import CsrMatrix, csr_from_coo

try:
    from adedgedrop.kernels import _csr_native
except ImportError:
    _csr_native = None


def random_csr(n: int, avg_degree: int, rng: np.random.Generator) -> CsrMatrix:
    """Random n-by-n CSR with roughly ``avg_degree`` entries per row.

    (row, col) pairs are deduplicated because the kernels require unique
    column indices within each row.
    """
    draw = int(n * avg_degree * 1.2)
    rows = rng.integers(0, n, size=draw, dtype=np.int64)
    cols = rng.integers(0, n, size=draw, dtype=np.int64)
    keys = np.unique(rows * n + cols)
    rows, cols = keys // n, keys % n
    vals = rng.standard_normal(keys.shape[0])
    return csr_from_coo((n, n), rows, cols, vals)


def time_kernel(fn, args, repeats: int) -> float:
    """Best-of-``repeats`` wall time in seconds; the output buffer is
    zeroed before every call so each run does identical work."""
    out = args[-1]
    best = float("inf")
    for _ in range(repeats):
        out[:] = 0.0
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def run_case(csr: CsrMatrix, dim: int, repeats: int,
             rng: np.random.Generator) -> list[tuple[str, float, float, float]]:
    """Benchmark both kernels on one (matrix, feature-dim) configuration.

    Returns rows of (kernel name, python seconds, native seconds, max abs
    difference between the two backends' outputs).
    """
    n = csr.shape[0]
    dense = rng.standard_normal((n, dim))
    upstream = rng.standard_normal((n, dim))
    results = []
    for name, fn_name, operand in (
        ("csr_matmul", "csr_matmul", dense),
        ("csr_t_matmul", "csr_t_matmul", upstream),
    ):
        args_py = (csr.indptr, csr.indices, csr.data, operand,
                   np.zeros((n, dim)))
        t_py = time_kernel(getattr(_csr_python, fn_name), args_py, repeats)
        ref = args_py[-1].copy()
        if _csr_native is None:
            results.append((name, t_py, float("nan"), 0.0))
            continue
        args_nat = (csr.indptr, csr.indices, csr.data, operand,
                    np.zeros((n, dim)))
        t_nat = time_kernel(getattr(_csr_native, fn_name), args_nat, repeats)
        diff = float(np.abs(ref - args_nat[-1]).max())
        results.append((name, t_py, t_nat, diff))
    return results


def parse_int_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}")
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("sizes/dims must be positive integers")
    return values


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--sizes", type=parse_int_list, default=[2000, 10000],
                        help="comma-separated matrix sizes (default 2000,10000)")
    parser.add_argument("--dims", type=parse_int_list, default=[16, 64],
                        help="comma-separated feature dims (default 16,64)")
    parser.add_argument("--avg-degree", type=int, default=10,
                        help="average nonzeros per row (default 10)")
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing repeats, best-of (default 5)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if _csr_native is None:
        print("note: compiled backend unavailable, timing the fallback only",
              file=sys.stderr)

    rng = np.random.default_rng(args.seed)
    header = (f"{'n':>7} {'nnz':>9} {'dim':>4} {'kernel':<13} "
              f"{'python (ms)':>12} {'native (ms)':>12} {'speedup':>8} {'max|diff|':>10}")
    print(header)
    print("-" * len(header))
    worst_diff = 0.0
    for n in args.sizes:
        csr = random_csr(n, args.avg_degree, rng)
        for dim in args.dims:
            for name, t_py, t_nat, diff in run_case(csr, dim, args.repeats, rng):
                worst_diff = max(worst_diff, diff)
                speedup = f"{t_py / t_nat:8.1f}x" if t_nat == t_nat else "     n/a"
                nat_ms = f"{t_nat * 1e3:12.3f}" if t_nat == t_nat else "         n/a"
                print(f"{n:>7} {csr.nnz:>9} {dim:>4} {name:<13} "
                      f"{t_py * 1e3:12.3f} {nat_ms} {speedup} {diff:10.2e}")
    if _csr_native is not None:
        agree = "agree bit-for-bit" if worst_diff == 0.0 else f"max abs diff {worst_diff:.2e}"
        print(f"\nbackends {agree} across all cases")
    return 0


if __name__ == "__main__":
    sys.exit(main())
