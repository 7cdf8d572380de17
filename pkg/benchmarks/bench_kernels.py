"""Benchmark the hot kernels: numba fast path vs the pure-numpy fallback.

Run: python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from topolearn.kernels import _numpy

try:
    from topolearn.kernels import _numba
except ImportError:
    _numba = None

GUARD = 1e-30


def random_csr(rng, n, avg_degree):
    m = n * avg_degree // 2
    u = rng.integers(0, n, size=2 * m)
    v = rng.integers(0, n, size=2 * m)
    keep = u != v
    rows = np.concatenate([u[keep], v[keep]])
    cols = np.concatenate([v[keep], u[keep]])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    row_ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(row_ptr, rows + 1, 1)
    np.cumsum(row_ptr, out=row_ptr)
    return row_ptr, cols.astype(np.int64), rng.normal(size=cols.shape[0])


def best_of(fn, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_case(n, f, n_pairs, rng):
    row_ptr, cols, vals = random_csr(rng, n, avg_degree=10)
    x = rng.normal(size=(n, f))
    delta_h = rng.normal(size=(n, f))
    ri = rng.integers(0, n, size=n_pairs).astype(np.int64)
    rj = rng.integers(0, n, size=n_pairs).astype(np.int64)
    d, e, s = _numpy.edge_repr_forward(delta_h, ri, rj, GUARD)
    d_e = rng.normal(size=e.shape)

    cases = {
        "spmm": lambda impl: impl.csr_dense_matmul(row_ptr, cols, vals, x),
        "edge_fwd": lambda impl: impl.edge_repr_forward(delta_h, ri, rj, GUARD),
        "edge_bwd": lambda impl: impl.edge_repr_backward(
            d, e, s, ri, rj, d_e, GUARD, n
        ),
    }
    for name, fn in cases.items():
        t_np = best_of(lambda: fn(_numpy))
        if _numba is not None:
            fn(_numba)  # JIT warmup
            t_nb = best_of(lambda: fn(_numba))
            speedup = t_np / t_nb
            print(
                f"  {name:<9} numpy {t_np * 1e3:8.2f} ms   "
                f"numba {t_nb * 1e3:8.2f} ms   speedup {speedup:5.2f}x"
            )
        else:
            print(f"  {name:<9} numpy {t_np * 1e3:8.2f} ms   (numba unavailable)")


def main():
    rng = np.random.default_rng(0)
    for n, f, n_pairs in [(1000, 64, 5000), (3000, 256, 12000), (3000, 512, 12000)]:
        print(f"n={n} channels={f} pairs={n_pairs}")
        bench_case(n, f, n_pairs, rng)


if __name__ == "__main__":
    main()
