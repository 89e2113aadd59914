"""Compiled kernels vs the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Times CSR mat-vec on random sparse factors and batch OMP on random patches,
and checks both implementations return the same numbers.
"""

import argparse
import time

import numpy as np

from faustkit import _kernels_py
from faustkit.sparse import SparseMatrix

try:
    from faustkit import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_matvec(impl, repeat):
    rng = np.random.default_rng(0)
    rows = []
    for n, density in [(256, 0.02), (1024, 0.005), (4096, 0.001)]:
        S = SparseMatrix.from_dense(rng.standard_normal((n, n)) * (rng.random((n, n)) < density))
        indptr, indices, data = S._csr
        x = rng.standard_normal(n)
        out = np.empty(n)
        t = best_of(lambda: [impl.csr_matvec(indptr, indices, data, x, out) for _ in range(200)],
                    repeat) / 200
        rows.append((f"csr_matvec n={n} nnz={S.nnz}", t, out.copy()))
    return rows


def bench_omp(impl, repeat):
    rng = np.random.default_rng(1)
    D = rng.standard_normal((64, 128))
    D /= np.linalg.norm(D, axis=0)
    Y = rng.standard_normal((64, 2000))
    gram = np.ascontiguousarray(D.T @ D)
    corr = np.ascontiguousarray((D.T @ Y).T)
    norms2 = np.sum(Y * Y, axis=0)
    t = 5
    sup = np.zeros((Y.shape[1], t), dtype=np.int64)
    coef = np.zeros((Y.shape[1], t))
    cnt = np.zeros(Y.shape[1], dtype=np.int64)
    elapsed = best_of(lambda: impl.batch_omp(gram, corr, norms2, t, 0.0, sup, coef, cnt), repeat)
    return [(f"batch_omp 64x128 L=2000 t={t}", elapsed, coef.copy())]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not built; nothing to compare")
        return
    print(f"{'kernel':40s} {'compiled':>12s} {'numpy':>12s} {'speedup':>8s}  same")
    for bench in (bench_matvec, bench_omp):
        fast = bench(_kernels, args.repeat)
        slow = bench(_kernels_py, max(1, args.repeat // 3))
        for (name, tc, oc), (_, tp, op) in zip(fast, slow):
            same = np.array_equal(oc, op) or np.allclose(oc, op, rtol=1e-12, atol=1e-12)
            print(f"{name:40s} {tc * 1e6:10.1f}us {tp * 1e6:10.1f}us {tp / tc:8.1f}  {same}")


if __name__ == "__main__":
    main()
