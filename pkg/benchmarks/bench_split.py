"""Benchmark the tree split-scan kernel: numba @njit vs pure numpy.

The split scan dominates forest and GBM fitting time. Run with

    python3 benchmarks/bench_split.py

The numba path is warmed up before timing so JIT compilation is excluded.
Set AQF_NO_NUMBA=1 to check which path fit_tree actually uses.
"""

import time

import numpy as np

from aquafarm.ml import kernels


def bench(fn, xs, ys, min_leaf, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(xs, ys, min_leaf)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(0)
    print(f"selected backend: {kernels.BACKEND}")
    header = f"{'n':>8} {'numpy':>12} {'numba':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for n in (100, 1_000, 10_000, 100_000, 1_000_000):
        xs = np.sort(rng.uniform(0.0, 100.0, size=n))
        ys = rng.normal(size=n)
        if kernels.split_scan_numba is not None:
            kernels.split_scan_numba(xs[:8], ys[:8], 1)   # warm the JIT
        repeats = max(3, 2_000_000 // n)
        t_np = bench(kernels.split_scan_numpy, xs, ys, 2, repeats)
        if kernels.split_scan_numba is None:
            print(f"{n:>8} {t_np * 1e6:>10.1f}us {'-':>12} {'-':>9}")
            continue
        t_nb = bench(kernels.split_scan_numba, xs, ys, 2, repeats)
        a = kernels.split_scan_numba(xs, ys, 2)
        b = kernels.split_scan_numpy(xs, ys, 2)
        assert a == b, f"backends disagree at n={n}: {a} vs {b}"
        print(f"{n:>8} {t_np * 1e6:>10.1f}us {t_nb * 1e6:>10.1f}us {t_np / t_nb:>8.1f}x")
    print("(backends verified bit-identical on every size)")


if __name__ == "__main__":
    main()
