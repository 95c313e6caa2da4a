"""Benchmark the compiled kernels against the pure-Python fallback.

Run as: python3 benchmarks/bench_kernels.py
Compares im2col / col2im / split_gains on representative shapes and
reports the speedup of the compiled extension, verifying output parity
along the way.
"""

import time

import numpy as np

from churnforge import kernels
from churnforge.kernels import pure


def _time(fn, *args, repeats=5):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_im2col():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(64, 16, 32, 13))  # padded (30, 11) under a 3x3 kernel
    args = (x, 3, 3, 1, 1)
    t_active, a = _time(kernels.im2col, *args)
    t_pure, b = _time(pure.im2col, *args)
    assert np.array_equal(a, b), "im2col backends disagree"
    return "im2col (64,16,32,13) k3", t_active, t_pure


def bench_col2im():
    rng = np.random.default_rng(1)
    B, C, H, W = 64, 16, 32, 13
    ho, wo = H - 2, W - 2
    cols = rng.normal(size=(B, C * 9, ho * wo))
    args = (cols, B, C, H, W, 3, 3, 1, 1)
    t_active, a = _time(kernels.col2im, *args)
    t_pure, b = _time(pure.col2im, *args)
    assert np.array_equal(a, b), "col2im backends disagree"
    return "col2im (64,16,32,13) k3", t_active, t_pure


def bench_split_gains():
    rng = np.random.default_rng(2)
    n = 200_000
    y = (rng.random(n) < 0.3).astype(np.float64)
    positions = np.unique(rng.integers(1, n, size=256)).astype(np.int64)
    for criterion in ("gini",):
        t_active, a = _time(kernels.split_gains, y, positions, criterion)
        t_pure, b = _time(pure.split_gains, y, positions, criterion)
        assert np.allclose(a, b, atol=1e-12), "split_gains backends disagree"
    return "split_gains n=200k", t_active, t_pure


def main():
    print(f"active backend: {kernels.BACKEND}")
    rows = [bench_im2col(), bench_col2im(), bench_split_gains()]
    width = max(len(r[0]) for r in rows)
    print(f"{'case':<{width}}  {'active':>10}  {'pure':>10}  {'speedup':>8}")
    for name, t_active, t_pure in rows:
        print(
            f"{name:<{width}}  {t_active * 1e3:>8.2f}ms  {t_pure * 1e3:>8.2f}ms  "
            f"{t_pure / t_active:>7.2f}x"
        )


if __name__ == "__main__":
    main()
