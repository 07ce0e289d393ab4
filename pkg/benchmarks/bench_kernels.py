#!/usr/bin/env python3
"""Benchmark the compiled stepping kernels against the numpy fallback.

Workload mirrors the RSP baseline: batches of random order sequences
driven through the portfolio mechanics, plus the single-path replay used
by the backtest.  Run from the repo root:

    python benchmarks/bench_kernels.py [--paths 20000] [--steps 2000]
"""

import argparse
import time

import numpy as np

from crisislab._kernels import _pyfallback

try:
    from crisislab._kernels import _speedups
except ImportError:
    _speedups = None


def workload(n_paths, n_steps, seed=0):
    rng = np.random.default_rng(seed)
    prices = 1500 * np.exp(np.cumsum(rng.normal(0.0001, 0.01, n_steps)))
    rates = np.abs(rng.normal(0.01, 0.003, n_steps))
    orders = rng.integers(0, 3, size=(n_paths, n_steps)).astype(np.int8)
    return prices, rates, orders


def bench(fn, *args, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--paths", type=int, default=20_000)
    parser.add_argument("--steps", type=int, default=2_000)
    parser.add_argument("--chunk", type=int, default=256)
    args = parser.parse_args()

    prices, rates, orders = workload(args.chunk, args.steps)
    single = orders[0]

    print(f"workload: {args.paths} paths x {args.steps} steps "
          f"(timed in {args.chunk}-path chunks)\n")
    print(f"{'kernel':<22}{'backend':<10}{'time':>12}{'throughput':>22}")

    rows = []
    backends = [("python", _pyfallback)] + ([("cython", _speedups)] if _speedups else [])
    for name, impl in backends:
        t_chunk = bench(impl.run_path_batch, prices, rates, orders, 1e7, 10_000)
        total = t_chunk * (args.paths / args.chunk)
        rows.append((name, total))
        print(f"{'run_path_batch':<22}{name:<10}{total:>11.2f}s"
              f"{args.paths * args.steps / total / 1e6:>18.1f} Msteps/s")

    for name, impl in backends:
        t = bench(impl.run_order_sequence, prices, rates, single, 1e7, 10_000)
        print(f"{'run_order_sequence':<22}{name:<10}{t * 1e3:>10.2f}ms"
              f"{args.steps / t / 1e6:>18.2f} Msteps/s")

    if _speedups is None:
        print("\ncompiled kernels not built; install with `pip install -e .`")
    elif len(rows) == 2:
        print(f"\nbatch speedup: {rows[0][1] / rows[1][1]:.1f}x")

    # sanity: identical output on this workload
    a = _pyfallback.run_path_batch(prices, rates, orders, 1e7, 10_000)
    if _speedups is not None:
        b = _speedups.run_path_batch(prices, rates, orders, 1e7, 10_000)
        assert np.array_equal(a, b), "backends disagree"
        print("backends produce bit-identical statistics")


if __name__ == "__main__":
    main()
