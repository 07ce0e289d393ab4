"""Backend equivalence: the compiled kernels must be bit-identical to the
pure-numpy fallback on identical inputs."""

import os
import subprocess
import sys

import numpy as np
import pytest

from crisislab._kernels import _pyfallback

try:
    from crisislab._kernels import _speedups
except ImportError:
    _speedups = None

needs_ext = pytest.mark.skipif(_speedups is None, reason="compiled kernels not built")


def _workload(seed, n_steps=500, n_paths=64):
    rng = np.random.default_rng(seed)
    prices = 100 * np.exp(np.cumsum(rng.normal(0, 0.02, n_steps)))
    rates = np.abs(rng.normal(0.01, 0.004, n_steps))
    orders = rng.integers(0, 3, size=(n_paths, n_steps)).astype(np.int8)
    return prices, rates, orders


@needs_ext
@pytest.mark.parametrize("seed", range(5))
def test_sequence_backends_bit_identical(seed):
    prices, rates, orders = _workload(seed)
    out_py = _pyfallback.run_order_sequence(prices, rates, orders[0], 1e7, 10_000)
    out_cy = _speedups.run_order_sequence(prices, rates, orders[0], 1e7, 10_000)
    for a, b in zip(out_py, out_cy):
        np.testing.assert_array_equal(a, b)


@needs_ext
@pytest.mark.parametrize("seed", range(5))
def test_batch_backends_bit_identical(seed):
    prices, rates, orders = _workload(seed)
    stats_py = _pyfallback.run_path_batch(prices, rates, orders, 1e7, 10_000)
    stats_cy = _speedups.run_path_batch(prices, rates, orders, 1e7, 10_000)
    np.testing.assert_array_equal(stats_py, stats_cy)


@needs_ext
def test_batch_accepts_readonly_arrays():
    prices, rates, orders = _workload(11)
    prices.setflags(write=False)
    rates.setflags(write=False)
    _speedups.run_order_sequence(prices, rates, orders[0], 1e7, 100)
    _speedups.run_path_batch(prices, rates, orders, 1e7, 100)


def test_batch_row_matches_single_path():
    prices, rates, orders = _workload(7, n_paths=8)
    stats = _pyfallback.run_path_batch(prices, rates, orders, 1e7, 10_000)
    for i in range(8):
        values, _, _ = _pyfallback.run_order_sequence(prices, rates, orders[i],
                                                      1e7, 10_000)
        assert stats[i, 0] == values[0]
        assert stats[i, 1] == values[-1]
        peaks = np.maximum.accumulate(values)
        assert stats[i, 2] == np.max(1.0 - values / peaks)
        ex = values[1:] / values[:-1] - rates[1:] / 12.0 - 1.0
        # the kernels accumulate sequentially; tolerate summation-order error
        assert stats[i, 3] == pytest.approx(ex.sum(), rel=1e-12)
        assert stats[i, 4] == pytest.approx((ex * ex).sum(), rel=1e-12)


def test_batch_counts_drawn_orders():
    prices, rates, orders = _workload(9, n_paths=16)
    stats = _pyfallback.run_path_batch(prices, rates, orders, 1e7, 10_000)
    for i in range(16):
        assert stats[i, 5] == (orders[i] == 0).sum()
        assert stats[i, 6] == (orders[i] == 1).sum()
        assert stats[i, 7] == (orders[i] == 2).sum()


def test_env_var_forces_fallback():
    code = ("import crisislab._kernels as k; print(k.backend_name())")
    env = dict(os.environ, CRISISLAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True, env=env, check=True)
    assert out.stdout.strip() == "python"


@needs_ext
def test_default_prefers_compiled():
    env = {k: v for k, v in os.environ.items() if k != "CRISISLAB_PURE_PYTHON"}
    code = ("import crisislab._kernels as k; print(k.backend_name())")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True, env=env, check=True)
    assert out.stdout.strip() == "cython"
