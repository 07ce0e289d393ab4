"""Portfolio-stepping kernels with backend selection at import.

The compiled Cython extension is preferred; the pure-numpy fallback is
used when the extension is missing or when CRISISLAB_PURE_PYTHON=1 is
set.  Both expose the same functions with bit-identical results, so the
choice only affects speed (see benchmarks/bench_kernels.py).
"""

import os

from . import _pyfallback

if os.environ.get("CRISISLAB_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pyfallback
else:
    try:
        from . import _speedups as _impl
    except ImportError:
        _impl = _pyfallback

BUY = _pyfallback.BUY
STAY = _pyfallback.STAY
SELL = _pyfallback.SELL

run_order_sequence = _impl.run_order_sequence
run_path_batch = _impl.run_path_batch


def backend_name() -> str:
    return _impl.BACKEND
