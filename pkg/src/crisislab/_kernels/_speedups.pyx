# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled portfolio-stepping kernels.

Semantics mirror _pyfallback exactly; outputs must be bit-identical.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()

BACKEND = "cython"

# order codes shared with the fallback
BUY, STAY, SELL = 0, 1, 2


def run_order_sequence(prices, rates, orders, double cash0, long long shares0):
    """Drive one portfolio through an order sequence; see _pyfallback."""
    cdef const double[::1] p = np.ascontiguousarray(prices, dtype=np.float64)
    cdef const double[::1] r = np.ascontiguousarray(rates, dtype=np.float64)
    cdef const signed char[::1] o = np.ascontiguousarray(orders, dtype=np.int8)
    cdef Py_ssize_t n = p.shape[0]
    if r.shape[0] != n or o.shape[0] != n:
        raise ValueError("prices, rates and orders must have equal length")

    values_arr = np.empty(n)
    cash_arr = np.empty(n)
    shares_arr = np.empty(n, dtype=np.int64)
    cdef double[::1] values = values_arr
    cdef double[::1] cash_out = cash_arr
    cdef long long[::1] shares_out = shares_arr

    cdef double cash = cash0
    cdef long long shares = shares0
    cdef double price
    cdef long long dn, afford
    cdef Py_ssize_t t
    cdef signed char order

    with nogil:
        for t in range(n):
            price = p[t]
            cash = cash * (1.0 + r[t] / 360.0)
            order = o[t]
            if order == 0:    # buy
                if shares > 0:
                    dn = shares // 10
                    if dn < 1:
                        dn = 1
                    afford = <long long>floor(cash / price)
                    if dn > afford:
                        dn = afford
                else:
                    dn = <long long>floor((0.10 * cash) / price)
                if dn >= 1:
                    cash = cash - dn * price
                    if cash < 0.0:
                        cash = 0.0
                    shares += dn
            elif order == 2:  # sell
                if shares > 0:
                    dn = shares // 10
                    if dn < 1:
                        dn = 1
                    cash = cash + dn * price
                    shares -= dn
            values[t] = cash + shares * price
            cash_out[t] = cash
            shares_out[t] = shares
    return values_arr, cash_arr, shares_arr


def run_path_batch(prices, rates, orders, double cash0, long long shares0):
    """Drive a batch of order rows and accumulate per-path statistics;
    see _pyfallback for the stats layout."""
    cdef const double[::1] p = np.ascontiguousarray(prices, dtype=np.float64)
    cdef const double[::1] r = np.ascontiguousarray(rates, dtype=np.float64)
    o_arr = np.ascontiguousarray(orders, dtype=np.int8)
    if o_arr.ndim != 2 or o_arr.shape[1] != p.shape[0]:
        raise ValueError("orders must be (n_paths, n_steps)")
    cdef const signed char[:, ::1] o = o_arr
    cdef Py_ssize_t n_paths = o.shape[0]
    cdef Py_ssize_t n_steps = o.shape[1]

    stats_arr = np.zeros((n_paths, 8))
    cdef double[:, ::1] stats = stats_arr

    cdef double cash, price, value, prev_value, runmax, mdd, dd, ex
    cdef double sum_ex, sumsq_ex, nb, ns, nsl
    cdef long long shares, dn, afford
    cdef Py_ssize_t i, t
    cdef signed char order

    with nogil:
        for i in range(n_paths):
            cash = cash0
            shares = shares0
            prev_value = 0.0
            runmax = 0.0
            mdd = 0.0
            sum_ex = 0.0
            sumsq_ex = 0.0
            nb = 0.0
            ns = 0.0
            nsl = 0.0
            for t in range(n_steps):
                price = p[t]
                cash = cash * (1.0 + r[t] / 360.0)
                order = o[i, t]
                if order == 0:    # buy
                    nb += 1.0
                    if shares > 0:
                        dn = shares // 10
                        if dn < 1:
                            dn = 1
                        afford = <long long>floor(cash / price)
                        if dn > afford:
                            dn = afford
                    else:
                        dn = <long long>floor((0.10 * cash) / price)
                    if dn >= 1:
                        cash = cash - dn * price
                        if cash < 0.0:
                            cash = 0.0
                        shares += dn
                elif order == 2:  # sell
                    nsl += 1.0
                    if shares > 0:
                        dn = shares // 10
                        if dn < 1:
                            dn = 1
                        cash = cash + dn * price
                        shares -= dn
                else:
                    ns += 1.0
                value = cash + shares * price
                if t == 0:
                    stats[i, 0] = value
                    runmax = value
                else:
                    ex = value / prev_value - r[t] / 12.0 - 1.0
                    sum_ex += ex
                    sumsq_ex += ex * ex
                    if value > runmax:
                        runmax = value
                dd = 1.0 - value / runmax
                if dd > mdd:
                    mdd = dd
                prev_value = value
            stats[i, 1] = prev_value
            stats[i, 2] = mdd
            stats[i, 3] = sum_ex
            stats[i, 4] = sumsq_ex
            stats[i, 5] = nb
            stats[i, 6] = ns
            stats[i, 7] = nsl
    return stats_arr
