"""Pure-numpy portfolio-stepping kernels.

Reference semantics for the compiled extension; both backends must
produce bit-identical output.  Per step: cash accrues one day of
interest at rate/360, then the day's order executes at the closing
price with integer shares:

* buy: 10% more shares (at least 1), capped by available cash; from
  zero shares, shares worth 10% of portfolio value; no-op if even one
  share is unaffordable,
* sell: 10% of the shares (at least 1); no-op at zero shares,
* stay: no trade.
"""

import numpy as np

BACKEND = "python"

BUY, STAY, SELL = 0, 1, 2


def run_order_sequence(prices, rates, orders, cash0, shares0):
    """Drive one portfolio through an order sequence.

    ``rates[t]`` is the annualized riskless rate accrued at step t
    (conventionally the prior day's fixing).  Returns the per-step
    portfolio values, cash balances and share counts.
    """
    prices = np.ascontiguousarray(prices, dtype=np.float64)
    rates = np.ascontiguousarray(rates, dtype=np.float64)
    orders = np.ascontiguousarray(orders, dtype=np.int8)
    n = len(prices)
    if len(rates) != n or len(orders) != n:
        raise ValueError("prices, rates and orders must have equal length")

    values = np.empty(n)
    cash_out = np.empty(n)
    shares_out = np.empty(n, dtype=np.int64)

    cash = float(cash0)
    shares = int(shares0)
    for t in range(n):
        price = prices[t]
        cash = cash * (1.0 + rates[t] / 360.0)
        order = orders[t]
        if order == BUY:
            if shares > 0:
                dn = shares // 10
                if dn < 1:
                    dn = 1
                afford = int(np.floor(cash / price))
                if dn > afford:
                    dn = afford
            else:
                dn = int(np.floor((0.10 * cash) / price))
            if dn >= 1:
                cash = cash - dn * price
                if cash < 0.0:
                    cash = 0.0
                shares += dn
        elif order == SELL:
            if shares > 0:
                dn = shares // 10
                if dn < 1:
                    dn = 1
                cash = cash + dn * price
                shares -= dn
        values[t] = cash + shares * price
        cash_out[t] = cash
        shares_out[t] = shares
    return values, cash_out, shares_out


def run_path_batch(prices, rates, orders, cash0, shares0):
    """Drive a batch of paths (one order row each) and accumulate stats.

    Returns an (n_paths, 8) array of
    [first_value, final_value, max_drawdown, sum_excess, sumsq_excess,
    n_buy, n_stay, n_sell] per path, where excess returns are
    value[t]/value[t-1] - rates[t]/12 - 1 and the order counts tally the
    proposed (not necessarily executed) orders.
    """
    prices = np.ascontiguousarray(prices, dtype=np.float64)
    rates = np.ascontiguousarray(rates, dtype=np.float64)
    orders = np.ascontiguousarray(orders, dtype=np.int8)
    if orders.ndim != 2 or orders.shape[1] != len(prices):
        raise ValueError("orders must be (n_paths, n_steps)")
    n_paths, n_steps = orders.shape

    cash = np.full(n_paths, float(cash0))
    shares = np.full(n_paths, int(shares0), dtype=np.int64)
    prev_value = np.empty(n_paths)
    runmax = np.empty(n_paths)
    stats = np.zeros((n_paths, 8))

    for t in range(n_steps):
        price = prices[t]
        cash *= 1.0 + rates[t] / 360.0
        o = orders[:, t]

        buying = o == BUY
        if buying.any():
            dn = np.zeros(n_paths, dtype=np.int64)
            has = buying & (shares > 0)
            dn[has] = np.maximum(shares[has] // 10, 1)
            dn[has] = np.minimum(dn[has], np.floor(cash[has] / price).astype(np.int64))
            empty = buying & (shares == 0)
            dn[empty] = np.floor((0.10 * cash[empty]) / price).astype(np.int64)
            exe = dn >= 1
            cash[exe] = np.maximum(cash[exe] - dn[exe] * price, 0.0)
            shares[exe] += dn[exe]

        selling = (o == SELL) & (shares > 0)
        if selling.any():
            dn_s = np.maximum(shares[selling] // 10, 1)
            cash[selling] += dn_s * price
            shares[selling] -= dn_s

        value = cash + shares * price

        if t == 0:
            stats[:, 0] = value
            runmax[:] = value
        else:
            ex = value / prev_value - rates[t] / 12.0 - 1.0
            stats[:, 3] += ex
            stats[:, 4] += ex * ex
            runmax = np.maximum(runmax, value)
        dd = 1.0 - value / runmax
        stats[:, 2] = np.maximum(stats[:, 2], dd)
        prev_value = value

        stats[buying, 5] += 1.0
        stats[o == STAY, 6] += 1.0
        stats[o == SELL, 7] += 1.0

    stats[:, 1] = prev_value
    return stats
