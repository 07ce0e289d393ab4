"""Performance metrics and the random-same-proportion (RSP) baseline.

Default metric conventions mix monthly and daily units on purpose:
daily excess returns subtract one twelfth of the prior day's annualized
rate, volatility annualizes with sqrt(12), and the annualized
performance raises the value ratio to 360 over the trading-day count.
A conventional ``daily`` mode (rate/252, sqrt(252)) sits behind a flag.

Random baseline paths draw buy/stay/sell i.i.d. with the active
strategy's realized proportions and run through the same stepping
kernels as the active and passive portfolios.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._kernels import BUY, SELL, STAY
from .strategy import EquityCurve

METRIC_NAMES = ("sharpe", "perf", "vol", "mdd", "calmar")
# metrics where smaller is better
_LOWER_BETTER = {"vol", "mdd"}

DEFAULT_RSP_PATHS = 50_000
DEFAULT_FAN_SAMPLE = 2_000
_CHUNK = 256


def investment_ratio(cash: float, shares: int, price: float) -> float:
    """Share-value fraction of the portfolio: 1 fully invested, 0 all cash."""
    value = cash + shares * price
    if value <= 0:
        raise ValueError("portfolio value must be positive")
    return shares * price / value


def full_period_mdd(values: np.ndarray) -> float:
    """Maximum drawdown over the whole curve (running-peak scan)."""
    values = np.asarray(values, dtype=float)
    if (values <= 0).any():
        raise ValueError("curve values must be positive")
    peaks = np.maximum.accumulate(values)
    return float(np.max(1.0 - values / peaks))


def excess_returns(values: np.ndarray, rates: np.ndarray, rate_divisor: float) -> np.ndarray:
    """Per-date excess return: A(t)/A(t-1) - TB(t-1)/divisor - 1."""
    values = np.asarray(values, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if len(rates) != len(values):
        raise ValueError("need one rate per curve point")
    return values[1:] / values[:-1] - rates[1:] / rate_divisor - 1.0


def annualized_performance(first: float, last: float, n_steps: int) -> float:
    """(last/first)^(360/n_steps) - 1, date indices counted in trading days."""
    if n_steps < 1:
        raise ValueError("need at least one step")
    return (last / first) ** (360.0 / n_steps) - 1.0


def performance_metrics(values: np.ndarray, rates: np.ndarray,
                        convention: str = "paper") -> dict[str, float]:
    """Perf, Vol, Sharpe (plus MDD and Calmar) for one value curve.

    ``rates[t]`` is the annualized riskless rate fixed the day before
    curve point t, i.e. the same alignment used for interest accrual.
    Volatility uses the sample standard deviation.
    """
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        raise ValueError("need at least two curve points")
    if convention == "paper":
        divisor, ann = 12.0, math.sqrt(12.0)
    elif convention == "daily":
        divisor, ann = 252.0, math.sqrt(252.0)
    else:
        raise ValueError(f"unknown sharpe convention {convention!r}")

    ex = excess_returns(values, rates, divisor)
    perf = annualized_performance(values[0], values[-1], len(values) - 1)
    vol = float(np.std(ex, ddof=1)) * ann
    mean_tb = float(np.mean(rates[1:]))
    if vol == 0.0:
        if abs(perf - mean_tb) < 1e-15:
            sharpe = 0.0
        else:
            raise ValueError("zero volatility with non-zero excess performance")
    else:
        sharpe = (perf - mean_tb) / vol
    mdd = full_period_mdd(values)
    return {
        "perf": perf,
        "vol": vol,
        "sharpe": sharpe,
        "mdd": mdd,
        "calmar": calmar(perf, mdd),
    }


def calmar(perf: float, mdd: float) -> float | None:
    """Perf / MDD; undefined (None) when the drawdown is zero."""
    if mdd == 0.0:
        return None
    return perf / mdd


@dataclass(frozen=True)
class RspConfig:
    """Random-baseline settings; proportions come from PA's realized orders."""

    n_paths: int = DEFAULT_RSP_PATHS
    seed: int = 0
    mode: str = "iid"            # iid | permutation
    fan_sample_paths: int = DEFAULT_FAN_SAMPLE
    threads: int = 1

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("need at least one path")
        if self.mode not in ("iid", "permutation"):
            raise ValueError(f"unknown rsp mode {self.mode!r}")


@dataclass
class RspResult:
    """Per-path metrics plus draw frequencies and the fan-chart sample."""

    n_paths: int
    proportions: tuple[float, float, float]
    metrics: dict[str, np.ndarray]
    order_frequencies: tuple[float, float, float]
    fan_values: np.ndarray          # (fan_paths, n_dates) sampled value curves
    fan_path_count: int
    seed: int


def order_proportions(orders: np.ndarray) -> tuple[float, float, float]:
    orders = np.asarray(orders)
    n = len(orders)
    if n == 0:
        raise ValueError("no orders to take proportions from")
    return (float((orders == BUY).sum()) / n,
            float((orders == STAY).sum()) / n,
            float((orders == SELL).sum()) / n)


def _draw_orders(stream: np.random.SeedSequence, n_steps: int,
                 proportions, mode: str, pa_orders: np.ndarray) -> np.ndarray:
    rng = np.random.default_rng(stream)
    if mode == "permutation":
        return rng.permutation(pa_orders).astype(np.int8)
    u = rng.random(n_steps)
    p_buy, p_stay, _ = proportions
    orders = np.full(n_steps, SELL, dtype=np.int8)
    orders[u < p_buy + p_stay] = STAY
    orders[u < p_buy] = BUY
    return orders


def rsp_paths(curve: EquityCurve, cfg: RspConfig,
              initial_cash: float, initial_shares: int) -> RspResult:
    """Simulate the RSP baseline against the curve's price/rate series.

    Paths use independent RNG substreams of the master seed, so results
    are bit-reproducible and independent of chunking or thread count.
    The fan sample stores full value curves for the first
    ``fan_sample_paths`` paths only.
    """
    prices = np.ascontiguousarray(curve.prices)
    rates = np.ascontiguousarray(curve.rates)
    n_steps = len(prices)
    proportions = order_proportions(curve.orders)
    pa_orders = np.asarray(curve.orders, dtype=np.int8)

    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.n_paths)
    fan_n = min(cfg.fan_sample_paths, cfg.n_paths)

    chunks = [(lo, min(lo + _CHUNK, cfg.n_paths)) for lo in range(0, cfg.n_paths, _CHUNK)]

    def run_chunk(bounds):
        lo, hi = bounds
        orders = np.empty((hi - lo, n_steps), dtype=np.int8)
        for i, stream in enumerate(streams[lo:hi]):
            orders[i] = _draw_orders(stream, n_steps, proportions, cfg.mode, pa_orders)
        return _kernels.run_path_batch(prices, rates, orders, initial_cash, initial_shares)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            stats_parts = list(pool.map(run_chunk, chunks))
    else:
        stats_parts = [run_chunk(b) for b in chunks]
    stats = np.vstack(stats_parts)

    # re-simulate the fan sample storing full curves (same substreams)
    fan_values = np.empty((fan_n, n_steps))
    for i in range(fan_n):
        orders = _draw_orders(streams[i], n_steps, proportions, cfg.mode, pa_orders)
        values, _, _ = _kernels.run_order_sequence(prices, rates, orders,
                                                   initial_cash, initial_shares)
        fan_values[i] = values

    first, last, mdd = stats[:, 0], stats[:, 1], stats[:, 2]
    sum_ex, sumsq_ex = stats[:, 3], stats[:, 4]
    n_ex = n_steps - 1
    perf = (last / first) ** (360.0 / n_ex) - 1.0
    if n_ex >= 2:
        var = np.maximum(sumsq_ex - sum_ex * sum_ex / n_ex, 0.0) / (n_ex - 1)
    else:
        var = np.zeros_like(sum_ex)
    vol = np.sqrt(var) * math.sqrt(12.0)
    mean_tb = float(np.mean(rates[1:]))
    with np.errstate(divide="ignore", invalid="ignore"):
        sharpe = np.where(vol > 0, (perf - mean_tb) / vol, np.nan)
        calmar_arr = np.where(mdd > 0, perf / mdd, np.nan)

    draws = stats[:, 5:8].sum(axis=0)
    freq = tuple(draws / draws.sum())

    return RspResult(
        n_paths=cfg.n_paths,
        proportions=proportions,
        metrics={"sharpe": sharpe, "perf": perf, "vol": vol, "mdd": mdd,
                 "calmar": calmar_arr},
        order_frequencies=freq,
        fan_values=fan_values,
        fan_path_count=fan_n,
        seed=cfg.seed,
    )


def fraction_beaten(pa_value: float | None, path_values: np.ndarray,
                    metric: str) -> float | None:
    """Fraction of defined path metrics that PA strictly beats."""
    if pa_value is None:
        return None
    defined = path_values[~np.isnan(path_values)]
    if len(defined) == 0:
        return None
    if metric in _LOWER_BETTER:
        return float((pa_value < defined).mean())
    return float((pa_value > defined).mean())


@dataclass
class PerformanceReport:
    """PA/PP metric comparison plus RSP distribution summaries."""

    pa: dict[str, float | None]
    pp: dict[str, float | None]
    deltas: dict[str, float | None]
    rsp: dict | None = None
    convention: str = "paper"
    order_counts: dict[str, int] = field(default_factory=dict)

    def to_jsonable(self) -> dict:
        return {
            "convention": self.convention,
            "order_counts": self.order_counts,
            "pa": self.pa,
            "pp": self.pp,
            "deltas": self.deltas,
            "rsp": self.rsp,
        }


def compare(curve: EquityCurve, rsp_result: RspResult | None = None,
            convention: str = "paper") -> PerformanceReport:
    """Metric deltas between active and passive, and PR fractions beaten."""
    pa = performance_metrics(curve.pa_values, curve.rates, convention)
    pp = performance_metrics(curve.pp_values, curve.rates, convention)
    deltas = {}
    for name in METRIC_NAMES:
        if pa[name] is None or pp[name] is None:
            deltas[name] = None
        else:
            deltas[name] = pa[name] - pp[name]

    rsp_payload = None
    if rsp_result is not None:
        per_metric = {}
        for name in METRIC_NAMES:
            path_vals = rsp_result.metrics[name]
            defined = path_vals[~np.isnan(path_vals)]
            per_metric[name] = {
                "pa": pa[name],
                "pr_mean": float(defined.mean()) if len(defined) else None,
                "pr_p05": float(np.percentile(defined, 5)) if len(defined) else None,
                "pr_p50": float(np.percentile(defined, 50)) if len(defined) else None,
                "pr_p95": float(np.percentile(defined, 95)) if len(defined) else None,
                "fraction_beaten": fraction_beaten(pa[name], path_vals, name),
            }
        rsp_payload = {
            "n_paths": rsp_result.n_paths,
            "seed": rsp_result.seed,
            "proportions": {"buy": rsp_result.proportions[0],
                            "stay": rsp_result.proportions[1],
                            "sell": rsp_result.proportions[2]},
            "order_frequencies": {"buy": rsp_result.order_frequencies[0],
                                  "stay": rsp_result.order_frequencies[1],
                                  "sell": rsp_result.order_frequencies[2]},
            "metrics": per_metric,
        }

    return PerformanceReport(pa=pa, pp=pp, deltas=deltas, rsp=rsp_payload,
                             convention=convention, order_counts=dict(curve.order_counts))


def fan_chart(rsp_result: RspResult, percentiles=(5, 25, 50, 75, 95)) -> dict[str, np.ndarray]:
    """Per-date percentile bands of the sampled PR value curves."""
    bands = np.percentile(rsp_result.fan_values, percentiles, axis=0)
    out = {f"p{int(p):02d}": bands[i] for i, p in enumerate(percentiles)}
    out["mean"] = rsp_result.fan_values.mean(axis=0)
    return out
