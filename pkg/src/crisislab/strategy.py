"""Red flags, the Gamma vote count, trading rules and the backtest loop.

Each calibrated indicator raises a *red flag* at date t0 when its value
sat inside its danger zone on more than S of the previous 100 trading
days.  Gamma(t0) counts the flags across all indicators and drives the
daily order:

    Gamma 0 or 1   -> buy 10% more shares
    Gamma 2 to 4   -> do nothing
    Gamma above 4  -> sell 10% of the shares

Cash earns one day of the riskless rate (rate/360) before the order
executes at the day's closing price.  All portfolio mechanics go
through the shared stepping kernels, so the active, passive and random
portfolios obey identical constraints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._kernels import BUY, SELL, STAY
from .calibration import DangerZone

ORDER_NAMES = {BUY: "buy", STAY: "stay", SELL: "sell"}

DEFAULT_LOOKBACK = 100
INITIAL_SHARES = 10_000
INITIAL_CASH = 10_000_000.0


@dataclass(frozen=True)
class StrategyParams:
    """Operator choices: MDD threshold (recorded), sensitivity, horizons."""

    mdd_threshold: float
    sensitivity: int
    horizon: int = 100
    lookback: int = DEFAULT_LOOKBACK
    execution_lag_days: int = 0

    def __post_init__(self):
        if not 0 <= self.sensitivity <= 100:
            raise ValueError("sensitivity must be between 0 and 100")
        if self.lookback < 1 or self.horizon < 1:
            raise ValueError("lookback and horizon must be positive")
        if self.execution_lag_days < 0:
            raise ValueError("execution lag cannot be negative")


@dataclass(frozen=True)
class Portfolio:
    """Cash plus an integer number of ETF shares."""

    cash: float
    shares: int
    as_of: int = 0

    def __post_init__(self):
        if self.cash < 0 or self.shares < 0:
            raise ValueError("cash and shares cannot be negative")

    def value(self, price: float) -> float:
        return self.cash + self.shares * price


def in_zone_counts(values: np.ndarray, anchors: np.ndarray, zone: DangerZone,
                   t0s: np.ndarray, lookback: int = DEFAULT_LOOKBACK) -> np.ndarray:
    """Count in-zone days over [t0 - lookback, t0 - 1] for each t0.

    ``anchors`` are the contiguous calendar indices the indicator values
    live on; every t0 must have a full lookback of history.
    """
    anchors = np.asarray(anchors)
    t0s = np.asarray(t0s)
    if len(anchors) > 1 and not (np.diff(anchors) == 1).all():
        raise ValueError("indicator anchors must be consecutive calendar indices")
    first = int(anchors[0])
    if (t0s - lookback < first).any():
        raise ValueError("a decision date lacks a full lookback of indicator history")
    flags = zone.contains(values).astype(np.int64)
    csum = np.concatenate([[0], np.cumsum(flags)])
    lo = t0s - lookback - first
    hi = t0s - 1 - first
    return csum[hi + 1] - csum[lo]


def red_flag(values: np.ndarray, anchors: np.ndarray, zone: DangerZone,
             t0: int, sensitivity: int, lookback: int = DEFAULT_LOOKBACK) -> bool:
    """True when the value was inside the zone on *more than* S of the
    previous ``lookback`` days (strict inequality)."""
    count = in_zone_counts(values, anchors, zone, np.array([t0]), lookback)[0]
    return bool(count > sensitivity)


def gamma(flags) -> int:
    """Number of raised flags; abstaining indicators simply contribute none."""
    return int(sum(bool(f) for f in flags))


def decide(gamma_value: int) -> int:
    """Map the vote count to an order code (step function of Gamma only)."""
    if not 0 <= gamma_value <= 29:
        raise ValueError(f"Gamma must be in [0, 29], got {gamma_value}")
    if gamma_value <= 1:
        return BUY
    if gamma_value <= 4:
        return STAY
    return SELL


def step_portfolio(portfolio: Portfolio, order: int, price: float,
                   riskless_rate: float) -> Portfolio:
    """Advance one trading day: accrue interest, then execute the order.

    Thin wrapper over the stepping kernel so scalar use, the backtest
    and the random baselines share one mechanics implementation.
    """
    if price <= 0:
        raise ValueError("price must be positive")
    if riskless_rate < -1:
        raise ValueError("rate below -100% is not meaningful")
    _, cash, shares = _kernels.run_order_sequence(
        np.array([price]), np.array([riskless_rate]), np.array([order], dtype=np.int8),
        portfolio.cash, portfolio.shares)
    return Portfolio(cash=float(cash[0]), shares=int(shares[0]),
                     as_of=portfolio.as_of + 1)


def gamma_series(panel, zones: dict[str, DangerZone | None], t0s: np.ndarray,
                 sensitivity: int, lookback: int = DEFAULT_LOOKBACK) -> np.ndarray:
    """Gamma at each decision date from the calibrated zones."""
    t0s = np.asarray(t0s)
    gammas = np.zeros(len(t0s), dtype=np.int64)
    for name, zone in zones.items():
        if zone is None:
            continue
        counts = in_zone_counts(panel.values[name], panel.anchors, zone, t0s, lookback)
        gammas += counts > sensitivity
    return gammas


@dataclass
class EquityCurve:
    """Daily out-of-sample record of the active and passive portfolios."""

    start_index: int
    dates: list[str]
    pa_values: np.ndarray
    pp_values: np.ndarray
    cash: np.ndarray
    shares: np.ndarray
    investment_ratio: np.ndarray
    gammas: np.ndarray
    orders: np.ndarray
    prices: np.ndarray
    rates: np.ndarray
    order_counts: dict[str, int] = field(default_factory=dict)


def run_backtest(dataset, panel, zones: dict[str, DangerZone | None],
                 params: StrategyParams, k_calibration: int,
                 initial_cash: float = INITIAL_CASH,
                 initial_shares: int = INITIAL_SHARES) -> EquityCurve:
    """Simulate the active strategy from K + H to the end of the panel.

    The decision sequence depends only on the indicator panel, so the
    orders are computed up front and replayed through the stepping
    kernel; the passive portfolio is the all-Stay sequence.
    """
    start = k_calibration + params.horizon
    n_days = dataset.n_days
    if start >= n_days:
        raise ValueError(f"out-of-sample period is empty: start {start} >= {n_days} days")
    t0s = np.arange(start, n_days)

    gammas = gamma_series(panel, zones, t0s, params.sensitivity, params.lookback)
    decided = np.array([decide(int(g)) for g in gammas], dtype=np.int8)
    if params.execution_lag_days:
        lag = params.execution_lag_days
        orders = np.full(len(decided), STAY, dtype=np.int8)
        orders[lag:] = decided[: len(decided) - lag]
    else:
        orders = decided

    prices = dataset.index_price[start:]
    rates = dataset.riskless_rate[start - 1:n_days - 1]

    pa_values, cash, shares = _kernels.run_order_sequence(
        prices, rates, orders, initial_cash, initial_shares)
    pp_values, _, _ = _kernels.run_order_sequence(
        prices, rates, np.full(len(orders), STAY, dtype=np.int8),
        initial_cash, initial_shares)

    ir = shares * prices / pa_values
    counts = {name: int((orders == code).sum()) for code, name in ORDER_NAMES.items()}

    return EquityCurve(
        start_index=start,
        dates=[dataset.calendar.dates[i] for i in t0s],
        pa_values=pa_values,
        pp_values=pp_values,
        cash=cash,
        shares=shares,
        investment_ratio=ir,
        gammas=gammas,
        orders=orders,
        prices=prices.copy(),
        rates=rates.copy(),
        order_counts=counts,
    )


def curve_to_csv(curve: EquityCurve, path) -> None:
    """Equity-curve export: date, pa_value, pp_value, ir, gamma, order."""
    import pandas as pd

    df = pd.DataFrame({
        "pa_value": curve.pa_values,
        "pp_value": curve.pp_values,
        "ir": curve.investment_ratio,
        "gamma": curve.gammas,
        "order": [ORDER_NAMES[int(o)] for o in curve.orders],
    }, index=pd.Index(curve.dates, name="date"))
    from .market_data import CSV_FLOAT_FORMAT

    df.to_csv(path, float_format=CSV_FLOAT_FORMAT)
