import numpy as np
import pytest

from crisislab._kernels import BUY, SELL, STAY
from crisislab.calibration import DangerZone
from crisislab.strategy import (
    Portfolio,
    StrategyParams,
    decide,
    gamma,
    gamma_series,
    in_zone_counts,
    red_flag,
    run_backtest,
    step_portfolio,
)

ALWAYS_ZONE = DangerZone(lo=-1e30, hi=1e30, support_count=1)
NEVER_ZONE = DangerZone(lo=1e29, hi=1e30, support_count=1)


def test_params_validation():
    StrategyParams(mdd_threshold=0.2, sensitivity=75)
    with pytest.raises(ValueError):
        StrategyParams(mdd_threshold=0.2, sensitivity=101)
    with pytest.raises(ValueError):
        StrategyParams(mdd_threshold=0.2, sensitivity=70, execution_lag_days=-1)


def _series(values):
    values = np.asarray(values, dtype=float)
    return values, np.arange(len(values))


def test_red_flag_all_inside():
    values, anchors = _series(np.zeros(150))
    zone = DangerZone(lo=-1.0, hi=1.0, support_count=1)
    assert red_flag(values, anchors, zone, t0=120, sensitivity=75)


def test_red_flag_sensitivity_100_never_fires():
    values, anchors = _series(np.zeros(150))
    zone = DangerZone(lo=-1.0, hi=1.0, support_count=1)
    assert not red_flag(values, anchors, zone, t0=120, sensitivity=100)


def test_red_flag_boundary_is_strict():
    values = np.ones(200)
    values[:] = 5.0
    anchors = np.arange(200)
    zone = DangerZone(lo=4.0, hi=6.0, support_count=1)
    # exactly 75 of the 100 lookback days inside the zone
    values[125:150] = 99.0  # 25 days outside
    count = in_zone_counts(values, anchors, zone, np.array([150]))[0]
    assert count == 75
    assert not red_flag(values, anchors, zone, t0=150, sensitivity=75)
    assert red_flag(values, anchors, zone, t0=150, sensitivity=74)


def test_in_zone_counts_match_naive_loop():
    rng = np.random.default_rng(0)
    values = rng.normal(0, 1, 400)
    anchors = np.arange(100, 500)
    zone = DangerZone(lo=-0.5, hi=0.8, support_count=1)
    t0s = np.arange(250, 480)
    counts = in_zone_counts(values, anchors, zone, t0s)
    for t0, count in zip(t0s[::13], counts[::13]):
        window = values[(anchors >= t0 - 100) & (anchors <= t0 - 1)]
        assert count == ((window >= -0.5) & (window <= 0.8)).sum()


def test_in_zone_counts_require_history():
    values, anchors = _series(np.zeros(50))
    with pytest.raises(ValueError, match="lookback"):
        in_zone_counts(values, anchors, ALWAYS_ZONE, np.array([30]))


def test_gamma_counts_flags():
    assert gamma([]) == 0
    assert gamma([True] * 29) == 29
    assert gamma([True, False, True, False, True, True, True]) == 5


@pytest.mark.parametrize("g, expected", [(0, BUY), (1, BUY), (2, STAY), (3, STAY),
                                         (4, STAY), (5, SELL), (29, SELL)])
def test_decide_rules(g, expected):
    assert decide(g) == expected


def test_decide_exhaustive_partition():
    for g in range(30):
        order = decide(g)
        if g <= 1:
            assert order == BUY
        elif g <= 4:
            assert order == STAY
        else:
            assert order == SELL
    with pytest.raises(ValueError):
        decide(30)
    with pytest.raises(ValueError):
        decide(-1)


def test_step_buy_ten_percent():
    p = step_portfolio(Portfolio(cash=10_000_000.0, shares=10_000), BUY,
                       price=100.0, riskless_rate=0.0)
    assert p.shares == 11_000
    assert p.cash == pytest.approx(10_000_000.0 - 1000 * 100.0)


def test_step_sell_with_no_shares_is_noop():
    p = step_portfolio(Portfolio(cash=500.0, shares=0), SELL, 100.0, 0.0)
    assert p.shares == 0
    assert p.cash == 500.0


def test_step_sell_minimum_one_share():
    p = step_portfolio(Portfolio(cash=0.0, shares=5), SELL, 100.0, 0.0)
    assert p.shares == 4
    assert p.cash == 100.0


def test_step_buy_cash_constrained():
    # wants 100 shares, can afford 3
    p = step_portfolio(Portfolio(cash=350.0, shares=1000), BUY, 100.0, 0.0)
    assert p.shares == 1003
    assert p.cash == pytest.approx(50.0)
    # cannot afford even one share: no-op
    q = step_portfolio(Portfolio(cash=99.0, shares=1000), BUY, 100.0, 0.0)
    assert q.shares == 1000


def test_step_reentry_from_zero_shares_uses_value_fraction():
    p = step_portfolio(Portfolio(cash=100_000.0, shares=0), BUY, 100.0, 0.0)
    assert p.shares == 100  # 10% of value
    assert p.cash == pytest.approx(90_000.0)


def test_step_accrues_interest_before_trading():
    p = step_portfolio(Portfolio(cash=360_000.0, shares=0), STAY, 100.0, 0.36)
    assert p.cash == pytest.approx(360_000.0 * (1 + 0.001))


def test_step_rejects_bad_inputs():
    with pytest.raises(ValueError):
        step_portfolio(Portfolio(cash=1.0, shares=0), BUY, 0.0, 0.0)
    with pytest.raises(ValueError):
        Portfolio(cash=-1.0, shares=0)


def test_random_walk_never_negative():
    rng = np.random.default_rng(1)
    p = Portfolio(cash=5_000.0, shares=20)
    for _ in range(300):
        order = int(rng.integers(0, 3))
        price = float(rng.uniform(50, 150))
        p = step_portfolio(p, order, price, 0.01)
        assert p.cash >= 0 and p.shares >= 0
        assert p.value(price) > 0


def test_stay_only_zero_rate_tracks_price_exactly():
    from crisislab import _kernels

    prices = np.array([100.0, 93.0, 107.5, 101.25])
    rates = np.zeros(4)
    orders = np.full(4, STAY, dtype=np.int8)
    values, cash, shares = _kernels.run_order_sequence(prices, rates, orders, 1000.0, 7)
    np.testing.assert_array_equal(shares, [7, 7, 7, 7])
    np.testing.assert_allclose(np.diff(values), 7 * np.diff(prices), rtol=0, atol=0)


def _fake_panel(anchors, values_by_name):
    from crisislab.indicators import IndicatorPanel

    return IndicatorPanel(anchors=anchors, values=values_by_name)


def _constant_dataset(days=800, price=100.0):
    from crisislab.market_data import Dataset, TradingCalendar
    import pandas as pd

    n = 2
    dates = tuple(d.strftime("%Y-%m-%d")
                  for d in pd.bdate_range("2006-01-02", periods=days))
    rng = np.random.default_rng(3)
    prices = price * np.exp(np.cumsum(rng.normal(0, 0.001, (n, days)), axis=1))
    return Dataset(
        tickers=["X0", "X1"],
        calendar=TradingCalendar(dates),
        prices=prices,
        volumes=np.ones((n, days)),
        mcap=np.ones((n, days)),
        leverage=np.ones((n, days)),
        index_price=price * np.exp(np.cumsum(rng.normal(0.0002, 0.002, days))),
        riskless_rate=np.full(days, 0.01),
    )


def _backtest_with_zone(zone, days=800, sensitivity=70):
    dataset = _constant_dataset(days)
    k_cal = 500
    anchors = np.arange(4, days)
    values = {f"ind{i}": np.zeros(len(anchors)) for i in range(29)}
    panel = _fake_panel(anchors, values)
    zones = {name: zone for name in values}
    params = StrategyParams(mdd_threshold=0.1, sensitivity=sensitivity)
    return run_backtest(dataset, panel, zones, params, k_cal), dataset


def test_backtest_always_flagging_liquidates():
    curve, _ = _backtest_with_zone(ALWAYS_ZONE)
    assert (curve.gammas == 29).all()
    assert (curve.orders == SELL).all()
    assert curve.shares[-1] == 0
    assert curve.investment_ratio[-1] == 0.0
    # liquidation from 10,000 shares takes ~88 sell days
    assert (curve.investment_ratio == 0.0).sum() > 50


def test_backtest_never_flagging_accumulates():
    curve, _ = _backtest_with_zone(NEVER_ZONE)
    assert (curve.gammas == 0).all()
    assert (curve.orders == BUY).all()
    ir = curve.investment_ratio
    assert ir[-1] > 0.999
    # once cash is exhausted the portfolio stays fully invested
    assert (ir[60:] > 0.99).all()
    assert curve.cash[-1] < curve.pa_values[-1] * 0.001


def test_backtest_abstaining_zones_mean_buy():
    curve, _ = _backtest_with_zone(None)
    assert (curve.gammas == 0).all()
    assert (curve.orders == BUY).all()


def test_backtest_order_counts_partition_dates():
    curve, _ = _backtest_with_zone(ALWAYS_ZONE)
    assert sum(curve.order_counts.values()) == len(curve.dates)


def test_backtest_deterministic():
    a, _ = _backtest_with_zone(ALWAYS_ZONE)
    b, _ = _backtest_with_zone(ALWAYS_ZONE)
    np.testing.assert_array_equal(a.pa_values, b.pa_values)
    np.testing.assert_array_equal(a.orders, b.orders)


def test_execution_lag_shifts_orders():
    dataset = _constant_dataset(800)
    anchors = np.arange(4, 800)
    values = {f"ind{i}": np.zeros(len(anchors)) for i in range(29)}
    panel = _fake_panel(anchors, values)
    zones = {name: ALWAYS_ZONE for name in values}
    lagged = run_backtest(dataset, panel, zones,
                          StrategyParams(mdd_threshold=0.1, sensitivity=70,
                                         execution_lag_days=3), 500)
    assert (lagged.orders[:3] == STAY).all()
    assert (lagged.orders[3:] == SELL).all()


def test_gamma_series_counts_only_calibrated(crash_pipeline):
    run = crash_pipeline
    t0s = np.arange(run.k_calibration + 100, run.dataset.n_days)
    zones_none = {name: None for name in run.zones}
    assert (gamma_series(run.panel, zones_none, t0s, 70) == 0).all()
    full = gamma_series(run.panel, run.zones, t0s, 70)
    np.testing.assert_array_equal(full, run.curve.gammas)


def test_vote_count_invariance():
    # decide depends on the count alone, never on which indicators flag
    for g in range(30):
        assert decide(g) == decide(g)
    flags_a = [True] * 5 + [False] * 24
    flags_b = [False] * 24 + [True] * 5
    assert gamma(flags_a) == gamma(flags_b)


def test_in_zone_counts_reject_gapped_anchors():
    values = np.zeros(50)
    anchors = np.concatenate([np.arange(25), np.arange(30, 55)])
    with pytest.raises(ValueError, match="consecutive"):
        in_zone_counts(values, anchors, ALWAYS_ZONE, np.array([40]), lookback=10)
