"""Reproducible synthetic market panels with calm/agitated regimes.

Returns are one-factor equicorrelated draws per regime (the same
construction as the simulated references), integrated into prices; the
index is the equal-weight average of the component prices.  Volume,
market cap and leverage are lognormal statics with mild daily noise, so
the weighted matrix kinds have realistic, strictly positive weights.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd

from .market_data import Dataset, TradingCalendar
from .references import one_factor_window


@dataclass(frozen=True)
class Regime:
    """One market phase.

    ``drift`` is the total log-drift across the regime (spread evenly
    per day); ``volatility`` is the daily per-asset return scale.
    """

    length: int
    volatility: float
    rho: float
    tail: str = "gaussian"
    drift: float = 0.0

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("regime length must be positive")
        if self.volatility <= 0:
            raise ValueError("volatility must be positive")
        if not 0 <= self.rho < 1:
            raise ValueError("rho must be in [0, 1)")
        if self.tail not in ("gaussian", "student3"):
            raise ValueError(f"unknown tail {self.tail!r}")


@dataclass(frozen=True)
class ScenarioSpec:
    n: int
    regimes: tuple[Regime, ...]
    seed: int = 0
    base_price: float = 100.0
    riskless_rate: float = 0.01
    start_date: str = "2006-06-13"

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least 2 components")

    @property
    def days(self) -> int:
        return sum(r.length for r in self.regimes)

    def regime_bounds(self) -> list[tuple[int, int, Regime]]:
        """(start_day, end_day_exclusive, regime) spans over the calendar."""
        bounds, cursor = [], 0
        for regime in self.regimes:
            bounds.append((cursor, cursor + regime.length, regime))
            cursor += regime.length
        return bounds

    def to_jsonable(self) -> dict:
        payload = asdict(self)
        payload["regimes"] = [asdict(r) for r in self.regimes]
        return payload

    @classmethod
    def from_jsonable(cls, payload: dict) -> "ScenarioSpec":
        regimes = tuple(Regime(**r) for r in payload["regimes"])
        rest = {k: v for k, v in payload.items() if k != "regimes"}
        return cls(regimes=regimes, **rest)


def generate(spec: ScenarioSpec) -> Dataset:
    """Build a Dataset from a scenario, deterministic for a given seed.

    Regimes are integrated sequentially from a single RNG stream; the
    first calendar day anchors the prices and produces no return.
    """
    rng = np.random.default_rng(spec.seed)
    n, days = spec.n, spec.days

    returns = np.empty((n, days - 1))
    for start, stop, regime in spec.regime_bounds():
        # day 0 anchors prices; return at day d lives at index d-1
        lo = max(start, 1) - 1
        hi = stop - 1
        span = hi - lo
        if span <= 0:
            continue
        shocks = one_factor_window(rng, n, span, regime.rho, regime.tail)
        returns[:, lo:hi] = regime.drift / regime.length + regime.volatility * shocks

    base = spec.base_price * np.exp(0.05 * rng.standard_normal(n))
    prices = base[:, None] * np.exp(np.concatenate(
        [np.zeros((n, 1)), np.cumsum(returns, axis=1)], axis=1))
    index_price = prices.mean(axis=0)

    def static_with_noise(mean_log: float, spread: float, noise: float) -> np.ndarray:
        statics = np.exp(mean_log + spread * rng.standard_normal(n))
        wiggle = np.exp(noise * rng.standard_normal((n, days)))
        return statics[:, None] * wiggle

    volumes = static_with_noise(np.log(1e6), 1.0, 0.10)
    mcap = static_with_noise(np.log(1e9), 1.0, 0.05)
    leverage = static_with_noise(np.log(0.5), 0.5, 0.05)
    riskless = np.full(days, spec.riskless_rate)

    dates = pd.bdate_range(spec.start_date, periods=days)
    calendar = TradingCalendar(tuple(d.strftime("%Y-%m-%d") for d in dates))

    return Dataset(
        tickers=[f"SYN{i:03d}" for i in range(n)],
        calendar=calendar,
        prices=prices,
        volumes=volumes,
        mcap=mcap,
        leverage=leverage,
        index_price=index_price,
        riskless_rate=riskless,
    )


def crash_scenario(seed: int = 0, n: int = 80) -> ScenarioSpec:
    """Bundled two-crisis scenario for end-to-end tests and demos.

    A long correlation buildup precedes each crash: one whose drawdown
    the calibration window sees (so danger zones latch onto pre-crisis
    values) and one out-of-sample for the strategy to dodge.  Buildup
    volatility stays near calm levels so calm dates never cross the MDD
    threshold on noise alone, and the crash drift dominates its
    volatility so the passive drawdown is reliably deep.  Sized for
    N=80: window 88, calibration 500, trading starts at day 600.
    """
    regimes = (
        Regime(310, 0.0035, 0.25, "gaussian", 0.12),   # calm growth
        Regime(220, 0.0050, 0.75, "gaussian", -0.02),  # in-sample buildup
        Regime(50, 0.014, 0.85, "student3", -0.40),    # in-sample crash
        Regime(230, 0.0035, 0.25, "gaussian", 0.12),   # recovery into OOS
        Regime(240, 0.0050, 0.75, "gaussian", -0.02),  # out-of-sample buildup
        Regime(80, 0.014, 0.85, "student3", -0.40),    # out-of-sample crash
        Regime(600, 0.0035, 0.25, "gaussian", 0.30),   # recovery and growth
    )
    return ScenarioSpec(n=n, regimes=regimes, seed=seed, base_price=1500.0)


def crash_window(spec: ScenarioSpec, after_day: int) -> tuple[int, int]:
    """Calendar span of the first crash regime starting at/after ``after_day``."""
    for start, stop, regime in spec.regime_bounds():
        if start >= after_day and regime.drift < -0.2:
            return start, stop
    raise ValueError(f"scenario has no crash regime after day {after_day}")


def save_scenario(spec: ScenarioSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(spec.to_jsonable(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_scenario(path) -> ScenarioSpec:
    with open(path) as fh:
        return ScenarioSpec.from_jsonable(json.load(fh))
