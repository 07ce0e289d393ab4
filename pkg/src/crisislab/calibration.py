"""Forward maximum drawdown labels and danger-zone calibration.

For each indicator, the in-sample scatter of (indicator value, forward
MDD at horizon H) is reduced to a *danger zone*: the fixed-width value
interval capturing the most points whose forward MDD reaches the chosen
threshold.  Points below the threshold are ignored; the width is 15% of
the value range after clipping outliers to the [1st, 99th] percentiles.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

ZONE_WIDTH_FRACTION = 0.15
CLIP_PERCENTILES = (1.0, 99.0)


class UncalibratedIndicatorError(ValueError):
    """No calibration point survives the MDD threshold for this indicator."""


@dataclass(frozen=True)
class HorizonConfig:
    """Forecast horizon H (trading days) and MDD threshold in (0, 1)."""

    horizon: int = 100
    mdd_threshold: float = 0.10

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1 day")
        if not 0 < self.mdd_threshold < 1:
            raise ValueError("MDD threshold must lie strictly between 0 and 1")


@dataclass
class DangerZone:
    """Indicator-value interval [lo, hi] flagging crisis risk."""

    lo: float
    hi: float
    support_count: int
    survivor_count: int = 0
    clipped_range: tuple[float, float] = (np.nan, np.nan)

    def contains(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        return (values >= self.lo) & (values <= self.hi)


def calibration_length(t: int) -> int:
    """In-sample span K = max(500, T + 50)."""
    if t < 1:
        raise ValueError("window length must be positive")
    return max(500, t + 50)


def forward_mdd(prices: np.ndarray, t0: int, horizon: int) -> float:
    """Maximum drawdown of ``prices`` over [t0, t0 + horizon].

    max over t0 <= t <= tau <= t0+H of (1 - P(tau)/P(t)), computed with a
    running peak in O(H); identical to the exhaustive pair scan.
    """
    prices = np.asarray(prices, dtype=float)
    if t0 < 0 or t0 + horizon >= len(prices):
        raise ValueError(
            f"forward window [{t0}, {t0 + horizon}] exceeds the series (length {len(prices)})")
    peak = prices[t0]
    worst = 0.0
    for tau in range(t0, t0 + horizon + 1):
        p = prices[tau]
        if p > peak:
            peak = p
        dd = 1.0 - p / peak
        if dd > worst:
            worst = dd
    return worst


def forward_mdd_series(prices: np.ndarray, anchors: np.ndarray, horizon: int) -> np.ndarray:
    prices = np.asarray(prices, dtype=float)
    return np.array([forward_mdd(prices, int(t0), horizon) for t0 in anchors])


@dataclass
class CalibrationPoints:
    """Scatter coordinates for one indicator over the calibration dates."""

    anchors: np.ndarray
    values: np.ndarray
    forward_mdds: np.ndarray

    def __post_init__(self):
        if not (len(self.anchors) == len(self.values) == len(self.forward_mdds)):
            raise ValueError("coordinate arrays must have equal length")


def find_danger_zone(values: np.ndarray, forward_mdds: np.ndarray,
                     mdd_threshold: float) -> DangerZone:
    """Place the fixed-width zone capturing the most surviving points.

    Values are clipped to the [1, 99] percentile range; the zone width
    is 15% of that range.  Candidate placements anchor the zone's lower
    edge at each surviving value and at the range endpoints, which
    always contains an optimum; ties resolve to the lowest placement.
    """
    values = np.asarray(values, dtype=float)
    forward_mdds = np.asarray(forward_mdds, dtype=float)
    if values.shape != forward_mdds.shape:
        raise ValueError("values and forward MDDs must align")

    p_lo, p_hi = np.percentile(values, CLIP_PERCENTILES)
    width = ZONE_WIDTH_FRACTION * (p_hi - p_lo)

    inside = (values >= p_lo) & (values <= p_hi)
    surviving = inside & (forward_mdds >= mdd_threshold)
    survivors = np.sort(values[surviving])
    if len(survivors) == 0:
        raise UncalibratedIndicatorError(
            f"no calibration point reaches MDD threshold {mdd_threshold}")

    if width <= 0:
        # all clipped values coincide; keep the interval non-empty
        width = max(abs(p_lo), 1.0) * 1e-12

    candidates = np.unique(np.concatenate([survivors, [p_lo, p_hi - width]]))
    best_lo, best_count = None, -1
    for lo in candidates:
        hi = lo + width
        count = int(np.searchsorted(survivors, hi, side="right")
                    - np.searchsorted(survivors, lo, side="left"))
        if count > best_count:
            best_lo, best_count = float(lo), count
    return DangerZone(lo=best_lo, hi=best_lo + width, support_count=best_count,
                      survivor_count=len(survivors),
                      clipped_range=(float(p_lo), float(p_hi)))


def calibrate_indicators(panel_values: dict[str, np.ndarray], anchors: np.ndarray,
                         index_prices: np.ndarray, k_calibration: int,
                         config: HorizonConfig) -> tuple[dict[str, DangerZone | None], np.ndarray, np.ndarray]:
    """Danger zones for every indicator over the in-sample anchors.

    Uses the anchors <= K (the K - T usable dates).  Indicators with no
    surviving points are mapped to None: they abstain from voting.
    Returns (zones, in-sample anchors, their forward MDDs).
    """
    anchors = np.asarray(anchors, dtype=int)
    mask = anchors <= k_calibration
    in_sample = anchors[mask]
    if len(in_sample) == 0:
        raise ValueError("no in-sample anchors; calibration period too short")
    mdds = forward_mdd_series(index_prices, in_sample, config.horizon)

    zones: dict[str, DangerZone | None] = {}
    for name, series in panel_values.items():
        points = CalibrationPoints(anchors=in_sample, values=series[mask],
                                   forward_mdds=mdds)
        try:
            zones[name] = find_danger_zone(points.values, points.forward_mdds,
                                           config.mdd_threshold)
        except UncalibratedIndicatorError:
            logger.warning("indicator %s: no point above MDD threshold %.3f, abstaining",
                           name, config.mdd_threshold)
            zones[name] = None
    return zones, in_sample, mdds
