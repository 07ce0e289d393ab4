"""Loading, validation and transformation of daily asset panels.

Expected input is one CSV per field (prices, volumes, market caps,
leverage ratios, index level, riskless rate), each with a ``date``
column of ISO-8601 trading days, a header row, '.' decimal separator
and empty cells for gaps.  A JSON manifest names the six files and the
ticker universe:

    {
      "tickers": ["AAA", "BBB", ...],
      "prices": "prices.csv",
      "volumes": "volumes.csv",
      "mcap": "mcap.csv",
      "leverage": "leverage.csv",
      "index": "index.csv",
      "riskless": "riskless.csv"
    }

File paths are resolved relative to the manifest.  The common calendar
is the intersection of the row dates of the six files; gaps inside a
series are forward-filled with the last valid value, a leading gap is a
fatal error.  Prices must be positive after filling; volumes, market
caps and leverage may be zero.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .spectra import window_length
from .calibration import calibration_length

logger = logging.getLogger(__name__)

MANIFEST_FIELDS = ("prices", "volumes", "mcap", "leverage", "index", "riskless")

# %.17g round-trips float64 exactly, so written panels reload bit-identical
CSV_FLOAT_FORMAT = "%.17g"

INDEX_COLUMN = "index"
RISKLESS_COLUMN = "rate"


class DataValidationError(ValueError):
    """Raised when an input panel violates the data contract."""


@dataclass(frozen=True)
class TradingCalendar:
    """Ordered list of trading days (ISO dates), strictly increasing."""

    dates: tuple[str, ...]

    def __post_init__(self):
        if len(self.dates) >= 2:
            arr = np.array(self.dates, dtype="datetime64[D]")
            if not (np.diff(arr).astype(int) > 0).all():
                raise DataValidationError("calendar dates must be strictly increasing with no duplicates")

    def __len__(self) -> int:
        return len(self.dates)

    def index_of(self, date: str) -> int:
        try:
            return self.dates.index(date)
        except ValueError:
            raise KeyError(f"{date} is not a trading day of this calendar") from None


@dataclass(frozen=True)
class AssetSeries:
    """One component's aligned daily series (views into the panel)."""

    ticker: str
    price: np.ndarray
    volume: np.ndarray
    market_cap: np.ndarray
    leverage: np.ndarray


@dataclass
class Dataset:
    """Aligned daily panel of N components plus index and riskless rate.

    Component arrays are N x D (rows follow ``tickers``); ``index_price``
    and ``riskless_rate`` are length D.  Arrays are frozen after load so
    the dataset can be shared across concurrent readers.
    """

    tickers: list[str]
    calendar: TradingCalendar
    prices: np.ndarray
    volumes: np.ndarray
    mcap: np.ndarray
    leverage: np.ndarray
    index_price: np.ndarray
    riskless_rate: np.ndarray
    fill_counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        n, d = self.prices.shape
        if n < 2:
            raise DataValidationError(f"need at least 2 components, got {n}")
        for name in ("prices", "volumes", "mcap", "leverage"):
            arr = getattr(self, name)
            if arr.shape != (n, d):
                raise DataValidationError(f"{name} shape {arr.shape} != {(n, d)}")
        if self.index_price.shape != (d,) or self.riskless_rate.shape != (d,):
            raise DataValidationError("index/riskless length does not match the calendar")
        if len(self.calendar) != d:
            raise DataValidationError("calendar length does not match the panel")
        if not (self.prices > 0).all():
            raise DataValidationError("component prices must be positive after filling")
        if not (self.index_price > 0).all():
            raise DataValidationError("index prices must be positive")
        for arr in (self.prices, self.volumes, self.mcap, self.leverage,
                    self.index_price, self.riskless_rate):
            arr.setflags(write=False)

    @property
    def n_components(self) -> int:
        return self.prices.shape[0]

    @property
    def n_days(self) -> int:
        return self.prices.shape[1]

    def asset(self, ticker: str) -> AssetSeries:
        try:
            row = self.tickers.index(ticker)
        except ValueError:
            raise KeyError(f"unknown ticker {ticker!r}") from None
        return AssetSeries(ticker=ticker, price=self.prices[row],
                           volume=self.volumes[row], market_cap=self.mcap[row],
                           leverage=self.leverage[row])


@dataclass
class ReturnsPanel:
    """Daily log-returns of the components (N x D-1) and the index (D-1)."""

    returns: np.ndarray
    index_returns: np.ndarray

    def __post_init__(self):
        if self.returns.shape[1] != self.index_returns.shape[0]:
            raise DataValidationError("component and index returns must cover the same dates")
        if not np.isfinite(self.returns).all() or not np.isfinite(self.index_returns).all():
            raise DataValidationError("returns contain non-finite entries")


def forward_fill(values: np.ndarray, label: str = "series") -> tuple[np.ndarray, int]:
    """Replace NaN gaps with the most recent prior value.

    Returns the filled copy and the number of cells filled.  A leading
    gap has no prior value to carry and raises.
    """
    values = np.asarray(values, dtype=float)
    gaps = np.isnan(values)
    if not gaps.any():
        return values.copy(), 0
    if gaps[0]:
        raise DataValidationError(f"{label}: first entry is missing, no prior value to carry")
    idx = np.arange(len(values))
    last_valid = np.maximum.accumulate(np.where(~gaps, idx, 0))
    return values[last_valid], int(gaps.sum())


def log_returns(prices: np.ndarray) -> np.ndarray:
    """Daily log-returns log(P_t / P_{t-1}); output is one shorter than the input."""
    prices = np.asarray(prices, dtype=float)
    if prices.ndim == 1:
        prices = prices[None, :]
        squeeze = True
    else:
        squeeze = False
    if prices.shape[-1] < 2:
        raise DataValidationError("need at least two prices to form a return")
    if not (prices > 0).all():
        raise DataValidationError("log-returns require positive prices")
    out = np.diff(np.log(prices), axis=-1)
    return out[0] if squeeze else out


def compute_returns(dataset: Dataset) -> ReturnsPanel:
    return ReturnsPanel(
        returns=log_returns(dataset.prices),
        index_returns=log_returns(dataset.index_price),
    )


def _read_panel_csv(path: Path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"date": str}, float_precision="round_trip")
    if "date" not in df.columns:
        raise DataValidationError(f"{path.name}: missing mandatory 'date' column")
    if df["date"].duplicated().any():
        raise DataValidationError(f"{path.name}: duplicated dates")
    df = df.set_index("date").sort_index()
    return df


def load_dataset(manifest_path: str | Path, horizon: int = 100,
                 check_length: bool = True) -> Dataset:
    """Load the six-CSV panel named by a JSON manifest into a Dataset.

    The calendar is the intersection of all files' row dates.  Each
    series is forward-filled; fill counts are recorded per series on
    ``dataset.fill_counts``.  When ``check_length`` is set the panel
    must be at least K + H + 1 days long (K from the component count),
    otherwise the shortfall is reported.
    """
    manifest_path = Path(manifest_path)
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    missing = [k for k in MANIFEST_FIELDS + ("tickers",) if k not in manifest]
    if missing:
        raise DataValidationError(f"dataset manifest is missing fields: {missing}")
    tickers = list(manifest["tickers"])
    base = manifest_path.parent

    frames = {name: _read_panel_csv(base / manifest[name]) for name in MANIFEST_FIELDS}

    for name in ("prices", "volumes", "mcap", "leverage"):
        absent = [t for t in tickers if t not in frames[name].columns]
        if absent:
            raise DataValidationError(f"{name} file is missing columns for tickers {absent}")
    if INDEX_COLUMN not in frames["index"].columns:
        raise DataValidationError(f"index file is missing the '{INDEX_COLUMN}' column")
    if RISKLESS_COLUMN not in frames["riskless"].columns:
        raise DataValidationError(f"riskless file is missing the '{RISKLESS_COLUMN}' column")

    common = None
    for df in frames.values():
        common = df.index if common is None else common.intersection(df.index)
    if common is None or len(common) == 0:
        raise DataValidationError("calendar intersection of the six files is empty")
    calendar = TradingCalendar(tuple(sorted(common)))
    dates = list(calendar.dates)

    fill_counts: dict[str, int] = {}

    def fill_matrix(name: str, columns: list[str]) -> np.ndarray:
        df = frames[name].loc[dates, columns]
        out = np.empty((len(columns), len(dates)))
        for i, col in enumerate(columns):
            filled, count = forward_fill(df[col].to_numpy(dtype=float), f"{name}:{col}")
            out[i] = filled
            if count:
                fill_counts[f"{name}:{col}"] = count
        return out

    prices = fill_matrix("prices", tickers)
    volumes = fill_matrix("volumes", tickers)
    mcap = fill_matrix("mcap", tickers)
    leverage = fill_matrix("leverage", tickers)
    index_price = fill_matrix("index", [INDEX_COLUMN])[0]
    riskless = fill_matrix("riskless", [RISKLESS_COLUMN])[0]

    if not (prices > 0).all():
        bad = [tickers[i] for i in np.unique(np.argwhere(prices <= 0)[:, 0])]
        raise DataValidationError(f"non-positive prices after filling for {bad}")

    if check_length:
        n = len(tickers)
        t_win = window_length(n)
        k_cal = calibration_length(t_win)
        need = k_cal + horizon + 1
        if len(dates) < need:
            raise DataValidationError(
                f"panel has {len(dates)} trading days but needs at least {need} "
                f"(K={k_cal} + H={horizon} + 1); short by {need - len(dates)}"
            )

    total_fills = sum(fill_counts.values())
    if total_fills:
        logger.info("forward-filled %d gaps across %d series", total_fills, len(fill_counts))

    return Dataset(
        tickers=tickers,
        calendar=calendar,
        prices=prices,
        volumes=volumes,
        mcap=mcap,
        leverage=leverage,
        index_price=index_price,
        riskless_rate=riskless,
        fill_counts=fill_counts,
    )


def write_dataset_csvs(dataset: Dataset, out_dir: str | Path,
                       manifest_name: str = "dataset_manifest.json") -> Path:
    """Write a Dataset back out in the six-CSV-plus-manifest layout.

    Returns the manifest path.  Used by the synthetic generator and by
    round-trip tests; output is deterministic for a given dataset.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dates = list(dataset.calendar.dates)

    def write(name: str, columns: list[str], matrix: np.ndarray):
        df = pd.DataFrame(matrix.T, index=pd.Index(dates, name="date"), columns=columns)
        df.to_csv(out_dir / f"{name}.csv", float_format=CSV_FLOAT_FORMAT)

    write("prices", dataset.tickers, dataset.prices)
    write("volumes", dataset.tickers, dataset.volumes)
    write("mcap", dataset.tickers, dataset.mcap)
    write("leverage", dataset.tickers, dataset.leverage)
    write("index", [INDEX_COLUMN], dataset.index_price[None, :])
    write("riskless", [RISKLESS_COLUMN], dataset.riskless_rate[None, :])

    manifest = {
        "tickers": dataset.tickers,
        "prices": "prices.csv",
        "volumes": "volumes.csv",
        "mcap": "mcap.csv",
        "leverage": "leverage.csv",
        "index": "index.csv",
        "riskless": "riskless.csv",
    }
    manifest_path = out_dir / manifest_name
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path
