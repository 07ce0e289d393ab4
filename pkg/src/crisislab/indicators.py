"""The 29 daily crisis indicators.

Alpha series (15): Hellinger distance between the binned spectrum of
each matrix kind and each of the three references.  Beta series (14):
spectral radius, trace and Frobenius statistic per matrix kind, minus
the correlation trace (B0), which is identically N and carries no
signal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import references as refs_mod
from . import spectra as spectra_mod
from .references import ReferenceSet, SpectralHistogram, hellinger
from .spectra import MATRIX_KINDS, Spectrum, SpectralHistory, WindowSpec, spectral_stat

ALPHA_DETAILS = refs_mod.REFERENCE_KINDS          # R1, R2, R3
BETA_DETAILS = ("radius", "trace", "frobenius")
EXCLUDED_BETA = ("B0", "trace")                   # constant, equal to N


@dataclass(frozen=True)
class IndicatorId:
    series: str        # alpha | beta
    matrix_kind: str   # A, B0..B3
    detail: str        # reference kind (alpha) or statistic (beta)

    def __post_init__(self):
        if self.series not in ("alpha", "beta"):
            raise ValueError(f"unknown series {self.series!r}")
        if self.matrix_kind not in MATRIX_KINDS:
            raise ValueError(f"unknown matrix kind {self.matrix_kind!r}")
        expected = ALPHA_DETAILS if self.series == "alpha" else BETA_DETAILS
        if self.detail not in expected:
            raise ValueError(f"{self.series} detail must be one of {expected}")
        if self.series == "beta" and (self.matrix_kind, self.detail) == EXCLUDED_BETA:
            raise ValueError("the correlation-trace indicator is excluded (constant N)")

    @property
    def name(self) -> str:
        return f"{self.series}_{self.detail}_{self.matrix_kind}"


def enumerate_indicators() -> list[IndicatorId]:
    """All 29 indicator ids: 15 alpha + 14 beta."""
    ids = [IndicatorId("alpha", kind, ref)
           for kind in MATRIX_KINDS for ref in ALPHA_DETAILS]
    ids += [IndicatorId("beta", kind, stat)
            for kind in MATRIX_KINDS for stat in BETA_DETAILS
            if (kind, stat) != EXCLUDED_BETA]
    return ids


@dataclass
class IndicatorPanel:
    """Daily values of the 29 indicators at each anchor (calendar index)."""

    anchors: np.ndarray
    values: dict[str, np.ndarray]
    reference_set: ReferenceSet | None = None
    dates: list[str] = field(default_factory=list)

    def series(self, indicator: IndicatorId | str) -> np.ndarray:
        name = indicator if isinstance(indicator, str) else indicator.name
        return self.values[name]

    def value_matrix(self) -> np.ndarray:
        return np.column_stack([self.values[i.name] for i in enumerate_indicators()])


def compute_panel(history: SpectralHistory, reference_set: ReferenceSet,
                  hellinger_mode: str = "mass",
                  calendar=None) -> IndicatorPanel:
    """Assemble the 29 series from a spectral history and references.

    Alpha values bin each date's spectrum on the matrix kind's edges and
    measure the Hellinger distance to the reference histogram; beta
    values are the spectral statistics.  Failures are re-raised with the
    anchor and indicator attached.
    """
    values: dict[str, np.ndarray] = {}
    anchors = history.anchors
    ids = enumerate_indicators()

    hist_cache: dict[str, list[SpectralHistogram]] = {}
    for ind in ids:
        ev_rows = history.eigenvalues[ind.matrix_kind]
        out = np.empty(len(anchors))
        try:
            if ind.series == "alpha":
                if ind.matrix_kind not in hist_cache:
                    edges = reference_set.edges[ind.matrix_kind]
                    hist_cache[ind.matrix_kind] = [
                        SpectralHistogram.from_samples(row, edges) for row in ev_rows
                    ]
                ref_hist = reference_set.histogram(ind.matrix_kind, ind.detail)
                for row, emp in enumerate(hist_cache[ind.matrix_kind]):
                    out[row] = hellinger(emp, ref_hist, mode=hellinger_mode)
            else:
                for row in range(len(anchors)):
                    out[row] = spectral_stat(Spectrum(ev_rows[row]), ind.detail)
        except Exception as exc:
            raise RuntimeError(f"indicator {ind.name} failed: {exc}") from exc
        values[ind.name] = out

    dates = [calendar.dates[i] for i in anchors] if calendar is not None else []
    return IndicatorPanel(anchors=anchors, values=values,
                          reference_set=reference_set, dates=dates)


def first_anchor(spec: WindowSpec) -> int:
    """First calendar index with a full window of prior returns."""
    return spec.t + 1


def compute_indicators(dataset, spec: WindowSpec, k_calibration: int,
                       rho_scope: str = "in_sample",
                       replications: int = refs_mod.DEFAULT_REPLICATIONS,
                       seed: int = 0, hellinger_mode: str = "mass",
                       last_anchor: int | None = None):
    """Full pipeline: spectra for every computable anchor, references
    from in-sample data only, then the indicator panel.

    Returns (panel, history).  ``rho_scope`` selects whether the mean
    long-term correlation feeding R2/R3 is estimated on the calibration
    period only (default, no lookahead) or the whole sample.
    """
    from .market_data import compute_returns

    panel = compute_returns(dataset)
    stop = dataset.n_days - 1 if last_anchor is None else last_anchor
    anchors = np.arange(first_anchor(spec), stop + 1)
    if len(anchors) == 0:
        raise ValueError("no computable anchors: panel shorter than the window")
    history = spectra_mod.compute_spectra(dataset, panel, spec, anchors)

    if rho_scope == "in_sample":
        rho_panel = type(panel)(returns=panel.returns[:, :k_calibration],
                                index_returns=panel.index_returns[:k_calibration])
    elif rho_scope == "full_sample":
        rho_panel = panel
    else:
        raise ValueError(f"unknown rho scope {rho_scope!r}")
    rho = refs_mod.mean_long_term_correlation(rho_panel)

    reference_set = refs_mod.build_reference_set(
        history, spec, rho=rho, replications=replications, seed=seed,
        upto_anchor=k_calibration)
    ind_panel = compute_panel(history, reference_set, hellinger_mode=hellinger_mode,
                              calendar=dataset.calendar)
    return ind_panel, history


def panel_to_csv(panel: IndicatorPanel, path) -> None:
    """Export the 29-column indicator panel (date rows)."""
    import pandas as pd

    names = [i.name for i in enumerate_indicators()]
    index = pd.Index(panel.dates if panel.dates else panel.anchors, name="date")
    df = pd.DataFrame({name: panel.values[name] for name in names}, index=index)
    from .market_data import CSV_FLOAT_FORMAT

    df.to_csv(path, float_format=CSV_FLOAT_FORMAT)
