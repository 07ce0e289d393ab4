"""Rolling return matrices and their eigenvalue spectra.

Five matrices are built at each anchor date t0 from the T return
observations dated t0-T .. t0-1:

* ``A``   scaled, row-centered log-returns (covariance pipeline),
* ``B0``  A with each row divided by its window standard deviation
          (pure correlation; rows have unit Euclidean norm),
* ``B1``  B0 weighted by relative traded volume,
* ``B2``  B0 weighted by relative market capitalization,
* ``B3``  B0 weighted by relative financial leverage.

The spectrum of the associated Gram matrix M M^T is read off the
singular values of M (lambda_i = sigma_i^2), which avoids forming the
matrix product.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

MATRIX_KINDS = ("A", "B0", "B1", "B2", "B3")

# matrix kind -> dataset weight field (None: unweighted)
_WEIGHT_FIELD = {"B1": "volumes", "B2": "mcap", "B3": "leverage"}


class SpectrumError(RuntimeError):
    """Raised when an eigenvalue extraction fails to converge."""


def window_length(n: int) -> int:
    """Rolling-window depth T = ceil(1.1 * N), in exact integer arithmetic."""
    if n < 2:
        raise ValueError(f"need at least 2 components, got {n}")
    return -(-11 * n // 10)


@dataclass(frozen=True)
class WindowSpec:
    """Window geometry: N components observed over T > N trading days."""

    n: int
    t: int

    def __post_init__(self):
        if self.t <= self.n:
            raise ValueError(f"window must be strictly rectangular: T={self.t} <= N={self.n}")

    @classmethod
    def for_components(cls, n: int) -> "WindowSpec":
        return cls(n=n, t=window_length(n))


@dataclass
class RollingMatrix:
    """An N x T matrix of one kind, anchored at calendar index ``anchor``."""

    kind: str
    anchor: int
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in MATRIX_KINDS:
            raise ValueError(f"unknown matrix kind {self.kind!r}")


@dataclass
class Spectrum:
    """Eigenvalues of a window Gram matrix, sorted descending."""

    eigenvalues: np.ndarray

    def __post_init__(self):
        ev = self.eigenvalues
        if ev.ndim != 1 or len(ev) == 0:
            raise ValueError("spectrum must be a non-empty vector")


def _window_slice(t0: int, t: int) -> slice:
    # return r(d) is stored at index d-1; window dates t0-T .. t0-1
    if t0 < t + 1:
        raise ValueError(f"anchor {t0} has fewer than T={t} return observations before it")
    return slice(t0 - t - 1, t0 - 1)


def build_A(panel, t0: int, spec: WindowSpec) -> RollingMatrix:
    """Scaled, centered return window: a_ij = (r_i(j) - rowmean) / sqrt(T)."""
    window = panel.returns[:, _window_slice(t0, spec.t)]
    if window.shape != (spec.n, spec.t):
        raise ValueError(f"window shape {window.shape} != {(spec.n, spec.t)}")
    centered = window - window.mean(axis=1, keepdims=True)
    return RollingMatrix(kind="A", anchor=t0, values=centered / np.sqrt(spec.t))


def build_weighted(base: RollingMatrix, weighting: str, dataset=None, t0: int | None = None) -> RollingMatrix:
    """Derive B0..B3 from an A matrix.

    ``weighting`` is one of none/volume/mcap/leverage.  Row scaling by
    the window standard deviation leaves each B0 row with unit Euclidean
    norm, so B0 B0^T is exactly a correlation matrix.  Weighted kinds
    multiply each B0 row by its normalized weight taken at the last
    window date t0-1 (latest information without lookahead).
    """
    if base.kind != "A":
        raise ValueError("weighted matrices derive from a kind-A base")
    kind = {"none": "B0", "volume": "B1", "mcap": "B2", "leverage": "B3"}.get(weighting)
    if kind is None:
        raise ValueError(f"unknown weighting {weighting!r}")

    norms = np.linalg.norm(base.values, axis=1, keepdims=True)
    if (norms == 0).any():
        dead = np.nonzero(norms[:, 0] == 0)[0]
        raise ValueError(f"zero row standard deviation for component rows {dead.tolist()}")
    b0 = base.values / norms
    if kind == "B0":
        return RollingMatrix(kind="B0", anchor=base.anchor, values=b0)

    if dataset is None:
        raise ValueError("weighted kinds need the dataset for the weight vectors")
    anchor = base.anchor if t0 is None else t0
    weights = getattr(dataset, _WEIGHT_FIELD[kind])[:, anchor - 1]
    total = weights.sum()
    if total <= 0:
        raise ValueError(f"{weighting} weights sum to {total} at anchor {anchor}")
    return RollingMatrix(kind=kind, anchor=base.anchor, values=b0 * (weights / total)[:, None])


def svd_eigenvalues(matrix: RollingMatrix | np.ndarray) -> Spectrum:
    """Eigenvalues of M M^T via singular values: lambda_i = sigma_i^2."""
    values = matrix.values if isinstance(matrix, RollingMatrix) else np.asarray(matrix, dtype=float)
    if values.ndim != 2:
        raise ValueError("rolling matrix must be 2-D")
    if not np.isfinite(values).all():
        raise ValueError("rolling matrix contains non-finite entries")
    try:
        sv = np.linalg.svd(values, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise SpectrumError(f"SVD did not converge for anchor "
                            f"{getattr(matrix, 'anchor', '?')}: {exc}") from exc
    return Spectrum(eigenvalues=sv * sv)


def spectral_stat(spectrum: Spectrum, stat: str) -> float:
    """radius = largest eigenvalue, trace = sum, frobenius = sum of squares."""
    ev = spectrum.eigenvalues
    if stat == "radius":
        return float(ev[0])
    if stat == "trace":
        return float(ev.sum())
    if stat == "frobenius":
        return float((ev * ev).sum())
    raise ValueError(f"unknown spectral statistic {stat!r}")


@dataclass
class SpectralHistory:
    """Per-kind eigenvalue history: each entry is len(anchors) x N."""

    anchors: np.ndarray
    eigenvalues: dict[str, np.ndarray]

    def pooled(self, kind: str, upto_anchor: int | None = None) -> np.ndarray:
        """All eigenvalues of one kind, optionally restricted to anchors <= upto_anchor."""
        ev = self.eigenvalues[kind]
        if upto_anchor is not None:
            ev = ev[self.anchors <= upto_anchor]
        return ev.ravel()


def compute_spectra(dataset, panel, spec: WindowSpec, anchors: np.ndarray,
                    kinds: tuple[str, ...] = MATRIX_KINDS) -> SpectralHistory:
    """Spectra of the requested matrix kinds at every anchor date.

    Anchors are calendar indices; each needs T returns strictly before
    it.  Results are independent per anchor, so evaluation order does
    not matter.
    """
    anchors = np.asarray(anchors, dtype=int)
    out = {kind: np.empty((len(anchors), spec.n)) for kind in kinds}
    needs_b = any(k != "A" for k in kinds)
    for row, t0 in enumerate(anchors):
        try:
            a = build_A(panel, int(t0), spec)
            if "A" in out:
                out["A"][row] = svd_eigenvalues(a).eigenvalues
            if needs_b:
                b0 = build_weighted(a, "none")
                if "B0" in out:
                    out["B0"][row] = svd_eigenvalues(b0).eigenvalues
                for weighting, kind in (("volume", "B1"), ("mcap", "B2"), ("leverage", "B3")):
                    if kind in out:
                        weighted = build_weighted(a, weighting, dataset, int(t0))
                        out[kind][row] = svd_eigenvalues(weighted).eigenvalues
        except (ValueError, SpectrumError) as exc:
            raise type(exc)(f"anchor index {t0}: {exc}") from exc
    return SpectralHistory(anchors=anchors, eigenvalues=out)


def dump_spectra_csv(history: SpectralHistory, calendar, out_dir: str | Path) -> list[Path]:
    """One CSV per matrix kind: anchor-date rows, lambda_1..lambda_N columns."""
    import pandas as pd

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dates = [calendar.dates[i] for i in history.anchors]
    written = []
    for kind, ev in history.eigenvalues.items():
        df = pd.DataFrame(ev, index=pd.Index(dates, name="date"),
                          columns=[f"lambda_{i + 1}" for i in range(ev.shape[1])])
        path = out_dir / f"spectra_{kind}.csv"
        df.to_csv(path, float_format="%.17g")
        written.append(path)
    return written
