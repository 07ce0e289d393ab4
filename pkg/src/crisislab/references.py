"""Reference spectral distributions and the Hellinger metric.

Three references are compared against the empirical spectra:

* ``R1`` calm analytic reference: the Marchenko-Pastur law for the
  eigenvalues of a correlation matrix built from an iid Gaussian window,
* ``R2`` calm simulated reference: Gaussian windows equicorrelated at
  the panel's mean long-term correlation,
* ``R3`` agitated simulated reference: Student-t(3) windows (variance
  normalized to 1) correlated the same way.

Simulated windows run through the same centering/scaling/SVD pipeline
as the market data, and the pooled eigenvalues are binned into a
histogram whose top bin absorbs any overflow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

SQRT2 = np.sqrt(2.0)

REFERENCE_KINDS = ("R1", "R2", "R3")

DEFAULT_BINS = 100
DEFAULT_CAP_PERCENTILE = 99.5
DEFAULT_REPLICATIONS = 200


@dataclass
class SpectralHistogram:
    """Binned eigenvalue density: B+1 ascending edges and B masses summing to 1.

    Values above the last edge are absorbed by the top bin when building
    from samples.
    """

    edges: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        self.masses = np.asarray(self.masses, dtype=float)
        if len(self.edges) != len(self.masses) + 1:
            raise ValueError("need B+1 edges for B masses")
        if not (np.diff(self.edges) > 0).all():
            raise ValueError("edges must be strictly increasing")
        if (self.masses < 0).any():
            raise ValueError("masses must be non-negative")
        total = self.masses.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"masses must sum to 1, got {total}")

    @classmethod
    def from_samples(cls, samples: np.ndarray, edges: np.ndarray) -> "SpectralHistogram":
        samples = np.asarray(samples, dtype=float).ravel()
        if len(samples) == 0:
            raise ValueError("cannot bin an empty sample")
        counts, _ = np.histogram(samples, bins=edges)
        counts = counts.astype(float)
        counts[-1] += (samples > edges[-1]).sum()  # overflow into top bin
        counts[0] += (samples < edges[0]).sum()
        masses = counts / counts.sum()
        # kill the float round-off so the sum-to-1 invariant is exact
        masses /= masses.sum()
        return cls(edges=edges, masses=masses)


def default_bin_edges(pooled_eigenvalues: np.ndarray, n_bins: int = DEFAULT_BINS,
                      cap_percentile: float = DEFAULT_CAP_PERCENTILE) -> np.ndarray:
    """Equal-width edges from 0 to the pooled-sample percentile cap.

    The market-mode eigenvalue dwarfs the bulk, so the cap keeps bulk
    resolution; anything above it lands in the absorbing top bin.
    """
    pooled = np.asarray(pooled_eigenvalues, dtype=float).ravel()
    if len(pooled) == 0:
        raise ValueError("no eigenvalues to derive bin edges from")
    cap = float(np.percentile(pooled, cap_percentile))
    if cap <= 0:
        cap = max(float(pooled.max()), 1e-12)
    return np.linspace(0.0, cap, n_bins + 1)


def hellinger(p: SpectralHistogram, q: SpectralHistogram, mode: str = "mass") -> float:
    """Hellinger distance between two histograms on identical edges.

    ``mass`` is the probability-normalized form, bounded by 1.
    ``density`` computes the same sum on mass/binwidth values instead,
    which blows the scale up by 1/sqrt(binwidth); useful only for
    eyeballing against unnormalized plots, calibration does not care.
    """
    if p.edges.shape != q.edges.shape or not np.array_equal(p.edges, q.edges):
        raise ValueError("histograms must share identical bin edges")
    if mode == "mass":
        pm, qm = p.masses, q.masses
    elif mode == "density":
        widths = np.diff(p.edges)
        pm, qm = p.masses / widths, q.masses / widths
    else:
        raise ValueError(f"unknown hellinger mode {mode!r}")
    return float(np.sqrt(np.sum((np.sqrt(pm) - np.sqrt(qm)) ** 2)) / SQRT2)


def marchenko_pastur_support(q: float, sigma2: float = 1.0) -> tuple[float, float]:
    """Support endpoints lambda_± = sigma^2 (1 ± sqrt(q))^2 for q = N/T."""
    if not 0 < q < 1:
        raise ValueError(f"aspect ratio q must be in (0, 1), got {q}")
    root = np.sqrt(q)
    return sigma2 * (1 - root) ** 2, sigma2 * (1 + root) ** 2


def marchenko_pastur_histogram(n: int, t: int, sigma2: float,
                               edges: np.ndarray) -> SpectralHistogram:
    """Marchenko-Pastur bin masses via adaptive quadrature of the density.

    Density (q = N/T < 1):  f(x) = sqrt((l+ - x)(x - l-)) / (2 pi sigma^2 q x)
    on [l-, l+].  Mass outside the support is exactly zero; mass above
    the last edge is folded into the top bin.
    """
    q = n / t
    lo, hi = marchenko_pastur_support(q, sigma2)
    edges = np.asarray(edges, dtype=float)

    def density(x: float) -> float:
        return np.sqrt((hi - x) * (x - lo)) / (2 * np.pi * sigma2 * q * x)

    masses = np.zeros(len(edges) - 1)
    for b in range(len(edges) - 1):
        a, c = max(edges[b], lo), min(edges[b + 1], hi)
        if c > a:
            masses[b], _ = integrate.quad(density, a, c, limit=200)
    if edges[-1] < hi:  # overflow into top bin
        tail, _ = integrate.quad(density, max(edges[-1], lo), hi, limit=200)
        masses[-1] += tail
    total = masses.sum()
    if total <= 0:
        raise ValueError("MP support does not intersect the supplied edges")
    return SpectralHistogram(edges=edges, masses=masses / total)


def mean_long_term_correlation(panel) -> float:
    """Mean off-diagonal Pearson correlation of the full-sample returns.

    Clamped to [0, 0.99]; for major index universes this typically sits
    around 50%.
    """
    returns = panel.returns
    n, obs = returns.shape
    if n < 2:
        raise ValueError("need at least 2 assets")
    if obs < 30:
        raise ValueError(f"need at least 30 observations, got {obs}")
    if (returns.std(axis=1) == 0).any():
        raise ValueError("constant asset series has no defined correlation")
    corr = np.corrcoef(returns)
    iu = np.triu_indices(n, k=1)
    rho = float(corr[iu].mean())
    return float(np.clip(rho, 0.0, 0.99))


def one_factor_window(rng: np.random.Generator, n: int, t: int, rho: float,
                      tail: str) -> np.ndarray:
    """One N x T window of unit-variance equicorrelated draws.

    x_ij = sqrt(rho) z_j + sqrt(1-rho) eps_ij with z per column; draws
    are standard normal (``gaussian``) or Student t(3) scaled by 1/sqrt(3)
    to unit variance (``student3``).
    """
    if tail == "gaussian":
        z = rng.standard_normal(t)
        eps = rng.standard_normal((n, t))
    elif tail == "student3":
        z = rng.standard_t(3, size=t) / np.sqrt(3.0)
        eps = rng.standard_t(3, size=(n, t)) / np.sqrt(3.0)
    else:
        raise ValueError(f"unknown tail {tail!r}")
    return np.sqrt(rho) * z[None, :] + np.sqrt(1.0 - rho) * eps


@dataclass
class ReferenceDistribution:
    """One reference histogram plus the parameters that reproduce it."""

    kind: str
    histogram: SpectralHistogram
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in REFERENCE_KINDS:
            raise ValueError(f"unknown reference kind {self.kind!r}")


def simulate_pooled_eigenvalues(kind: str, n: int, t: int, rho: float,
                                replications: int, seed: int) -> np.ndarray:
    """Pooled eigenvalues of ``replications`` simulated windows.

    Each window is drawn from an independent RNG substream of the master
    seed and processed exactly like a market window (center, scale by
    1/sqrt(T), SVD), so pooling is replication-order invariant and the
    result is deterministic for a given seed.
    """
    from .spectra import svd_eigenvalues  # local import avoids cycle at module load

    if replications < 1:
        raise ValueError("need at least one replication")
    if not 0 <= rho < 1:
        raise ValueError(f"rho must be in [0, 1), got {rho}")
    tail = {"R2": "gaussian", "R3": "student3"}.get(kind)
    if tail is None:
        raise ValueError(f"only R2/R3 are simulated, got {kind!r}")

    streams = np.random.SeedSequence(seed).spawn(replications)
    pooled = np.empty((replications, n))
    for r, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        window = one_factor_window(rng, n, t, rho, tail)
        centered = window - window.mean(axis=1, keepdims=True)
        pooled[r] = svd_eigenvalues(centered / np.sqrt(t)).eigenvalues
    return pooled.ravel()


def simulate_reference(kind: str, n: int, t: int, rho: float, replications: int,
                       seed: int, edges: np.ndarray) -> ReferenceDistribution:
    """R2/R3 reference: simulate, pool, and bin on the supplied edges."""
    pooled = simulate_pooled_eigenvalues(kind, n, t, rho, replications, seed)
    return ReferenceDistribution(
        kind=kind,
        histogram=SpectralHistogram.from_samples(pooled, np.asarray(edges, dtype=float)),
        params={"n": n, "t": t, "rho": rho, "replications": replications, "seed": seed},
    )


def analytic_reference(n: int, t: int, sigma2: float, edges: np.ndarray) -> ReferenceDistribution:
    """R1 reference: Marchenko-Pastur masses on the supplied edges."""
    return ReferenceDistribution(
        kind="R1",
        histogram=marchenko_pastur_histogram(n, t, sigma2, edges),
        params={"q": n / t, "sigma2": sigma2, "n": n, "t": t},
    )


@dataclass
class ReferenceSet:
    """References per matrix kind, all binned on that kind's edges."""

    rho: float
    replications: int
    seed: int
    sigma2: float
    edges: dict[str, np.ndarray]
    references: dict[str, dict[str, ReferenceDistribution]]

    def histogram(self, matrix_kind: str, ref_kind: str) -> SpectralHistogram:
        return self.references[matrix_kind][ref_kind].histogram

    def to_jsonable(self) -> dict:
        entries = []
        for matrix_kind, refs in sorted(self.references.items()):
            for ref_kind, ref in sorted(refs.items()):
                entries.append({
                    "matrix_kind": matrix_kind,
                    "kind": ref_kind,
                    "params": {k: (v if not isinstance(v, np.generic) else v.item())
                               for k, v in ref.params.items()},
                    "edges": ref.histogram.edges.tolist(),
                    "masses": ref.histogram.masses.tolist(),
                })
        return {
            "rho": self.rho,
            "replications": self.replications,
            "seed": self.seed,
            "sigma2": self.sigma2,
            "entries": entries,
        }

    @classmethod
    def from_jsonable(cls, payload: dict) -> "ReferenceSet":
        references: dict[str, dict[str, ReferenceDistribution]] = {}
        edges: dict[str, np.ndarray] = {}
        for entry in payload["entries"]:
            hist = SpectralHistogram(edges=np.array(entry["edges"]),
                                     masses=np.array(entry["masses"]))
            ref = ReferenceDistribution(kind=entry["kind"], histogram=hist,
                                        params=entry["params"])
            references.setdefault(entry["matrix_kind"], {})[entry["kind"]] = ref
            edges[entry["matrix_kind"]] = hist.edges
        return cls(rho=payload["rho"], replications=payload["replications"],
                   seed=payload["seed"], sigma2=payload["sigma2"],
                   edges=edges, references=references)


def build_reference_set(history, spec, rho: float, replications: int = DEFAULT_REPLICATIONS,
                        seed: int = 0, sigma2: float = 1.0,
                        upto_anchor: int | None = None,
                        n_bins: int = DEFAULT_BINS) -> ReferenceSet:
    """Build R1/R2/R3 per matrix kind on that kind's in-sample bin edges.

    ``upto_anchor`` restricts the edge pooling to in-sample anchors so
    no out-of-sample information reaches the references.  The R2/R3
    eigenvalue pools are simulated once and re-binned per kind.
    """
    pooled_sim = {
        kind: simulate_pooled_eigenvalues(kind, spec.n, spec.t, rho, replications, seed + off)
        for off, kind in ((0, "R2"), (1, "R3"))
    }
    edges = {}
    references: dict[str, dict[str, ReferenceDistribution]] = {}
    for matrix_kind in history.eigenvalues:
        kind_edges = default_bin_edges(history.pooled(matrix_kind, upto_anchor), n_bins)
        edges[matrix_kind] = kind_edges
        references[matrix_kind] = {
            "R1": analytic_reference(spec.n, spec.t, sigma2, kind_edges),
            "R2": ReferenceDistribution(
                kind="R2",
                histogram=SpectralHistogram.from_samples(pooled_sim["R2"], kind_edges),
                params={"n": spec.n, "t": spec.t, "rho": rho,
                        "replications": replications, "seed": seed},
            ),
            "R3": ReferenceDistribution(
                kind="R3",
                histogram=SpectralHistogram.from_samples(pooled_sim["R3"], kind_edges),
                params={"n": spec.n, "t": spec.t, "rho": rho,
                        "replications": replications, "seed": seed + 1},
            ),
        }
    return ReferenceSet(rho=rho, replications=replications, seed=seed, sigma2=sigma2,
                        edges=edges, references=references)
