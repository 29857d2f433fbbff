"""Unfolding, gap and pair-correlation statistics, and reference laws."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from .report import _plain
from .rng import stream
from .spectral import SemicircleModel, SpectralData

EDGE_ALPHA = 0.1


class UnfoldingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GapSample:
    """Unfolded nearest-neighbour gaps ``N rho(gamma_k) (lambda_{k+1} - lambda_k)``.

    ``window`` holds the 1-based index range ``(lo, hi)`` of the eigenvalues
    used; the gaps are those between consecutive indices in it.
    """

    gaps: np.ndarray
    window: tuple = (0, 0)
    source: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.gaps.size)

    @property
    def mean(self) -> float:
        return float(np.mean(self.gaps))

    def check(self, lo=0.8, hi=1.2):
        if np.any(self.gaps < 0):
            raise UnfoldingError("negative gap; eigenvalues not sorted")
        if not lo <= self.mean <= hi:
            raise UnfoldingError(f"mean unfolded gap {self.mean:.3f} outside [{lo}, {hi}]")
        return self

    @staticmethod
    def pool(samples, source=None) -> "GapSample":
        samples = list(samples)
        gaps = np.concatenate([s.gaps for s in samples]) if samples else np.empty(0)
        window = samples[0].window if samples else (0, 0)
        return GapSample(gaps, window, dict(source or {}, pooled=len(samples)))


def bulk_window(N: int, alpha: float = EDGE_ALPHA):
    """Default 1-based bulk index window ``[ceil(alpha N), floor((1 - alpha) N)]``."""
    return max(1, math.ceil(alpha * N)), math.floor((1 - alpha) * N)


def _eigs(lam):
    if isinstance(lam, SpectralData):
        return lam.eigenvalues
    return np.sort(np.asarray(lam, dtype=float))


def unfold(lam, model=None, window=None, alpha: float = EDGE_ALPHA, N=None) -> GapSample:
    """Unfold consecutive gaps inside a bulk index window.

    Parameters
    ----------
    lam : SpectralData or array
        Eigenvalues (sorted on input or sorted here).
    model : object with ``density`` and ``classical_locations``
        Limiting density; defaults to the semicircle.
    window : (lo, hi), optional
        1-based inclusive eigenvalue indices.  Must lie in
        ``[alpha N, (1 - alpha) N]``; ``alpha=0`` disables the edge check.
    N : int, optional
        Normalization size if ``lam`` is a sub-configuration.
    """
    lam = _eigs(lam)
    model = SemicircleModel() if model is None else model
    N = lam.size if N is None else N
    if window is None:
        window = bulk_window(N, alpha)
    lo, hi = int(window[0]), int(window[1])
    if lo < 1 or hi > lam.size or hi <= lo:
        raise UnfoldingError(f"window {window} invalid for {lam.size} eigenvalues")
    if lo < alpha * N or hi > (1 - alpha) * N:
        raise UnfoldingError(f"window {window} touches the edge bands (alpha={alpha}, N={N})")
    k = np.arange(lo, hi)
    gam = model.classical_locations(N)[k - 1]
    gaps = N * model.density(gam) * (lam[k] - lam[k - 1])
    return GapSample(np.asarray(gaps, float), (lo, hi), {"N": N})


def unfold_points(lam, model=None, window=None, alpha: float = EDGE_ALPHA, N=None) -> np.ndarray:
    """Unfolded positions ``N n(lambda_k)`` for indices in a bulk window."""
    lam = _eigs(lam)
    model = SemicircleModel() if model is None else model
    N = lam.size if N is None else N
    lo, hi = bulk_window(N, alpha) if window is None else window
    return N * model.cdf(lam[lo - 1:hi])


# reference laws

def surmise_pdf(s, beta: int = 1):
    """Nearest-gap density of the 2x2 Gaussian ensemble with unit mean.

    ``beta=1`` is ``(pi s / 2) exp(-pi s^2 / 4)``; ``beta=2`` is the unitary
    analogue ``(32 / pi^2) s^2 exp(-4 s^2 / pi)``.
    """
    s = np.asarray(s, dtype=float)
    if beta == 1:
        out = np.pi * s / 2 * np.exp(-np.pi * s**2 / 4)
    elif beta == 2:
        out = 32 / np.pi**2 * s**2 * np.exp(-4 * s**2 / np.pi)
    else:
        raise ValueError("beta must be 1 or 2")
    return np.where(s >= 0, out, 0.0)


def surmise_cdf(s, beta: int = 1):
    s = np.maximum(np.asarray(s, dtype=float), 0.0)
    if beta == 1:
        return -np.expm1(-np.pi * s**2 / 4)
    if beta == 2:
        a = 2 * s / np.sqrt(np.pi)
        return stats.norm.cdf(a * np.sqrt(2)) * 2 - 1 - 2 * a / np.sqrt(np.pi) * np.exp(-a**2)
    raise ValueError("beta must be 1 or 2")


def sine_kernel(r):
    """``sin(pi r) / (pi r)``, equal to 1 at 0."""
    return np.sinc(np.asarray(r, dtype=float))


def npoint_correlation(alphas) -> float:
    """``det[K(alpha_i - alpha_j)]`` for the sine kernel."""
    a = np.asarray(alphas, dtype=float)
    return float(np.linalg.det(sine_kernel(a[:, None] - a[None, :])))


@dataclass(frozen=True)
class ReferenceLaw:
    """A reference distribution on ``[lo, hi]`` given by its CDF and density."""

    cdf: object
    pdf: object
    name: str = "reference"
    lo: float = 0.0
    hi: float = np.inf

    def sample(self, rng, size):
        """Inverse-CDF sampling by bracketing root search on a dense table."""
        u = rng.random(size)
        top = self.hi if np.isfinite(self.hi) else self.lo + 50.0
        grid = np.linspace(self.lo, top, 20001)
        return np.interp(u, self.cdf(grid), grid)

    def moments(self):
        m1 = integrate.quad(lambda s: s * self.pdf(s), self.lo, self.hi, limit=200)[0]
        m2 = integrate.quad(lambda s: s * s * self.pdf(s), self.lo, self.hi, limit=200)[0]
        return m1, m2 - m1**2


SURMISE = ReferenceLaw(surmise_cdf, surmise_pdf, "surmise-goe")
SURMISE_GUE = ReferenceLaw(lambda s: surmise_cdf(s, 2), lambda s: surmise_pdf(s, 2), "surmise-gue")
EXPONENTIAL = ReferenceLaw(lambda s: -np.expm1(-np.maximum(s, 0)), lambda s: np.exp(-s) * (s >= 0),
                           "poisson")


def sample_surmise(rng, size, beta: int = 1):
    """Exact draws from the unit-mean 2x2 gap law."""
    if beta == 1:
        return np.sqrt(-4 * np.log1p(-rng.random(size)) / np.pi)
    if beta == 2:
        return np.sqrt(rng.chisquare(3, size) * np.pi / 8)
    raise ValueError("beta must be 1 or 2")


@dataclass
class ComparisonReport:
    """Distance between an empirical sample and a reference law or second sample."""

    ks: float
    l1: float
    mean_delta: float
    var_delta: float
    n: int
    n_ref: int | None = None
    ks_ci: tuple = (math.nan, math.nan)
    l1_ci: tuple = (math.nan, math.nan)
    n_boot: int = 0

    @property
    def ks_radius(self) -> float:
        return (self.ks_ci[1] - self.ks_ci[0]) / 2

    def to_dict(self):
        return _plain(dict(ks=self.ks, l1=self.l1, mean_delta=self.mean_delta, var_delta=self.var_delta,
                           n=self.n, n_ref=self.n_ref, ks_ci=self.ks_ci, l1_ci=self.l1_ci,
                           ks_radius=self.ks_radius, n_boot=self.n_boot))


def _values(x):
    return np.asarray(x.gaps if isinstance(x, GapSample) else x, dtype=float).ravel()


def _l1_vs_law(x, law, edges):
    emp = np.histogram(x, edges)[0] / x.size
    F = law.cdf(edges)
    ref = np.diff(F)
    tail = abs(np.mean((x < edges[0]) | (x > edges[-1])) - (F[0] + 1 - F[-1]))
    return float(np.sum(np.abs(emp - ref)) + tail)


def _l1_two(x, y, edges):
    return float(np.sum(np.abs(np.histogram(x, edges)[0] / x.size - np.histogram(y, edges)[0] / y.size)))


def distribution_distance(sample, reference, bins: int = 40, n_boot: int = 200, seed: int = 0,
                          level: float = 0.95) -> ComparisonReport:
    """KS and binned L1 distance with percentile bootstrap intervals.

    ``reference`` is a :class:`ReferenceLaw`, a callable CDF, or another
    sample (two-sample mode, symmetric in its arguments).  The binned L1 is
    the sum over bins of absolute differences in probability mass, so it lies
    in ``[0, 2]``; bins span the pooled data range.
    """
    x = _values(sample)
    if x.size == 0:
        raise ValueError("empty sample")
    rng = stream(seed, 0xB0)
    q = ((1 - level) / 2 * 100, (1 + level) / 2 * 100)
    if callable(reference) and not isinstance(reference, ReferenceLaw):
        reference = ReferenceLaw(reference, None)
    if isinstance(reference, ReferenceLaw):
        lo = min(x.min(), reference.lo) if np.isfinite(reference.lo) else x.min()
        edges = np.linspace(lo, x.max(), bins + 1)
        ks = float(stats.kstest(x, reference.cdf).statistic)
        l1 = _l1_vs_law(x, reference, edges)
        if reference.pdf is not None:
            mu, var = reference.moments()
        else:
            mu, var = math.nan, math.nan
        boot_ks, boot_l1 = [], []
        for _ in range(n_boot):
            xb = x[rng.integers(0, x.size, x.size)]
            boot_ks.append(stats.kstest(xb, reference.cdf).statistic)
            boot_l1.append(_l1_vs_law(xb, reference, edges))
        n_ref = None
    else:
        y = _values(reference)
        if y.size == 0:
            raise ValueError("empty reference sample")
        lo, hi = min(x.min(), y.min()), max(x.max(), y.max())
        edges = np.linspace(lo, hi, bins + 1)
        ks = float(stats.ks_2samp(x, y).statistic)
        l1 = _l1_two(x, y, edges)
        mu, var = float(y.mean()), float(y.var())
        boot_ks, boot_l1 = [], []
        for _ in range(n_boot):
            xb = x[rng.integers(0, x.size, x.size)]
            yb = y[rng.integers(0, y.size, y.size)]
            boot_ks.append(stats.ks_2samp(xb, yb).statistic)
            boot_l1.append(_l1_two(xb, yb, edges))
        n_ref = int(y.size)
    ks_ci = tuple(np.percentile(boot_ks, q)) if n_boot else (math.nan, math.nan)
    l1_ci = tuple(np.percentile(boot_l1, q)) if n_boot else (math.nan, math.nan)
    return ComparisonReport(ks, l1, float(x.mean() - mu), float(x.var() - var), int(x.size), n_ref,
                            tuple(map(float, ks_ci)), tuple(map(float, l1_ci)), n_boot)


# pair correlation

@dataclass(frozen=True, eq=False)
class CorrelationCurve:
    bin_center: np.ndarray
    value: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    reference: np.ndarray | None = None
    n_points: int = 0

    def l1_to_reference(self, r_max=None) -> float:
        """``integral |estimate - reference| dr`` over bins with centre below ``r_max``."""
        if self.reference is None:
            raise ValueError("no reference curve attached")
        h = self.bin_center[1] - self.bin_center[0]
        sel = np.ones(self.bin_center.size, bool) if r_max is None else self.bin_center < r_max
        return float(np.sum(np.abs(self.value - self.reference)[sel]) * h)

    def flatness(self) -> float:
        """Mean absolute deviation of the estimate from 1."""
        return float(np.mean(np.abs(self.value - 1)))


def sine_pair_reference(edges, fine: int = 50):
    """``1 - K(r)^2`` averaged over each bin."""
    out = np.empty(edges.size - 1)
    for b in range(out.size):
        r = np.linspace(edges[b], edges[b + 1], fine)
        out[b] = np.mean(1 - sine_kernel(r) ** 2)
    return out


def _pair_counts(points, edges, window):
    x = np.sort(np.asarray(points, float))
    a, b = (x[0], x[-1]) if window is None else window
    r_max = edges[-1]
    density = x.size / (b - a)
    centres = x[(x >= a + r_max) & (x <= b - r_max)]
    if centres.size == 0:
        raise ValueError("too few points for the requested r range")
    counts = np.zeros(edges.size - 1)
    for c in centres:
        lo, hi = np.searchsorted(x, [c - r_max, c + r_max])
        d = np.abs(x[lo:hi] - c)
        d = d[d > 0]
        counts += np.histogram(d, edges)[0]
    return counts, centres.size, density


def pair_correlation(point_sets, r_max: float = 3.0, width: float = 0.1, window=None,
                     reference: str | None = "sine") -> CorrelationCurve:
    """Box-kernel estimate of the two-point function of unfolded points.

    Each entry of ``point_sets`` is one configuration in unfolded units.  The
    estimate at bin ``[r, r + w)`` counts neighbours at distance in the bin
    from centres at least ``r_max`` from the window ends, normalized by the
    Poisson expectation ``2 w rho`` with ``rho`` the empirical density.  The
    confidence band is 1.96 standard errors across configurations.
    """
    edges = np.arange(0.0, r_max + width / 2, width)
    per_set = []
    n_pts = 0
    for pts in point_sets:
        counts, n_c, rho = _pair_counts(pts, edges, window)
        per_set.append(counts / (n_c * 2 * width * rho))
        n_pts += len(pts)
    per_set = np.array(per_set)
    value = per_set.mean(axis=0)
    if per_set.shape[0] > 1:
        se = per_set.std(axis=0, ddof=1) / np.sqrt(per_set.shape[0])
    else:
        se = np.full(value.size, np.nan)
    ref = sine_pair_reference(edges) if reference == "sine" else None
    centre = (edges[:-1] + edges[1:]) / 2
    return CorrelationCurve(centre, value, value - 1.96 * se, value + 1.96 * se, ref, n_pts)


def histogram_curve(sample, edges, n_boot: int = 200, seed: int = 0, level: float = 0.95) -> CorrelationCurve:
    """Density histogram of a sample with percentile-bootstrap bands."""
    x = _values(sample)
    w = np.diff(edges)
    value = np.histogram(x, edges)[0] / (x.size * w)
    rng = stream(seed, 0xB1)
    boots = np.array([np.histogram(x[rng.integers(0, x.size, x.size)], edges)[0] / (x.size * w)
                      for _ in range(n_boot)]) if n_boot else np.full((1, value.size), np.nan)
    q = ((1 - level) / 2 * 100, (1 + level) / 2 * 100)
    lo, hi = np.percentile(boots, q, axis=0)
    return CorrelationCurve((edges[:-1] + edges[1:]) / 2, value, lo, hi, None, int(x.size))


def write_curve_csv(path, curve: CorrelationCurve, meta=None):
    """Fixed-column curve CSV: ``bin_center, value, ci_low, ci_high``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if meta is not None:
            fh.write("# " + json.dumps(_plain(meta), sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(["bin_center", "value", "ci_low", "ci_high"])
        for row in zip(curve.bin_center, curve.value, curve.ci_low, curve.ci_high):
            w.writerow([repr(float(v)) for v in row])


# experiments

def _bulk_gap_sample(ensemble, N, seed, alpha=EDGE_ALPHA):
    from .ensemble import draw_matrix
    from .spectral import eigen_decompose
    return unfold(eigen_decompose(draw_matrix(ensemble, N, seed)), alpha=alpha)


def surmise_experiment(n2_samples=100_000, N=1000, samples=20, seed=0, n_boot=200, threads=None):
    """2x2 GOE gaps (exact case) and bulk GOE gaps (approximation) against the surmise."""
    import time
    from .ensemble import gaussian_ensemble
    from .parallel import pmap
    from .report import ExperimentReport
    from .rng import child_seed

    t0 = time.perf_counter()
    rep = ExperimentReport("surmise", dict(n2_samples=n2_samples, N=N, samples=samples), seed=seed)
    rng = stream(seed, 0x22)
    a = rng.standard_normal((n2_samples, 2, 2))
    h = (a + np.swapaxes(a, 1, 2)) / 2.0          # GOE with N = 2
    ev = np.linalg.eigvalsh(h)
    gaps = (ev[:, 1] - ev[:, 0]) / np.sqrt(np.pi)  # exact mean gap sqrt(pi)
    exact = distribution_distance(gaps, SURMISE, n_boot=n_boot, seed=child_seed(seed, 1))
    bulk = GapSample.pool(pmap(lambda s: _bulk_gap_sample("goe", N, child_seed(seed, 2, s)), range(samples),
                               threads))
    approx = distribution_distance(bulk, SURMISE, n_boot=n_boot, seed=child_seed(seed, 3))
    rep.summary.update(n2=exact.to_dict(), bulk=approx.to_dict(), bulk_mean_gap=bulk.mean)
    curve = histogram_curve(bulk, np.linspace(0, 4, 41), n_boot=min(n_boot, 100), seed=child_seed(seed, 4))
    rep.rows = [dict(bin_center=c, value=v, ci_low=lo, ci_high=hi, surmise=float(surmise_pdf(c)))
                for c, v, lo, hi in zip(curve.bin_center, curve.value, curve.ci_low, curve.ci_high)]
    rep.check("KS(2x2 GOE gap vs surmise)", exact.ks, 0.01)
    rep.check(f"KS(GOE N={N} bulk gaps vs surmise)", approx.ks, 0.05)
    rep.wall_clock = time.perf_counter() - t0
    return rep


def sine_experiment(N=1000, samples=20, seed=0, r_max=3.0, width=0.1, threads=None):
    """GUE two-point function against ``1 - K(r)^2`` with a Poisson control."""
    import time
    from .ensemble import draw_matrix
    from .parallel import pmap
    from .report import ExperimentReport
    from .rng import child_seed
    from .spectral import eigen_decompose

    t0 = time.perf_counter()
    rep = ExperimentReport("sine", dict(N=N, samples=samples, r_max=r_max, width=width), seed=seed)
    pts = pmap(lambda s: unfold_points(eigen_decompose(draw_matrix("gue", N, child_seed(seed, 1, s)))),
               range(samples), threads)
    curve = pair_correlation(pts, r_max, width)
    pois = []
    for s, p in enumerate(pts):
        rng = stream(seed, 2, s)
        pois.append(np.sort(rng.uniform(p.min(), p.max(), p.size)))
    control = pair_correlation(pois, r_max, width, reference=None)
    l1 = curve.l1_to_reference(r_max)
    rep.summary.update(l1=l1, poisson_flatness=control.flatness(), small_r=float(curve.value[0]))
    rep.rows = [dict(bin_center=c, value=v, ci_low=lo, ci_high=hi, reference=ref, poisson=pv)
                for c, v, lo, hi, ref, pv in zip(curve.bin_center, curve.value, curve.ci_low, curve.ci_high,
                                                 curve.reference, control.value)]
    rep.check("L1(two-point estimate, 1 - K^2) on [0, 3]", l1, 0.1)
    rep.check("Poisson control mean |R2 - 1|", control.flatness(), 0.05)
    rep.wall_clock = time.perf_counter() - t0
    return rep


def law_comparison_experiment(law_a="three-point", law_b="gaussian", N=500, samples=50, seed=0, n_boot=200,
                              threads=None):
    """Bulk unfolded-gap distance between Wigner matrices with two entry laws."""
    import time
    from .parallel import pmap
    from .report import ExperimentReport
    from .rng import child_seed

    t0 = time.perf_counter()
    rep = ExperimentReport("fourmoment", dict(law_a=law_a, law_b=law_b, N=N, samples=samples), seed=seed)
    ga = GapSample.pool(pmap(lambda s: _bulk_gap_sample(law_a, N, child_seed(seed, 1, s)), range(samples), threads))
    gb = GapSample.pool(pmap(lambda s: _bulk_gap_sample(law_b, N, child_seed(seed, 2, s)), range(samples), threads))
    cmp = distribution_distance(ga, gb, n_boot=n_boot, seed=child_seed(seed, 3))
    rep.summary.update(comparison=cmp.to_dict(), mean_gap_a=ga.mean, mean_gap_b=gb.mean)
    rep.check(f"KS({law_a} vs {law_b} bulk gaps)", cmp.ks, 0.05)
    rep.wall_clock = time.perf_counter() - t0
    return rep
