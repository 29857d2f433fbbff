"""Semicircle analytics, eigendecompositions, resolvents and stability parameters.

Conventions: spectral parameter ``z = E + i*eta`` with ``eta > 0``; the
semicircle density is supported on ``[-2, 2]`` and ``m(z)`` denotes its
Stieltjes transform.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .ensemble import MatrixSample, VarianceProfile

__all__ = [
    "SpectralError", "SemicircleModel", "SpectralData", "ResolventData", "StabilityParams",
    "semicircle_density", "semicircle_cdf", "semicircle_stieltjes", "classical_location",
    "classical_locations", "eigen_decompose", "resolvent", "resolvent_diagonal",
    "empirical_stieltjes", "empirical_counting", "stability_gamma", "eta_thresholds",
    "control_params", "restricted_inf_norm",
]


class SpectralError(ValueError):
    pass


def _check_upper(z):
    if np.any(np.imag(z) <= 0):
        raise SpectralError(f"spectral parameter must have Im z > 0, got {z}")


def semicircle_density(E):
    E = np.asarray(E, dtype=float)
    return np.sqrt(np.clip(4.0 - E * E, 0.0, None)) / (2.0 * np.pi)


def semicircle_cdf(E):
    """``n(E)``, the integral of the semicircle density up to ``E``."""
    x = np.clip(np.asarray(E, dtype=float), -2.0, 2.0)
    return 0.5 + x * np.sqrt(4.0 - x * x) / (4.0 * np.pi) + np.arcsin(x / 2.0) / np.pi


def semicircle_stieltjes(z):
    """Stieltjes transform ``m(z) = (-z + sqrt(z^2 - 4)) / 2`` of the semicircle law.

    ``sqrt(z-2)*sqrt(z+2)`` with principal roots has positive imaginary part
    in the upper half plane and behaves like ``z`` at infinity, which selects
    the branch with ``m ~ -1/z``.  The value is computed as ``-2/(z + root)``
    (the other root of ``m^2 + z m + 1 = 0`` inverted) to avoid cancellation.
    """
    z = np.asarray(z, dtype=complex)
    _check_upper(z)
    root = np.sqrt(z - 2.0) * np.sqrt(z + 2.0)
    m = -2.0 / (z + root)
    return m[()] if m.ndim == 0 else m


def _invert_cdf(targets):
    lo = np.full(targets.shape, -2.0)
    hi = np.full(targets.shape, 2.0)
    for _ in range(60):
        mid = (lo + hi) / 2
        below = semicircle_cdf(mid) < targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return (lo + hi) / 2


def classical_location(j: int, N: int) -> float:
    """``gamma_j`` with ``n(gamma_j) = j/N``."""
    if not 1 <= j <= N:
        raise ValueError(f"index j={j} outside 1..{N}")
    if j == N:
        return 2.0
    return float(_invert_cdf(np.array([j / N]))[0])


@lru_cache(maxsize=64)
def _classical_locations(N):
    gam = _invert_cdf(np.arange(1, N + 1) / N)
    gam[-1] = 2.0
    gam.flags.writeable = False
    return gam


def classical_locations(N: int) -> np.ndarray:
    """All ``gamma_1 < ... < gamma_N`` (bisection to machine precision)."""
    return _classical_locations(int(N)).copy()


class SemicircleModel:
    """Analytic semicircle law; shares its interface with the general equilibrium model."""

    A = -2.0
    B = 2.0

    def density(self, E):
        return semicircle_density(E)

    def cdf(self, E):
        return semicircle_cdf(E)

    def stieltjes(self, z):
        return semicircle_stieltjes(z)

    def classical_location(self, j, N):
        return classical_location(j, N)

    def classical_locations(self, N):
        return classical_locations(N)


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Sorted eigenvalues and, optionally, orthonormal eigenvectors as columns."""

    eigenvalues: np.ndarray
    vectors: np.ndarray | None = None

    @property
    def N(self):
        return self.eigenvalues.size


def eigen_decompose(H, want_vectors: bool = False) -> SpectralData:
    """Dense Hermitian eigendecomposition.

    ``numpy.linalg.LinAlgError`` from the LAPACK driver propagates unchanged.
    """
    h = H.h if isinstance(H, MatrixSample) else np.asarray(H)
    if want_vectors:
        lam, vec = np.linalg.eigh(h)
        return SpectralData(lam, vec)
    return SpectralData(np.linalg.eigvalsh(h))


@dataclass(frozen=True, eq=False)
class ResolventData:
    z: complex
    G: np.ndarray | None
    diagonal: np.ndarray
    m_N: complex

    @property
    def eta(self):
        return self.z.imag


def resolvent(H, z: complex, mode: str = "full") -> ResolventData:
    """``G = (H - z)^{-1}`` by LU solve; ``mode="diagonal"`` keeps only ``G_ii``."""
    _check_upper(z)
    h = H.h if isinstance(H, MatrixSample) else np.asarray(H)
    N = h.shape[0]
    G = np.linalg.solve(h - z * np.eye(N), np.eye(N, dtype=complex))
    d = np.diag(G).copy()
    if mode == "diagonal":
        G = None
    elif mode != "full":
        raise ValueError(f"unknown resolvent mode {mode!r}")
    return ResolventData(complex(z), G, d, complex(d.mean()))


def resolvent_diagonal(spec: SpectralData, z) -> np.ndarray:
    """``G_ii(z)`` from an eigendecomposition; vectorized over an array of ``z``.

    Cheap when many spectral parameters are needed for one sample.
    """
    if spec.vectors is None:
        raise SpectralError("eigenvectors required")
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    _check_upper(z)
    w = np.abs(spec.vectors) ** 2
    return w @ (1.0 / (spec.eigenvalues[:, None] - z[None, :]))


def empirical_stieltjes(spec, z):
    """``m_N(z) = (1/N) sum 1/(lambda - z)``."""
    _check_upper(z)
    lam = spec.eigenvalues if isinstance(spec, SpectralData) else np.asarray(spec)
    return complex(np.mean(1.0 / (lam - z)))


def empirical_counting(spec, E):
    """``n_N(E) = #{lambda <= E} / N``."""
    lam = spec.eigenvalues if isinstance(spec, SpectralData) else np.asarray(spec)
    return np.searchsorted(np.sort(lam), E, side="right") / lam.size


def geometric_median_cost(points, tol=1e-14, max_iter=500):
    """``min_c sum_j |p_j - c|`` over complex ``c`` (Vardi-Zhang iteration)."""
    p = np.asarray(points, dtype=complex)
    y = np.median(p.real) + 1j * np.median(p.imag)
    scale = max(np.max(np.abs(p)), 1e-300)
    best = np.sum(np.abs(p - y))
    for _ in range(max_iter):
        d = np.abs(p - y)
        at = d <= 1e-13 * scale
        far = ~at
        if not np.any(far):
            break
        inv = 1.0 / d[far]
        T = np.sum(p[far] * inv) / np.sum(inv)
        eta = np.count_nonzero(at)
        if eta:
            R = np.sum((p[far] - y) * inv)
            r = abs(R)
            if r <= eta:
                break
            frac = eta / r
            y_new = (1 - frac) * T + frac * y
        else:
            y_new = T
        cost = np.sum(np.abs(p - y_new))
        step = abs(y_new - y)
        y = y_new
        best = min(best, cost)
        if step <= tol * scale:
            break
    return float(min(best, np.sum(np.abs(p - y))))


def restricted_inf_norm(B, rows=None):
    """``infinity -> infinity`` norm of ``B`` restricted to vectors orthogonal to constants.

    For one row ``b``, ``sup { |b.x| : |x_j| <= 1, sum x_j = 0 }`` equals
    ``min_c sum_j |b_j - c|`` by convex duality, so the norm is the largest
    such geometric-median cost over rows.  This assumes ``B`` maps the
    orthogonal complement of constants into itself, which holds for
    functions of a symmetric stochastic ``S``.
    """
    B = np.asarray(B)
    idx = range(B.shape[0]) if rows is None else rows
    return max(geometric_median_cost(B[i]) for i in idx)


def _stability_inverse_row(S: VarianceProfile, m2):
    # first row of (1 - m^2 S)^{-1} for a circulant S
    shat = np.fft.fft(S.row)
    return np.fft.ifft(1.0 / (1.0 - m2 * shat))


def stability_gamma(S: VarianceProfile, z: complex):
    """``(Gamma, Gamma_tilde)``: norms of ``(1 - m(z)^2 S)^{-1}`` on the full space and on constants-perp.

    Circulant profiles use one FFT row (all rows are permutations of it);
    other profiles invert densely.  A singular ``1 - m^2 S`` raises
    :class:`SpectralError`.
    """
    m2 = semicircle_stieltjes(z) ** 2
    if S.circulant:
        shat = np.fft.fft(S.row)
        denom = 1.0 - m2 * shat
        if np.min(np.abs(denom)) < 1e-14:
            raise SpectralError(f"1 - m^2 S is singular at z={z}")
        row = np.fft.ifft(1.0 / denom)
        gamma = float(np.sum(np.abs(row)))
        gamma_t = geometric_median_cost(row)
        return gamma, min(gamma_t, gamma)
    A = np.eye(S.N) - m2 * S.s
    if np.linalg.cond(A) > 1e14:
        raise SpectralError(f"1 - m^2 S is singular at z={z}")
    B = np.linalg.inv(A)
    gamma = float(np.max(np.sum(np.abs(B), axis=1)))
    return gamma, min(restricted_inf_norm(B), gamma)


def eta_grid(lo=1e-6, hi=10.0, ratio=1.05):
    n = int(np.floor(np.log(hi / lo) / np.log(ratio) + 1e-9))
    g = lo * ratio ** np.arange(n + 1)
    if g[-1] < hi * (1 - 1e-12):
        g = np.append(g, hi)
    return g


def eta_thresholds(S: VarianceProfile, E: float, gamma_exp: float, ratio: float = 1.05):
    """Lower thresholds ``(eta_tilde_E, eta_E)`` on a geometric grid over ``[1e-6, 10]``.

    Each is the smallest grid ``eta`` such that
    ``1/(M eta') <= min(M^-g / G^3, M^-2g / (G^4 Im m))`` for every grid
    ``eta' >= eta``, with ``G = Gamma_tilde`` resp. ``Gamma``.  Returns 10 when
    the condition already fails at the top of the grid.
    """
    if abs(E) > 10:
        raise ValueError("|E| must be at most 10")
    if not 0 < gamma_exp <= 0.1:
        raise ValueError("gamma exponent must lie in (0, 0.1]")
    grid = eta_grid(ratio=ratio)
    M = S.M
    ok_t = np.empty(grid.size, bool)
    ok = np.empty(grid.size, bool)
    for k, eta in enumerate(grid):
        z = complex(E, eta)
        im_m = semicircle_stieltjes(z).imag
        g, gt = stability_gamma(S, z)
        lhs = 1.0 / (M * eta)
        ok_t[k] = lhs <= min(M ** -gamma_exp / gt**3, M ** (-2 * gamma_exp) / (gt**4 * im_m))
        ok[k] = lhs <= min(M ** -gamma_exp / g**3, M ** (-2 * gamma_exp) / (g**4 * im_m))

    def lowest(flags):
        bad = np.nonzero(~flags)[0]
        if bad.size == 0:
            return float(grid[0])
        if bad[-1] == grid.size - 1:
            return float(grid[-1])
        return float(grid[bad[-1] + 1])

    return lowest(ok_t), lowest(ok)


@dataclass(frozen=True, eq=False)
class StabilityParams:
    lambda_o: float
    lambda_d: float
    theta_dev: float
    pi: float
    v: np.ndarray
    v_mean: complex
    gamma: float | None = None
    gamma_tilde: float | None = None

    @property
    def lam(self):
        return max(self.lambda_o, self.lambda_d)


def control_parameter_pi(im_m, M, eta):
    return np.sqrt(im_m / (M * eta)) + 1.0 / (M * eta)


def control_params(R: ResolventData, S: VarianceProfile, with_gamma=False) -> StabilityParams:
    """Random control parameters of a full resolvent against the semicircle."""
    if R.G is None:
        raise SpectralError("control_params needs a full resolvent")
    m = semicircle_stieltjes(R.z)
    off = R.G.copy()
    np.fill_diagonal(off, 0.0)
    v = R.diagonal - m
    gam = gam_t = None
    if with_gamma:
        gam, gam_t = stability_gamma(S, R.z)
    return StabilityParams(
        lambda_o=float(np.max(np.abs(off))) if R.G.shape[0] > 1 else 0.0,
        lambda_d=float(np.max(np.abs(v))),
        theta_dev=float(abs(R.m_N - m)),
        pi=float(control_parameter_pi(m.imag, S.M, R.eta)),
        v=v,
        v_mean=complex(v.mean()),
        gamma=gam,
        gamma_tilde=gam_t,
    )


def histogram_l1(eigs, lo=-2.2, hi=2.2, bins=40):
    """``sum_b |h_b - rho_b| w`` with ``rho_b`` the semicircle mass of bin ``b`` over its width."""
    edges = np.linspace(lo, hi, bins + 1)
    h = np.histogram(eigs, edges)[0] / np.size(eigs)
    ref = np.diff(semicircle_cdf(edges))
    return float(np.sum(np.abs(h - ref))), edges, h, ref


def semicircle_experiment(N=2000, samples=5, seed=0, ensemble="goe", bins=40):
    """Pooled eigenvalue histogram against the semicircle on ``[-2.2, 2.2]``."""
    import time
    from .ensemble import draw_matrix
    from .report import ExperimentReport
    from .rng import child_seed

    t0 = time.perf_counter()
    rep = ExperimentReport("semicircle", dict(N=N, samples=samples, ensemble=ensemble, bins=bins), seed=seed)
    eigs = np.concatenate([eigen_decompose(draw_matrix(ensemble, N, child_seed(seed, N, s))).eigenvalues
                           for s in range(samples)])
    l1, edges, h, ref = histogram_l1(eigs, bins=bins)
    w = np.diff(edges)
    rep.rows = [dict(bin_center=(a + b) / 2, value=hv / wv, reference=rv / wv)
                for a, b, hv, rv, wv in zip(edges[:-1], edges[1:], h, ref, w)]
    rep.summary["l1"] = l1
    rep.check("L1(histogram, semicircle)", l1, 0.05)
    rep.wall_clock = time.perf_counter() - t0
    return rep
