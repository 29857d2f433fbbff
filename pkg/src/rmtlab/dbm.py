"""Dyson Brownian motion: matrix Ornstein-Uhlenbeck flow and the eigenvalue SDE.

The eigenvalue SDE integrated here is

    dx_i = N^{-1/2} dB_i + [-(beta/4) x_i + (beta/2N) sum_{j != i} 1/(x_i - x_j)] dt,

whose invariant measure is the log-gas ``exp(-beta N H)`` with ``V = x^2/2``.
The matrix flow ``H_t = e^{-t/2} H_0 + sqrt(1 - e^{-t}) U`` is exact in law
and is the workhorse of the universality experiments.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .ensemble import MatrixSample, draw_matrix, gaussian_ensemble
from .gapstats import GapSample, ReferenceLaw, distribution_distance, unfold
from .parallel import pmap
from .report import ExperimentReport
from .rng import child_seed, stream
from .spectral import eigen_decompose


class CollisionError(RuntimeError):
    """Step-size floor reached while trying to keep particles ordered."""


@dataclass(frozen=True)
class FlowConfig:
    beta: int = 1
    t: float = 1.0
    dt: float | None = None
    scheme: str = "euler-maruyama"
    seed: int = 0
    noise: bool = True
    max_halvings: int = 10

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.t < 0:
            raise ValueError("terminal time must be nonnegative")
        if self.dt is None:
            object.__setattr__(self, "dt", min(1e-3, self.t / 1e3) if self.t > 0 else 1e-3)
        if self.dt <= 0 or (self.t > 0 and self.dt > self.t):
            raise ValueError(f"invalid step size dt={self.dt} for t={self.t}")
        if self.scheme != "euler-maruyama":
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @property
    def n_steps(self) -> int:
        return int(np.ceil(self.t / self.dt - 1e-9)) if self.t > 0 else 0


@dataclass(frozen=True, eq=False)
class ParticleState:
    """Strictly increasing particle positions at time ``t``."""

    x: np.ndarray
    t: float = 0.0
    substeps: int = 0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1 or np.any(np.diff(x) <= 0):
            raise ValueError("positions must be strictly increasing")
        object.__setattr__(self, "x", x)


def sde_to_flow_time(t: float, beta: float) -> float:
    """Matrix-flow time matching SDE time ``t``.

    The eigenvalues of the matrix flow obey the SDE above with time sped up
    by ``2/beta``; the two clocks agree for ``beta = 2``.
    """
    return beta * t / 2


def matrix_ou_flow(H0: MatrixSample, t: float, seed: int) -> MatrixSample:
    """``e^{-t/2} H0 + sqrt(1 - e^{-t}) U`` with ``U`` GOE/GUE of H0's symmetry class."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if H0.profile_kind != "flat":
        raise ValueError("matrix flow is defined only for the flat (standard Wigner) profile")
    if t == 0:
        return MatrixSample(H0.h.copy(), H0.profile_kind, H0.law_family, H0.seed)
    U = gaussian_ensemble(H0.N, 2 if H0.is_complex else 1, child_seed(seed, 0x0F)).h
    h = np.exp(-t / 2) * H0.h + np.sqrt(-np.expm1(-t)) * U
    return MatrixSample(h, "flat", f"{H0.law_family}+ou", seed)


def entrywise_ou(h0, t: float, dt: float, seed: int):
    """Euler-Maruyama for ``dH = dB - H/2 dt`` with GOE/GUE-normalized Brownian increments.

    ``h0`` may be one matrix or a batch ``(B, N, N)``.
    """
    h = np.array(h0, dtype=complex if np.iscomplexobj(h0) else float, copy=True)
    squeeze = h.ndim == 2
    if squeeze:
        h = h[None]
    B, N, _ = h.shape
    rng = stream(seed, 0x0E)
    n = int(np.ceil(t / dt - 1e-9))
    step = t / n if n else 0.0
    for _ in range(n):
        a = rng.standard_normal((B, N, N))
        if np.iscomplexobj(h):
            a = a + 1j * rng.standard_normal((B, N, N))
            dW = (a + np.conj(np.swapaxes(a, 1, 2))) / (2.0 * np.sqrt(N))
        else:
            dW = (a + np.swapaxes(a, 1, 2)) / np.sqrt(2.0 * N)
        h = h - 0.5 * h * step + np.sqrt(step) * dW
    return h[0] if squeeze else h


def dbm_drift(x, beta: float):
    """Drift of the eigenvalue SDE for a batch ``(B, N)`` of ordered configurations."""
    N = x.shape[-1]
    d = x[..., :, None] - x[..., None, :]
    np.einsum("...ii->...i", d)[...] = np.inf
    return -beta / 4 * x + beta / (2 * N) * np.sum(1.0 / d, axis=-1)


def _step(x, dt, dB, beta, depth, max_depth, rng, noise):
    N = x.shape[-1]
    prop = x + dbm_drift(x, beta) * dt + (dB / np.sqrt(N) if noise else 0.0)
    bad = np.any(np.diff(prop, axis=-1) <= 0, axis=-1)
    if not np.any(bad):
        return prop, 0
    if depth >= max_depth:
        b = int(np.flatnonzero(bad)[0])
        pair = int(np.flatnonzero(np.diff(prop[b]) <= 0)[0])
        raise CollisionError(
            f"step-size floor dt={dt:.3g} reached; particles {pair} and {pair + 1} "
            f"at {x[b, pair]:.6g}, {x[b, pair + 1]:.6g} in path {b}")
    # retry the rejected step as two half steps with fresh increments
    xb = x[bad]
    dB1 = rng.standard_normal(xb.shape) * np.sqrt(dt / 2)
    y, n1 = _step(xb, dt / 2, dB1, beta, depth + 1, max_depth, rng, noise)
    dB2 = rng.standard_normal(xb.shape) * np.sqrt(dt / 2)
    y, n2 = _step(y, dt / 2, dB2, beta, depth + 1, max_depth, rng, noise)
    prop[bad] = y
    return prop, 1 + n1 + n2


def dbm_integrate_batch(x0, cfg: FlowConfig):
    """Integrate a batch ``(B, N)`` of ordered configurations to time ``cfg.t``.

    Returns the final positions and the number of rejected (halved) steps.
    """
    x = np.array(x0, dtype=float, ndmin=2, copy=True)
    if np.any(np.diff(x, axis=-1) <= 0):
        raise ValueError("initial positions must be strictly increasing")
    rng = stream(cfg.seed, 0xDB)
    n = cfg.n_steps
    dt = cfg.t / n if n else 0.0
    halvings = 0
    for _ in range(n):
        dB = rng.standard_normal(x.shape) * np.sqrt(dt)
        x, k = _step(x, dt, dB, cfg.beta, 0, cfg.max_halvings, rng, cfg.noise)
        halvings += k
    return x, halvings


def dbm_integrate(x0: ParticleState, cfg: FlowConfig) -> ParticleState:
    """Euler-Maruyama path of the eigenvalue SDE from ``x0`` to ``x0.t + cfg.t``."""
    x, k = dbm_integrate_batch(x0.x[None], cfg)
    return ParticleState(x[0], x0.t + cfg.t, k)


def stationary_gap_law(beta: float) -> ReferenceLaw:
    """Gap law of the two-particle gas, density proportional to ``s^beta exp(-beta s^2/4)``."""
    law = stats.chi(beta + 1, scale=np.sqrt(2.0 / beta))
    return ReferenceLaw(law.cdf, law.pdf, f"n2-gap-beta{beta}")


def flow_gap_law(gap0: float, t: float, beta: int) -> ReferenceLaw:
    """Gap law at time ``t`` of the 2x2 matrix flow started from a matrix with gap ``gap0``.

    The gap is the norm of a ``(beta+1)``-dimensional Gaussian vector with mean
    of norm ``e^{-t/2} gap0`` and per-component variance ``(2/beta)(1 - e^{-t})``.
    """
    var = 2.0 / beta * -np.expm1(-t)
    nc = np.exp(-t) * gap0**2 / var
    law = stats.ncx2(beta + 1, nc, scale=var)
    return ReferenceLaw(lambda s: law.cdf(np.maximum(s, 0) ** 2),
                        lambda s: law.pdf(np.maximum(s, 0) ** 2) * 2 * np.maximum(s, 0),
                        f"n2-flow-gap-t{t:g}")


def _bulk_gaps(H, alpha):
    return unfold(eigen_decompose(H), alpha=alpha)


def ks_noise_level(n: int, m: int, c: float = 1.36) -> float:
    """Two-sample KS critical value at about the 95% level."""
    return c * np.sqrt((n + m) / (n * m))


def relaxation_experiment(law="bernoulli", N=500, t_grid=None, samples=50, seed=0, beta=1,
                          alpha=0.1, gate_t=None, n_boot=100, threads=None):
    """Unfolded bulk-gap distance between the flowed ensemble and GOE/GUE.

    For each ``t`` the law-``law`` matrix is flowed and its bulk gaps are
    compared (two-sample) with an independent GOE/GUE reference produced by the
    same pipeline.  A GOE/GUE start flowed to the gate time gives the noise
    floor.
    """
    t0 = time.perf_counter()
    gate_t = N ** -0.5 if gate_t is None else gate_t
    t_grid = sorted(set([0.0, N ** -1.0, N ** -0.75, gate_t, 1.0] if t_grid is None else list(t_grid)) | {gate_t})
    ref_name = "goe" if beta == 1 else "gue"
    start = law if beta == 1 else f"complex-{law}"
    rep = ExperimentReport("dbm", dict(law=law, N=N, t_grid=t_grid, samples=samples, beta=beta,
                                       alpha=alpha, gate_t=gate_t), seed=seed)

    def reference(s):
        return _bulk_gaps(draw_matrix(ref_name, N, child_seed(seed, 3, s)), alpha)

    ref = GapSample.pool(pmap(reference, range(samples), threads))

    def flowed(s, t, name, label):
        H0 = draw_matrix(name, N, child_seed(seed, label, s))
        return _bulk_gaps(matrix_ou_flow(H0, t, child_seed(seed, label + 1, s)), alpha)

    curve = []
    for t in t_grid:
        g = GapSample.pool(pmap(lambda s, t=t: flowed(s, t, start, 1), range(samples), threads))
        cmp = distribution_distance(g, ref, n_boot=n_boot, seed=child_seed(seed, 5))
        curve.append(dict(t=t, ks=cmp.ks, ks_ci_low=cmp.ks_ci[0], ks_ci_high=cmp.ks_ci[1],
                          mean_gap=g.mean, mean_gap_delta=cmp.mean_delta, n=cmp.n))
        if t == gate_t:
            rep.check(f"KS({law} flowed to t={t:.4g} vs {ref_name})", cmp.ks, 0.05)
    rep.rows = curve
    g = GapSample.pool(pmap(lambda s: flowed(s, gate_t, ref_name, 7), range(samples), threads))
    cmp = distribution_distance(g, ref, n_boot=0)
    noise = ks_noise_level(g.n, ref.n)
    rep.summary.update(curve=curve, gaussian_start_ks=cmp.ks, ks_noise_level=noise, reference_n=ref.n)
    rep.check(f"KS({ref_name} start vs {ref_name}) within sampling noise", cmp.ks, noise)
    rep.wall_clock = time.perf_counter() - t0
    return rep


def two_particle_experiment(beta=1, t=1.0, gap0=1.0, paths=10_000, seed=0, dt=None):
    """N = 2: SDE paths to time ``t`` versus the matrix flow at the matched time."""
    t0 = time.perf_counter()
    cfg = FlowConfig(beta=beta, t=t, dt=dt, seed=child_seed(seed, 1))
    rep = ExperimentReport("dbm-n2", dict(beta=beta, t=t, gap0=gap0, paths=paths, dt=cfg.dt), seed=seed)
    x0 = np.tile([-gap0 / 2, gap0 / 2], (paths, 1))
    x, halvings = dbm_integrate_batch(x0, cfg)
    sde_gaps = x[:, 1] - x[:, 0]
    tf = sde_to_flow_time(t, beta)
    law = flow_gap_law(gap0, tf, beta)
    # matrix flow from a diagonal start with the same gap
    rng = stream(seed, 2)
    N = 2
    if beta == 1:
        a = rng.standard_normal((paths, N, N))
        U = (a + np.swapaxes(a, 1, 2)) / np.sqrt(2.0 * N)
    else:
        a = rng.standard_normal((paths, N, N)) + 1j * rng.standard_normal((paths, N, N))
        U = (a + np.conj(np.swapaxes(a, 1, 2))) / (2.0 * np.sqrt(N))
    H = np.exp(-tf / 2) * np.diag(x0[0]) + np.sqrt(-np.expm1(-tf)) * U
    ev = np.linalg.eigvalsh(H)
    flow_gaps = ev[:, 1] - ev[:, 0]
    sde_vs_law = distribution_distance(sde_gaps, law, n_boot=0)
    sde_vs_flow = distribution_distance(sde_gaps, flow_gaps, n_boot=0)
    flow_vs_law = distribution_distance(flow_gaps, law, n_boot=0)
    rep.summary.update(halvings=halvings, flow_time=tf, sde_vs_law=sde_vs_law.to_dict(),
                       sde_vs_flow=sde_vs_flow.to_dict(), flow_vs_law=flow_vs_law.to_dict())
    rep.check("KS(SDE gap vs matrix-flow gap), N=2", sde_vs_flow.ks, 0.05)
    rep.check("KS(SDE gap vs exact flow gap law), N=2", sde_vs_law.ks, 0.05)
    rep.wall_clock = time.perf_counter() - t0
    return rep
