"""Diffusion profile of random band matrices.

``Theta = |m|^2 S / (1 - |m|^2 S)`` is diagonalized by the Fourier transform
when ``S`` is circulant.  Its continuum approximation is
``theta(p) = 1 / (alpha eta + W^2 D p^2)`` with ``alpha = 2/sqrt(4 - E^2)``.
The empirical profile is ``T_xy = sum_i s_xi |G_iy|^2``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .ensemble import VarianceProfile, band_profile, law_by_name, sample_matrix, shape_diffusion_constant
from .parallel import pmap
from .report import ExperimentReport
from .rng import child_seed
from .spectral import SpectralError, eigen_decompose, semicircle_stieltjes


@dataclass(frozen=True, eq=False)
class DiffusionProfile:
    """Translation-invariant profile ``theta_x`` (``x = 0..N-1`` on the torus).

    ``constant_mode`` is the contribution ``theta_hat(0)/N`` of the ``p = 0``
    mode; subtract it to compare shapes without the near-singular mode.
    """

    z: complex
    theta: np.ndarray
    theta_hat: np.ndarray
    method: str
    W: int | None = None
    stderr: np.ndarray | None = None
    s_hat: np.ndarray | None = None
    matrix: np.ndarray | None = None

    @property
    def N(self) -> int:
        return self.theta.size

    @property
    def eta(self) -> float:
        return float(self.z.imag)

    @property
    def mass(self) -> float:
        return float(np.sum(self.theta))

    @property
    def constant_mode(self) -> float:
        return float(self.theta_hat[0].real / self.N)

    @property
    def nonconstant(self) -> np.ndarray:
        return self.theta - self.constant_mode

    @property
    def centred(self) -> np.ndarray:
        """``theta`` on ``x = -N/2 .. N/2 - 1``."""
        return np.fft.fftshift(self.theta)

    @property
    def x_centred(self) -> np.ndarray:
        return np.arange(self.N) - self.N // 2

    def flatness(self) -> float:
        """``max theta / mean theta``."""
        return float(self.theta.max() / self.theta.mean())


def theta_exact(S: VarianceProfile, z: complex) -> DiffusionProfile:
    """``Theta`` for a circulant profile by FFT (dense solve otherwise)."""
    if z.imag <= 0:
        raise SpectralError("theta requires Im z > 0")
    a = abs(semicircle_stieltjes(z)) ** 2
    if S.circulant:
        s_hat = np.fft.fft(S.row).real
        den = 1.0 - a * s_hat
        if np.min(np.abs(den)) < 1e-14:
            raise SpectralError("1 - |m|^2 s(p) vanishes")
        th_hat = a * s_hat / den
        theta = np.fft.ifft(th_hat).real
        # S is symmetric, so theta_x = theta_{-x}; remove the rounding asymmetry
        theta = 0.5 * (theta + np.roll(theta[::-1], 1))
        return DiffusionProfile(complex(z), theta, th_hat, "exact", S.W, None, s_hat)
    M = np.eye(S.N) - a * S.s
    Th = np.linalg.solve(M, a * S.s)
    return DiffusionProfile(complex(z), Th[:, 0].copy(), np.fft.fft(Th[:, 0]), "exact", S.W, None, None, Th)


def theta_neumann(S: VarianceProfile, z: complex, terms: int = 1) -> np.ndarray:
    """Partial Neumann sum ``sum_{k=1}^{terms} (|m|^2 S)^k`` (first row)."""
    a = abs(semicircle_stieltjes(z)) ** 2
    s_hat = np.fft.fft(S.row).real
    return np.fft.ifft(sum((a * s_hat) ** k for k in range(1, terms + 1))).real


def theta_fourier_approx(W: float, shape: str, E: float, eta: float, N: int) -> DiffusionProfile:
    """Continuum profile ``1/(alpha eta + W^2 D p^2)`` inverted on the discrete torus."""
    if abs(E) >= 2:
        raise ValueError("energy must lie in the bulk (|E| < 2)")
    alpha = 2.0 / np.sqrt(4.0 - E * E)
    D = shape_diffusion_constant(shape)
    p = 2 * np.pi * np.fft.fftfreq(N)
    th_hat = 1.0 / (alpha * eta + W * W * D * p * p)
    return DiffusionProfile(complex(E, eta), np.fft.ifft(th_hat).real, th_hat.astype(complex), "fourier-approx", W)


def decay_length(profile: DiffusionProfile, x_lo: int, x_hi: int, subtract_constant: bool = False) -> float:
    """Exponential decay length from a log-linear fit of ``theta_x`` on ``[x_lo, x_hi]``.

    The fit is meaningful when the length is well below ``N``; optionally the
    constant mode is removed first.
    """
    x = np.arange(x_lo, x_hi + 1)
    y = profile.nonconstant[x] if subtract_constant else profile.theta[x]
    slope = np.polyfit(x, np.log(y), 1)[0]
    return float(-1.0 / slope)


def _T_sample(S, law, zs, seed, anchor):
    H = sample_matrix(S, law, seed)
    spec = eigen_decompose(H, want_vectors=True)
    U = spec.vectors
    # column anchor of G for each z
    g = (U * U[anchor].conj()[None, :]) @ (1.0 / (spec.eigenvalues[:, None] - np.asarray(zs)[None, :]))
    T = S.s @ (np.abs(g) ** 2)
    return np.roll(T, -anchor, axis=0)


def empirical_T(S: VarianceProfile, law="gaussian", z=0.2j, samples: int = 100, seed: int = 0, anchor=None,
                threads=None):
    """Monte Carlo mean of ``T_{x, y}`` as a function of ``x - y``.

    One eigendecomposition per sample serves every spectral parameter in
    ``z`` (scalar or sequence); the result is a profile or a list of them.
    """
    scalar = np.isscalar(z)
    zs = np.atleast_1d(np.asarray(z, complex))
    anchor = S.N // 2 if anchor is None else int(anchor)
    law = law_by_name(law) if isinstance(law, str) else law
    Ts = np.array(pmap(lambda s: _T_sample(S, law, zs, child_seed(seed, s), anchor), range(samples), threads))
    mean = Ts.mean(axis=0)
    se = Ts.std(axis=0, ddof=1) / np.sqrt(samples) if samples > 1 else np.full(mean.shape, np.nan)
    out = [DiffusionProfile(complex(zk), mean[:, k], np.fft.fft(mean[:, k]), "empirical", S.W, se[:, k])
           for k, zk in enumerate(zs)]
    return out[0] if scalar else out


def relative_l1(a: DiffusionProfile | np.ndarray, b: DiffusionProfile | np.ndarray) -> float:
    """``sum_x |a_x - b_x| / sum_x |b_x|``."""
    a = a.theta if isinstance(a, DiffusionProfile) else np.asarray(a)
    b = b.theta if isinstance(b, DiffusionProfile) else np.asarray(b)
    return float(np.sum(np.abs(a - b)) / np.sum(np.abs(b)))


def figure1_report(W: int = 16, ratio: int = 25, ks=(1, 2, 3, 4, 5), E: float = 0.0, samples: int = 400,
                   shape: str = "uniform", law: str = "gaussian", seed: int = 0, gate_ks=(1, 2, 3, 4),
                   threads=None):
    """Diffusion profiles at ``eta = 5^-k`` for ``N = ratio * W``.

    Rows carry ``x, theta_exact, theta_approx, T_empirical, stderr`` plus the
    two plotted quantities ``eta * theta_x`` and ``log theta_x`` per block.
    Gates: relative L1 of ``T`` against ``Theta`` for ``k`` in ``gate_ks``,
    the mass identity for ``Theta`` and flatness of ``Theta`` below the
    crossover ``eta = (W/N)^2``.
    """
    t0 = time.perf_counter()
    N = ratio * W
    S = band_profile(N, W, shape)
    rep = ExperimentReport("band", dict(W=W, N=N, ratio=ratio, ks=list(ks), E=E, samples=samples, shape=shape,
                                        law=law, gate_ks=list(gate_ks)), seed=seed)
    etas = [5.0 ** -k for k in ks]
    zs = [complex(E, eta) for eta in etas]
    emp = empirical_T(S, law, zs, samples, seed, threads=threads) if samples > 0 else [None] * len(ks)
    crossover = (W / N) ** 2
    blocks = []
    for k, eta, z, T in zip(ks, etas, zs, emp):
        th = theta_exact(S, z)
        ap = theta_fourier_approx(W, shape, E, eta, N)
        m = semicircle_stieltjes(z)
        mass_target = m.imag / eta
        block = dict(k=k, eta=eta, crossover=bool(np.isclose(eta, crossover)), regime=(
            "flat" if eta < crossover * (1 - 1e-9) else "diffusive"),
            mass_theta=th.mass, mass_target=mass_target, mass_rel_err=abs(th.mass / mass_target - 1),
            peak_theta=float(th.theta[0]), peak_scale=1 / (W * np.sqrt(eta)), mean_scale=1 / (N * eta),
            mean_theta=float(th.theta.mean()), flatness_theta=th.flatness(),
            approx_rel_l1=relative_l1(ap, th), constant_mode=th.constant_mode)
        if T is not None:
            tol = max(0.1, 3 / (N * eta))
            block.update(rel_l1=relative_l1(T, th), rel_l1_tol=tol, mass_T=T.mass, flatness_T=T.flatness())
            if k in gate_ks:
                rep.check(f"k={k} relative L1(T, Theta) / max(0.1, 3/(N eta))", block["rel_l1"] / tol, 1.0)
        if k in gate_ks:
            rep.check(f"k={k} |mass(Theta) / (Im m/eta) - 1|", block["mass_rel_err"], 0.1)
        if block["regime"] == "flat":
            rep.check(f"k={k} flat regime max/mean of Theta", th.flatness(), 1.2)
        blocks.append(block)
        for x in range(N):
            xc = (x + N // 2) % N - N // 2
            row = dict(W=W, N=N, E=E, eta=eta, k=k, x=xc, theta_exact=th.theta[x], theta_approx=ap.theta[x],
                       eta_theta=eta * th.theta[x], log_theta=float(np.log(th.theta[x])))
            if T is not None:
                row.update(T_empirical=T.theta[x], stderr=T.stderr[x])
            rep.rows.append(row)
    rep.rows.sort(key=lambda r: (r["k"], r["x"]))
    rep.summary["blocks"] = blocks
    rep.summary["crossover_eta"] = crossover
    rep.wall_clock = time.perf_counter() - t0
    return rep
