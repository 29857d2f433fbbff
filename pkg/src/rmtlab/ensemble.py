"""Variance profiles, entry laws and Hermitian random matrix samples.

A generalized Wigner matrix is specified by a symmetric, doubly stochastic
matrix of variances ``S = (s_ij)`` and a law for the normalized entries
``zeta_ij = h_ij / sqrt(s_ij)``.  Band matrices use a periodic profile
``s_ij ~ f(|i-j|_N / W) / W``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .rng import stream

__all__ = [
    "VarianceProfile", "EntryLaw", "MatrixSample", "ProfileError", "InfeasibleMomentsError",
    "flat_profile", "band_profile", "custom_profile", "sample_matrix", "four_moment_law",
    "gaussian_law", "bernoulli_law", "uniform_law", "gaussian_ensemble",
    "standardized_entries", "torus_distance",
]

SHAPES = ("uniform", "gaussian")
GAUSSIAN_CUTOFF = 3.0


class ProfileError(ValueError):
    pass


class InfeasibleMomentsError(ValueError):
    pass


def torus_distance(N):
    """Periodic distance ``|d|_N`` for offsets ``d = 0..N-1``."""
    d = np.arange(N)
    return np.minimum(d, N - d)


@dataclass(frozen=True, eq=False)
class VarianceProfile:
    """Matrix of entry variances ``s_ij`` with ``M = 1 / max s_ij``.

    For ``kind`` in ``("flat", "band")`` the profile is circulant and ``row``
    holds its first row, so ``s[i, j] == row[(j - i) % N]``.
    """

    s: np.ndarray
    kind: str = "custom"
    W: int | None = None
    shape: str | None = None
    row: np.ndarray | None = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return self.s.shape[0]

    @property
    def M(self) -> float:
        return 1.0 / float(self.s.max())

    @property
    def circulant(self) -> bool:
        return self.row is not None

    def check(self, tol=1e-12):
        s = self.s
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ProfileError("variance profile must be square")
        if np.any(s < 0):
            raise ProfileError("negative variance")
        if not np.array_equal(s, s.T):
            raise ProfileError("variance profile is not symmetric")
        if np.max(np.abs(s.sum(axis=1) - 1.0)) > tol:
            raise ProfileError("rows do not sum to 1")
        return self

    def to_dict(self):
        return {
            "N": self.N, "kind": self.kind, "W": self.W, "shape": self.shape,
            "M": self.M, "values": self.s.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        N = int(d["N"])
        s = np.asarray(d["values"], dtype=float).reshape(N, N)
        kind = d.get("kind", "custom")
        if kind in ("flat", "band"):
            return cls(s, kind, d.get("W"), d.get("shape"), row=s[0].copy())
        return cls(s, kind, d.get("W"), d.get("shape"))


def _circulant(row):
    N = row.size
    idx = (np.arange(N)[None, :] - np.arange(N)[:, None]) % N
    return row[idx]


def flat_profile(N: int) -> VarianceProfile:
    """Standard Wigner profile, all ``s_ij = 1/N``."""
    if N < 1:
        raise ProfileError("N must be positive")
    row = np.full(N, 1.0 / N)
    return VarianceProfile(_circulant(row), "flat", row=row)


def shape_function(shape):
    """Symmetric probability density ``f`` for a band profile."""
    if shape == "uniform":
        return lambda x: np.where(np.abs(x) <= 1.0, 0.5, 0.0)
    if shape == "gaussian":
        from scipy.special import erf
        norm = np.sqrt(2 * np.pi) * erf(GAUSSIAN_CUTOFF / np.sqrt(2))
        return lambda x: np.where(np.abs(x) <= GAUSSIAN_CUTOFF, np.exp(-0.5 * x * x) / norm, 0.0)
    raise ProfileError(f"unknown shape {shape!r}; expected one of {SHAPES}")


def shape_diffusion_constant(shape) -> float:
    """``D = 1/2 * integral x^2 f(x) dx`` for the named shape."""
    if shape == "uniform":
        return 1.0 / 6.0
    if shape == "gaussian":
        from scipy.special import erf
        c = GAUSSIAN_CUTOFF
        # second moment of the standard normal truncated to [-c, c]
        var = 1.0 - 2 * c * np.exp(-c * c / 2) / (np.sqrt(2 * np.pi) * erf(c / np.sqrt(2)))
        return 0.5 * var
    raise ProfileError(f"unknown shape {shape!r}")


def band_profile(N: int, W: int, shape: str = "uniform") -> VarianceProfile:
    """Periodic band profile ``s_ij = f(|i-j|_N / W) / W``, rows rescaled to sum to one.

    The raw profile is only approximately stochastic at finite ``W``.  Rows of a
    circulant are permutations of each other, so dividing by the common row
    sum keeps the matrix symmetric.
    """
    if not 1 <= W <= N:
        raise ProfileError(f"band width W={W} must satisfy 1 <= W <= N={N}")
    f = shape_function(shape)
    row = f(torus_distance(N) / W) / W
    row = row / row.sum()
    return VarianceProfile(_circulant(row), "band", W=W, shape=shape, row=row)


def custom_profile(s) -> VarianceProfile:
    s = np.array(s, dtype=float)
    return VarianceProfile(s, "custom").check()


@dataclass(frozen=True)
class EntryLaw:
    """Law of the normalized entry ``zeta`` (mean 0, variance 1).

    ``atoms``/``weights`` describe finitely supported laws; continuous
    families are sampled directly.  ``symmetry`` is ``"real"`` for real
    symmetric matrices and ``"complex"`` for complex Hermitian ones, in which
    case off-diagonal entries are ``(X + iY)/sqrt(2)`` with ``X, Y`` drawn from
    this law.
    """

    family: str
    symmetry: str = "real"
    atoms: tuple = ()
    weights: tuple = ()

    @property
    def moments(self):
        """Standardized moments ``(m1, m2, m3, m4)`` of the real variable."""
        if self.family == "gaussian":
            return (0.0, 1.0, 0.0, 3.0)
        if self.family == "uniform":
            return (0.0, 1.0, 0.0, 9.0 / 5.0)
        a = np.asarray(self.atoms)
        w = np.asarray(self.weights)
        return tuple(float(np.sum(w * a**k)) for k in range(1, 5))

    def with_symmetry(self, symmetry):
        return EntryLaw(self.family, symmetry, self.atoms, self.weights)

    def draw(self, rng, size):
        if self.family == "gaussian":
            return rng.standard_normal(size)
        if self.family == "uniform":
            return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size)
        return rng.choice(np.asarray(self.atoms), size=size, p=np.asarray(self.weights))


def gaussian_law(symmetry="real"):
    return EntryLaw("gaussian", symmetry)


def uniform_law(symmetry="real"):
    return EntryLaw("uniform", symmetry)


def bernoulli_law(symmetry="real"):
    return EntryLaw("bernoulli", symmetry, (-1.0, 1.0), (0.5, 0.5))


def four_moment_law(m3: float, m4: float, symmetry="real") -> EntryLaw:
    """Finitely supported law with mean 0, variance 1 and the given third and fourth moments.

    Uses the three-point family ``{a, 0, b}``: matching the moments forces
    ``a + b = m3`` and ``a*b = m3**2 - m4``, and the atom at zero has weight
    ``1 - 1/(m4 - m3**2)``.  On the boundary ``m4 = 1 + m3**2`` the zero atom
    vanishes and the law is two-point.
    """
    if m4 < 1.0 + m3 * m3 - 1e-12:
        raise InfeasibleMomentsError(f"no law with m3={m3}, m4={m4}: need m4 >= 1 + m3^2")
    m4 = max(m4, 1.0 + m3 * m3)
    disc = np.sqrt(m3 * m3 + 4.0 * (m4 - m3 * m3))
    a, b = (m3 - disc) / 2.0, (m3 + disc) / 2.0
    p = 1.0 / (a * (a - b))
    r = -1.0 / (b * (a - b))
    q = 1.0 - p - r
    if q <= 1e-15:
        atoms, weights = (a, b), (p, r)
        family = "bernoulli" if abs(m3) < 1e-15 else "two-point"
    else:
        atoms, weights = (a, 0.0, b), (p, q, r)
        family = "three-point"
    return EntryLaw(family, symmetry, tuple(float(x) for x in atoms), tuple(float(x) for x in weights))


@dataclass(frozen=True, eq=False)
class MatrixSample:
    """One Hermitian matrix ``h`` with its provenance."""

    h: np.ndarray
    profile_kind: str = "flat"
    law_family: str = "gaussian"
    seed: int | None = None

    @property
    def N(self) -> int:
        return self.h.shape[0]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.h)

    def to_dict(self):
        d = {
            "N": self.N, "kind": self.profile_kind, "law": self.law_family,
            "seed": self.seed, "complex": self.is_complex,
            "values": np.real(self.h).ravel().tolist(),
        }
        if self.is_complex:
            d["imag"] = np.imag(self.h).ravel().tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        N = int(d["N"])
        h = np.asarray(d["values"], dtype=float).reshape(N, N)
        if d.get("complex"):
            h = h + 1j * np.asarray(d["imag"], dtype=float).reshape(N, N)
        return cls(h, d.get("kind", "flat"), d.get("law", "gaussian"), d.get("seed"))


def _hermitize(upper_real, upper_imag=None):
    h = np.triu(upper_real)
    h = h + np.triu(h, 1).T
    if upper_imag is None:
        return h
    im = np.triu(upper_imag, 1)
    return h + 1j * (im - im.T)


def sample_matrix(profile: VarianceProfile, law: EntryLaw, seed: int) -> MatrixSample:
    """Draw ``h_ij = sqrt(s_ij) * zeta_ij`` with independent entries up to symmetry."""
    N = profile.N
    rng = stream(seed, 0x5A)
    sd = np.sqrt(profile.s)
    x = law.draw(rng, (N, N))
    if law.symmetry == "complex":
        y = law.draw(rng, (N, N))
        off = np.sqrt(0.5)
        re = np.where(np.eye(N, dtype=bool), x, off * x)
        h = _hermitize(re, off * y) * sd
    else:
        h = _hermitize(x) * sd
    return MatrixSample(h, profile.kind, law.family, seed)


def gaussian_ensemble(N: int, beta: int, seed: int) -> MatrixSample:
    """GOE (``beta=1``) or GUE (``beta=2``) normalized so the spectrum fills [-2, 2].

    Off-diagonal ``E|h_ij|^2 = 1/N``; diagonal variance ``2/(beta N)``.  This is
    the invariant law of the entrywise Ornstein-Uhlenbeck flow and its
    eigenvalue density is ``exp(-beta N H)`` with ``V = x^2/2``.
    """
    rng = stream(seed, 0x6E)
    if beta == 1:
        a = rng.standard_normal((N, N))
        h = (a + a.T) / np.sqrt(2.0 * N)
        return MatrixSample(h, "flat", "goe", seed)
    if beta == 2:
        a = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
        h = (a + a.conj().T) / (2.0 * np.sqrt(N))
        return MatrixSample(h, "flat", "gue", seed)
    raise ValueError("matrix ensembles exist only for beta in {1, 2}")


def standardized_entries(sample: MatrixSample, profile: VarianceProfile, diagonal=False):
    """Pooled real standardized entries ``zeta`` of a sample.

    Off-diagonal complex entries contribute their real and imaginary parts
    scaled by ``sqrt(2)``.
    """
    iu = np.triu_indices(sample.N, 0 if diagonal else 1)
    z = sample.h[iu] / np.sqrt(profile.s[iu])
    if sample.is_complex:
        if diagonal:
            z = z[iu[0] != iu[1]]
        return np.sqrt(2.0) * np.concatenate([z.real, z.imag])
    return z


def write_csv(obj, path_or_buf, seed=None):
    """Write a profile or sample as CSV: one ``#`` metadata line, then row-major rows.

    Complex samples use ``re+imj`` cells as produced by Python's ``complex``.
    """
    if isinstance(obj, VarianceProfile):
        meta = {"N": obj.N, "kind": obj.kind, "W": obj.W, "shape": obj.shape, "seed": seed}
        values = obj.s
    else:
        meta = {"N": obj.N, "kind": obj.profile_kind, "law": obj.law_family, "seed": obj.seed}
        values = obj.h
    own = isinstance(path_or_buf, str)
    buf = open(path_or_buf, "w", newline="", encoding="utf-8") if own else path_or_buf
    try:
        buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        w = csv.writer(buf)
        for row in values:
            w.writerow([repr(complex(v)) if np.iscomplexobj(values) else repr(float(v)) for v in row])
    finally:
        if own:
            buf.close()


def read_csv(path_or_buf):
    """Inverse of :func:`write_csv`; returns ``(meta, values)``."""
    text = open(path_or_buf, encoding="utf-8").read() if isinstance(path_or_buf, str) else path_or_buf.read()
    first, rest = text.split("\n", 1)
    meta = json.loads(first[2:])
    rows = list(csv.reader(io.StringIO(rest)))
    if rows and any("j" in c for c in rows[0]):
        values = np.array([[complex(c.strip("()")) for c in r] for r in rows])
    else:
        values = np.array([[float(c) for c in r] for r in rows])
    return meta, values


def law_by_name(name: str, symmetry="real") -> EntryLaw:
    """Entry law from a config string: gaussian, bernoulli, uniform, three-point."""
    if name == "gaussian":
        return gaussian_law(symmetry)
    if name == "bernoulli":
        return bernoulli_law(symmetry)
    if name == "uniform":
        return uniform_law(symmetry)
    if name == "three-point":
        return four_moment_law(0.0, 3.0, symmetry)
    raise ValueError(f"unknown entry law {name!r}")


def draw_matrix(ensemble: str, N: int, seed: int, profile: VarianceProfile | None = None) -> MatrixSample:
    """Matrix by ensemble name.

    ``"goe"``/``"gue"`` give the invariant Gaussian ensembles; any entry-law
    name gives a generalized Wigner matrix on ``profile`` (flat by default),
    with a ``"complex-"`` prefix selecting the Hermitian class.
    """
    if ensemble == "goe":
        return gaussian_ensemble(N, 1, seed)
    if ensemble == "gue":
        return gaussian_ensemble(N, 2, seed)
    symmetry = "real"
    if ensemble.startswith("complex-"):
        symmetry, ensemble = "complex", ensemble[len("complex-"):]
    profile = flat_profile(N) if profile is None else profile
    return sample_matrix(profile, law_by_name(ensemble, symmetry), seed)
