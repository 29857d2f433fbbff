import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from rmtlab.ensemble import band_profile, flat_profile, gaussian_ensemble
from rmtlab.spectral import (
    SemicircleModel, SpectralError, classical_location, classical_locations, control_params,
    control_parameter_pi, eigen_decompose, empirical_counting, empirical_stieltjes, eta_grid, eta_thresholds,
    resolvent, resolvent_diagonal, semicircle_cdf, semicircle_density, semicircle_stieltjes,
    stability_gamma,
)

# independent oracle: brentq on the quadrature of the density
GAMMA_3_4 = 0.8079455065990336
# independent oracle: dense inverse of 1 - m^2 S, flat N = 8, z = 2i
GAMMA_FLAT8_2I = 1.109834957055045


def test_density_values():
    assert semicircle_density(0) == pytest.approx(1 / np.pi)
    assert semicircle_density(1) == pytest.approx(np.sqrt(3) / (2 * np.pi))
    assert semicircle_density(2) == 0 and semicircle_density(-2) == 0
    assert semicircle_density(2.5) == 0


def test_density_normalized():
    assert integrate.quad(semicircle_density, -2, 2, epsabs=1e-13)[0] == pytest.approx(1, abs=1e-10)


def test_stieltjes_values():
    assert semicircle_stieltjes(2j) == pytest.approx((np.sqrt(2) - 1) * 1j, abs=1e-15)
    assert semicircle_stieltjes(1e-9j) == pytest.approx(1j, abs=1e-8)
    E = 0.8047
    assert semicircle_stieltjes(E + 1e-6j).imag == pytest.approx(np.pi * semicircle_density(E), abs=1e-5)


def test_stieltjes_rejects_lower_half_plane():
    with pytest.raises(SpectralError):
        semicircle_stieltjes(1 - 0.1j)


@given(st.floats(-5, 5), st.floats(1e-6, 10))
@settings(max_examples=200, deadline=None)
def test_stieltjes_identity_and_sign(E, eta):
    z = complex(E, eta)
    m = semicircle_stieltjes(z)
    assert m.imag > 0
    assert abs(m + 1 / m + z) <= 1e-12 * max(1, abs(z))


def test_stieltjes_far_field():
    z = 1e6 + 1j
    assert semicircle_stieltjes(z) * (-z) == pytest.approx(1, abs=1e-6)


def test_classical_locations():
    assert classical_location(500, 1000) == pytest.approx(0, abs=1e-12)
    assert classical_location(1000, 1000) == 2
    assert classical_location(750, 1000) == pytest.approx(GAMMA_3_4, abs=1e-10)
    # the rounded value quoted for this example
    assert classical_location(750, 1000) == pytest.approx(0.8047, abs=5e-3)


@pytest.mark.parametrize("N", [10, 1000])
def test_counting_at_classical_locations(N):
    g = classical_locations(N)
    assert np.max(np.abs(semicircle_cdf(g) - np.arange(1, N + 1) / N)) <= 1e-10
    assert np.all(np.diff(g) > 0)


def test_classical_locations_returns_copy():
    g = classical_locations(20)
    g[:] = 0
    assert classical_locations(20)[-1] == 2


def test_eigen_decompose_small():
    assert eigen_decompose(np.diag([1.0, -1.0])).eigenvalues == pytest.approx([-1, 1])
    sd = eigen_decompose(np.array([[0.0, 1.0], [1.0, 0.0]]), want_vectors=True)
    assert sd.eigenvalues == pytest.approx([-1, 1])
    u = sd.vectors
    assert abs(u[0, 0] * u[1, 0]) == pytest.approx(0.5) and u[0, 0] * u[1, 0] < 0
    assert u[0, 1] * u[1, 1] == pytest.approx(0.5)


def test_eigen_decompose_invariants(goe50):
    sd = eigen_decompose(goe50, want_vectors=True)
    assert np.trace(goe50.h) == pytest.approx(sd.eigenvalues.sum(), rel=1e-9, abs=1e-12)
    assert np.all(np.diff(sd.eigenvalues) >= 0)
    U = sd.vectors
    assert np.max(np.abs(U.T @ U - np.eye(50))) <= 1e-9
    assert np.max(np.abs(goe50.h @ U - U * sd.eigenvalues)) <= 1e-8 * np.abs(sd.eigenvalues).max()


def test_resolvent_diag_example():
    R = resolvent(np.diag([1.0, -1.0]), 1j)
    assert np.allclose(R.G, np.diag([1 / (1 - 1j), 1 / (-1 - 1j)]))
    assert R.m_N == pytest.approx(0.5j)
    a = 0.7
    assert resolvent(np.array([[a]]), 0.2 + 0.5j).G[0, 0] == pytest.approx(1 / (a - 0.2 - 0.5j))


def test_resolvent_solve_residual():
    H = gaussian_ensemble(100, 1, 4)
    z = 0.1 + 0.05j
    R = resolvent(H, z)
    assert np.max(np.abs((H.h - z * np.eye(100)) @ R.G - np.eye(100))) <= 1e-9
    assert np.allclose(R.G, R.G.T)
    assert R.m_N.imag > 0
    assert resolvent(H, z, mode="diagonal").G is None


def test_resolvent_diagonal_matches_solve(gue30):
    sd = eigen_decompose(gue30, want_vectors=True)
    zs = np.array([0.3 + 0.1j, -1 + 0.01j])
    d = resolvent_diagonal(sd, zs)
    for k, z in enumerate(zs):
        assert np.allclose(d[:, k], resolvent(gue30, z).diagonal, rtol=1e-9)


def test_empirical_stieltjes():
    assert empirical_stieltjes(np.array([-1.0, 1.0]), 1j) == pytest.approx(0.5j)
    assert empirical_stieltjes(np.zeros(5), 0.25j) == pytest.approx(4j)
    H = gaussian_ensemble(100, 1, 6)
    z = -0.4 + 0.2j
    assert empirical_stieltjes(eigen_decompose(H), z) == pytest.approx(np.trace(resolvent(H, z).G) / 100,
                                                                       rel=1e-9)


def test_empirical_stieltjes_converges():
    lam = eigen_decompose(gaussian_ensemble(500, 1, 2))
    assert abs(empirical_stieltjes(lam, 1j) - semicircle_stieltjes(1j)) <= 0.1


def test_empirical_counting():
    assert empirical_counting(np.array([-1.0, 0.0, 1.0]), 0.0) == pytest.approx(2 / 3)


def test_gamma_flat():
    S = flat_profile(8)
    g, gt = stability_gamma(S, 2j)
    assert g == pytest.approx(GAMMA_FLAT8_2I, rel=1e-12)
    assert gt == pytest.approx(1, abs=1e-12)
    for z in (0.5 + 0.01j, 1.9 + 0.1j, -1 + 1j):
        g, gt = stability_gamma(flat_profile(50), z)
        assert gt == pytest.approx(1, abs=1e-9) and gt <= g + 1e-12


def test_gamma_dense_path_agrees():
    from rmtlab.ensemble import custom_profile
    S = band_profile(40, 6)
    z = 0.2 + 0.05j
    assert stability_gamma(custom_profile(S.s), z) == pytest.approx(stability_gamma(S, z), rel=1e-8)


def test_gamma_tilde_grows_with_band_gap():
    # at the edge m^2 -> 1, so the spectral gap of S near 1 controls the inverse
    N, z = 200, 2 + 1e-4j
    gts = [stability_gamma(band_profile(N, W), z)[1] for W in (40, 20, 10)]
    assert gts[0] < gts[1] < gts[2]
    # compare with the eigenvalues of the circulant S
    for W, gt in zip((40, 20, 10), gts):
        shat = np.fft.fft(band_profile(N, W).row).real
        gap = 1 - np.sort(shat)[-2]
        assert gt <= 10 / gap


@given(st.floats(-2.5, 2.5), st.floats(1e-3, 5), st.integers(3, 40))
@settings(max_examples=40, deadline=None)
def test_gamma_tilde_le_gamma(E, eta, W):
    S = band_profile(80, W)
    g, gt = stability_gamma(S, complex(E, eta))
    assert gt <= g + 1e-12


def test_eta_thresholds_flat_and_edge():
    S = flat_profile(1000)
    g = 0.05
    t0, e0 = eta_thresholds(S, 0.0, g)
    assert t0 <= e0
    # flat case reduces to 1/(N eta) <= min(N^-g, N^-2g / Im m)
    assert t0 <= 20 * 1000 ** (-1 + 2 * g)
    assert eta_thresholds(S, 1.9, g)[1] >= e0
    t1, _ = eta_thresholds(S, 0.0, g, ratio=1.05 ** 0.5)
    assert abs(t1 - t0) <= t0 * 0.05 + 1e-15


def test_eta_grid():
    g = eta_grid(1e-3, 1.0, 1.05)
    assert g[0] == 1e-3 and g[-1] == pytest.approx(1.0)
    assert np.all(g[1:] / g[:-1] <= 1.05 + 1e-12)


def test_control_params_zero_matrix():
    z = 0.3 + 0.2j
    p = control_params(resolvent(np.zeros((4, 4)), z), flat_profile(4))
    assert p.lambda_o == 0
    assert p.v + semicircle_stieltjes(z) == pytest.approx(np.full(4, -1 / z))


def test_pi_arithmetic():
    assert control_parameter_pi(1.0, 100, 1.0) == pytest.approx(0.11)


def test_control_params_invariants(goe50):
    z = 0.1 + 0.3j
    p = control_params(resolvent(goe50, z), flat_profile(50), with_gamma=True)
    assert p.lam == max(p.lambda_o, p.lambda_d)
    assert p.theta_dev <= p.lambda_d + 1e-14
    assert p.gamma_tilde <= p.gamma
    m = semicircle_stieltjes(z)
    assert p.pi == control_parameter_pi(m.imag, 50, 0.3)


def test_lambda_o_bounded_by_pi():
    N = 1000
    z = complex(0, N ** -0.6)
    S = flat_profile(N)
    ok = [control_params(resolvent(gaussian_ensemble(N, 1, s), z), S).lambda_o <= 10 * control_params(
        resolvent(gaussian_ensemble(N, 1, s), z), S).pi for s in range(4)]
    assert np.mean(ok) >= 0.95


def test_semicircle_model_facade():
    sm = SemicircleModel()
    assert sm.density(0.0) == semicircle_density(0.0)
    assert sm.classical_location(5, 10) == pytest.approx(0, abs=1e-12)
