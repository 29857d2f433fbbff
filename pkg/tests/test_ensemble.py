import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rmtlab.ensemble import (
    InfeasibleMomentsError, ProfileError, band_profile, bernoulli_law, custom_profile, draw_matrix,
    flat_profile, four_moment_law, gaussian_ensemble, gaussian_law, law_by_name, read_csv,
    sample_matrix, shape_diffusion_constant, standardized_entries, write_csv,
)


def test_flat_profile_small():
    S = flat_profile(4)
    assert np.all(S.s == 0.25)
    assert S.M == 4
    assert flat_profile(1).s[0, 0] == 1.0


def test_flat_profile_rows_sum_to_one():
    S = flat_profile(1000)
    assert np.max(np.abs(S.s.sum(axis=1) - 1)) <= 1e-12


def test_band_profile_uniform_small():
    S = band_profile(8, 4)
    # |i-j|_8 <= 4 covers every offset on the 8-torus
    assert np.allclose(S.s, 1 / 8)
    assert np.allclose(S.s.sum(axis=1), 1)


def test_band_equals_flat_when_W_is_N():
    N = 9
    assert np.allclose(band_profile(N, N).s, flat_profile(N).s, atol=1e-15)


def test_band_profile_cutoff_and_M():
    S = band_profile(400, 16)
    d = np.minimum(np.arange(400), 400 - np.arange(400))
    assert np.all(S.row[d > 16] == 0)
    # 2W + 1 equal entries after normalization
    assert S.M == pytest.approx(33)


@given(st.integers(2, 60), st.data(), st.sampled_from(["uniform", "gaussian"]))
@settings(max_examples=40, deadline=None)
def test_profile_invariants(N, data, shape):
    W = data.draw(st.integers(1, N))
    S = band_profile(N, W, shape)
    assert np.array_equal(S.s, S.s.T)
    assert np.max(np.abs(S.s.sum(axis=1) - 1)) <= 1e-12
    assert S.s.max() == pytest.approx(1 / S.M, rel=1e-15)


def test_band_profile_rejects_bad_width():
    with pytest.raises(ProfileError):
        band_profile(10, 11)
    with pytest.raises(ProfileError):
        band_profile(10, 4, "triangle")


def test_custom_profile_checks():
    with pytest.raises(ProfileError):
        custom_profile([[0.5, 0.2], [0.2, 0.5]])


def test_gaussian_entries_moments():
    S = flat_profile(2000)
    H = sample_matrix(S, gaussian_law(), 3)
    z = standardized_entries(H, S)[:100_000]
    assert abs(z.mean()) <= 4 / np.sqrt(z.size)
    assert abs(z.var() - 1) <= 0.05


def test_bernoulli_entries_are_signs():
    S = flat_profile(50)
    H = sample_matrix(S, bernoulli_law(), 1)
    assert set(np.unique(np.sqrt(50) * H.h).round(12)) == {-1.0, 1.0}


def test_sample_is_deterministic():
    S = band_profile(40, 5)
    a = sample_matrix(S, gaussian_law("complex"), 9).h
    b = sample_matrix(S, gaussian_law("complex"), 9).h
    assert a.tobytes() == b.tobytes()
    assert np.array_equal(a, a.conj().T)
    assert np.all(np.imag(np.diag(a)) == 0)


@pytest.mark.parametrize("name", ["gaussian", "bernoulli", "three-point", "uniform"])
def test_moment_check_pooled_entries(name):
    S = flat_profile(200)
    law = law_by_name(name)
    z = standardized_entries(sample_matrix(S, law, 5), S)
    m = law.moments
    for k in range(1, 5):
        xk = z**k
        se = xk.std() / np.sqrt(z.size)
        assert abs(xk.mean() - m[k - 1]) <= 5 * se + 1e-12


def test_four_moment_law_three_point():
    law = four_moment_law(0, 3)
    atoms = dict(zip(np.round(law.atoms, 12), law.weights))
    assert atoms[0.0] == pytest.approx(2 / 3)
    assert atoms[round(np.sqrt(3), 12)] == pytest.approx(1 / 6)
    assert atoms[round(-np.sqrt(3), 12)] == pytest.approx(1 / 6)
    a, w = np.array(law.atoms), np.array(law.weights)
    assert [np.sum(w * a**k) for k in range(1, 5)] == pytest.approx([0, 1, 0, 3], abs=1e-12)


def test_four_moment_law_bernoulli_and_infeasible():
    law = four_moment_law(0, 1)
    assert sorted(law.atoms) == pytest.approx([-1, 1])
    assert law.weights == pytest.approx((0.5, 0.5))
    with pytest.raises(InfeasibleMomentsError):
        four_moment_law(0, 0.5)


@given(st.floats(-2, 2), st.floats(0, 5))
@settings(max_examples=50, deadline=None)
def test_four_moment_law_matches_moments(m3, extra):
    m4 = 1 + m3 * m3 + extra
    law = four_moment_law(m3, m4)
    a, w = np.array(law.atoms), np.array(law.weights)
    assert np.all(w >= 0)
    assert [np.sum(w * a**k) for k in range(5)] == pytest.approx([1, 0, 1, m3, m4], abs=1e-9 * (1 + m4))


def test_gaussian_ensemble_normalization():
    H = gaussian_ensemble(400, 1, 0).h
    iu = np.triu_indices(400, 1)
    assert np.var(np.sqrt(400) * H[iu]) == pytest.approx(1, abs=0.02)
    d = np.sqrt(1000) * np.diag(gaussian_ensemble(1000, 1, 1).h)
    assert np.var(d) == pytest.approx(2, abs=0.3)
    G = gaussian_ensemble(300, 2, 0).h
    iu = np.triu_indices(300, 1)
    assert np.mean(300 * np.abs(G[iu]) ** 2) == pytest.approx(1, abs=0.02)
    with pytest.raises(ValueError):
        gaussian_ensemble(3, 4, 0)


def test_draw_matrix_names():
    assert draw_matrix("gue", 5, 0).is_complex
    assert draw_matrix("complex-bernoulli", 5, 0).is_complex
    assert not draw_matrix("three-point", 5, 0).is_complex


def test_diffusion_constant_uniform():
    assert shape_diffusion_constant("uniform") == pytest.approx(1 / 6)


def test_csv_round_trip():
    S = band_profile(6, 2)
    buf = io.StringIO()
    write_csv(S, buf, seed=1)
    buf.seek(0)
    meta, values = read_csv(buf)
    assert meta["W"] == 2 and meta["seed"] == 1
    assert np.array_equal(values, S.s)
    H = draw_matrix("gue", 4, 2)
    buf = io.StringIO()
    write_csv(H, buf, seed=2)
    buf.seek(0)
    assert np.array_equal(read_csv(buf)[1], H.h)
