import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from rmtlab.ensemble import gaussian_ensemble
from rmtlab.gapstats import (
    EXPONENTIAL, SURMISE, SURMISE_GUE, GapSample, ReferenceLaw, UnfoldingError, bulk_window,
    distribution_distance, histogram_curve, law_comparison_experiment, npoint_correlation, pair_correlation,
    sample_surmise, sine_experiment, sine_kernel, surmise_cdf, surmise_experiment, surmise_pdf, unfold,
    unfold_points, write_curve_csv,
)
from rmtlab.rng import stream
from rmtlab.spectral import classical_locations, eigen_decompose

# independent oracle: max |F_exp - F_surmise| on a 2e6-point grid
KS_EXP_VS_SURMISE = 0.21572582909654747


def test_unfold_classical_locations():
    N = 1000
    g = unfold(classical_locations(N)).gaps
    assert np.max(np.abs(g - 1)) <= 5 / N


def test_unfold_equally_spaced_follows_density():
    lam = np.linspace(-1, 1, 101)
    gs = unfold(lam, alpha=0.0).gaps
    mid = gs.size // 2
    assert np.all(np.diff(gs[:mid]) > 0) and np.all(np.diff(gs[mid:]) < 0)


def test_unfold_goe_mean_gap():
    gs = unfold(eigen_decompose(gaussian_ensemble(1000, 1, 0))).check()
    assert gs.mean == pytest.approx(1, abs=0.05)
    assert np.all(gs.gaps >= 0)


def test_unfold_rejects_edge_window():
    lam = classical_locations(100)
    with pytest.raises(UnfoldingError):
        unfold(lam, window=(2, 50))
    with pytest.raises(UnfoldingError):
        unfold(lam, window=(60, 50))


def test_gapsample_check_flags_bad_unfolding():
    with pytest.raises(UnfoldingError):
        GapSample(np.full(10, 2.0)).check()


def test_bulk_window():
    assert bulk_window(1000) == (100, 900)


def test_unfold_points_spacing():
    pts = unfold_points(classical_locations(500))
    assert np.allclose(np.diff(pts), 1, atol=1e-9)


def test_surmise_values():
    assert surmise_pdf(0) == 0
    assert surmise_pdf(1) == pytest.approx(np.pi / 2 * np.exp(-np.pi / 4))
    assert surmise_pdf(1) == pytest.approx(0.71614, abs=1e-4)


@pytest.mark.parametrize("law", [SURMISE, SURMISE_GUE, EXPONENTIAL])
def test_reference_laws_normalized(law):
    total = integrate.quad(law.pdf, 0, np.inf, epsabs=1e-13, epsrel=1e-13)[0]
    mean = integrate.quad(lambda s: s * law.pdf(s), 0, np.inf, epsabs=1e-13, epsrel=1e-13)[0]
    assert total == pytest.approx(1, abs=1e-8)
    assert mean == pytest.approx(1, abs=1e-8)


@pytest.mark.parametrize("beta", [1, 2])
def test_surmise_cdf_is_integral_of_pdf(beta):
    for s in (0.3, 1.0, 2.5):
        val = integrate.quad(lambda t: surmise_pdf(t, beta), 0, s, epsabs=1e-14)[0]
        assert surmise_cdf(s, beta) == pytest.approx(val, abs=1e-12)


def test_sine_kernel_values():
    assert sine_kernel(0) == 1
    assert sine_kernel(1) == pytest.approx(0, abs=1e-16)
    assert sine_kernel(0.5) == pytest.approx(2 / np.pi)
    assert npoint_correlation([0, 0.5]) == pytest.approx(1 - (2 / np.pi) ** 2)
    assert npoint_correlation([0, 0.5]) == pytest.approx(0.59472, abs=1e-5)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.permutations(range(3)))
@settings(max_examples=50, deadline=None)
def test_npoint_symmetric(alphas, perm):
    a = np.array(alphas)
    assert npoint_correlation(a[list(perm)]) == pytest.approx(npoint_correlation(a), abs=1e-12)


def test_self_test_inverse_cdf_sampling():
    x = SURMISE.sample(stream(0, 1), 10_000)
    assert distribution_distance(x, SURMISE, n_boot=0).ks < 0.02


@pytest.mark.parametrize("beta", [1, 2])
def test_exact_surmise_sampler(beta):
    law = SURMISE if beta == 1 else SURMISE_GUE
    x = sample_surmise(stream(3, beta), 20_000, beta)
    assert distribution_distance(x, law, n_boot=0).ks < 0.015


def test_exponential_vs_surmise_separation():
    x = EXPONENTIAL.sample(stream(1, 2), 100_000)
    ks = distribution_distance(x, SURMISE, n_boot=0).ks
    assert ks > 0.2
    assert ks == pytest.approx(KS_EXP_VS_SURMISE, abs=0.01)


def test_two_by_two_goe_vs_surmise():
    rng = stream(5, 0)
    a = rng.standard_normal((100_000, 2, 2))
    ev = np.linalg.eigvalsh((a + np.swapaxes(a, 1, 2)) / 2)
    gaps = (ev[:, 1] - ev[:, 0]) / np.sqrt(np.pi)
    assert distribution_distance(gaps, SURMISE, n_boot=0).ks < 0.01


def test_two_sample_symmetry():
    x = stream(0, 3).normal(size=500)
    y = stream(0, 4).normal(0.1, 1, size=700)
    a = distribution_distance(x, y, n_boot=0)
    b = distribution_distance(y, x, n_boot=0)
    assert a.ks == b.ks
    assert a.l1 == pytest.approx(b.l1)


@given(st.integers(0, 1000))
@settings(max_examples=20, deadline=None)
def test_distance_ranges(seed):
    x = stream(seed, 0).exponential(size=200)
    rep = distribution_distance(x, SURMISE, n_boot=20, seed=seed)
    assert 0 <= rep.ks <= 1 and 0 <= rep.l1 <= 2
    assert rep.ks_ci[0] <= rep.ks_ci[1]


def test_bootstrap_radius_shrinks():
    rad = [distribution_distance(SURMISE.sample(stream(7, n), n), SURMISE, n_boot=200).ks_radius
           for n in (1000, 16000)]
    # about 1/sqrt(n): a factor of 4 for 16x the data
    assert 2.5 <= rad[0] / rad[1] <= 6


def test_reference_law_moments():
    mu, var = SURMISE.moments()
    assert mu == pytest.approx(1)
    assert var == pytest.approx(4 / np.pi - 1)


def test_pair_correlation_poisson_flat():
    pts = [np.sort(stream(2, s).uniform(0, 2000, 2000)) for s in range(10)]
    curve = pair_correlation(pts, reference=None)
    assert curve.flatness() < 0.05


def test_pair_correlation_gue_repulsion():
    pts = [unfold_points(eigen_decompose(gaussian_ensemble(400, 2, s))) for s in range(5)]
    curve = pair_correlation(pts)
    assert curve.value[0] < 0.05
    assert curve.l1_to_reference(3.0) < 0.2


def test_pair_correlation_needs_reference():
    pts = [np.arange(100.0)]
    with pytest.raises(ValueError):
        pair_correlation(pts, reference=None).l1_to_reference()


def test_histogram_curve_and_csv(tmp_path):
    x = SURMISE.sample(stream(1, 1), 5000)
    curve = histogram_curve(x, np.linspace(0, 4, 21), n_boot=50)
    assert np.sum(curve.value * 0.2) == pytest.approx(np.mean(x < 4))
    assert np.all(curve.ci_low <= curve.ci_high)
    path = tmp_path / "c.csv"
    write_curve_csv(path, curve, {"seed": 1})
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#") and lines[1] == "bin_center,value,ci_low,ci_high"
    assert len(lines) == 22


def test_surmise_experiment_small():
    rep = surmise_experiment(n2_samples=20_000, N=400, samples=4, n_boot=20)
    assert rep.summary["n2"]["ks"] < 0.02
    assert rep.summary["bulk"]["ks"] < 0.05


def test_sine_experiment_small():
    rep = sine_experiment(N=400, samples=5)
    assert rep.summary["poisson_flatness"] < 0.1


def test_law_comparison_thread_independent():
    a = law_comparison_experiment(N=100, samples=4, n_boot=10, threads=1)
    b = law_comparison_experiment(N=100, samples=4, n_boot=10, threads=4)
    assert a.to_dict()["summary"] == b.to_dict()["summary"]
