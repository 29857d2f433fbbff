import numpy as np
import pytest
from scipy import integrate, stats

from rmtlab.dbm import (
    CollisionError, FlowConfig, ParticleState, dbm_drift, dbm_integrate, dbm_integrate_batch, entrywise_ou,
    flow_gap_law, ks_noise_level, matrix_ou_flow, relaxation_experiment, sde_to_flow_time,
    stationary_gap_law, two_particle_experiment,
)
from rmtlab.ensemble import draw_matrix, flat_profile, gaussian_ensemble, standardized_entries
from rmtlab.gapstats import distribution_distance
from rmtlab.rng import stream


def quad_gap_cdf(beta):
    """CDF of the density proportional to s^beta exp(-beta s^2 / 4), by quadrature."""
    f = lambda s: s**beta * np.exp(-beta * s * s / 4)
    Z = integrate.quad(f, 0, np.inf)[0]
    return np.vectorize(lambda x: integrate.quad(f, 0, max(x, 0.0))[0] / Z)


def test_flow_config_defaults_and_validation():
    assert FlowConfig(t=2.0).dt == 1e-3
    assert FlowConfig(t=0.1).dt == pytest.approx(1e-4)
    assert FlowConfig(t=0.1).n_steps == 1000
    with pytest.raises(ValueError):
        FlowConfig(t=0.1, dt=0.2)
    with pytest.raises(ValueError):
        FlowConfig(beta=0)
    with pytest.raises(ValueError):
        FlowConfig(scheme="milstein")


def test_particle_state_requires_order():
    with pytest.raises(ValueError):
        ParticleState(np.array([0.0, 0.0]))


def test_matrix_flow_t0_identity():
    H0 = draw_matrix("bernoulli", 20, 1)
    assert np.array_equal(matrix_ou_flow(H0, 0.0, 3).h, H0.h)


def test_matrix_flow_rejects_band_profile():
    from rmtlab.ensemble import band_profile, gaussian_law, sample_matrix
    H0 = sample_matrix(band_profile(20, 3), gaussian_law(), 0)
    with pytest.raises(ValueError):
        matrix_ou_flow(H0, 1.0, 0)


def test_matrix_flow_long_time_is_gaussian():
    N = 450
    H = matrix_ou_flow(draw_matrix("bernoulli", N, 2), 50.0, 4)
    z = standardized_entries(H, flat_profile(N))[:100_000]
    assert np.var(z) == pytest.approx(1, rel=0.02)
    # Bernoulli entries would have kurtosis 1
    assert np.mean(z**4) == pytest.approx(3, rel=0.05)


def test_matrix_flow_variance_interpolation():
    N, t = 450, 0.5
    z = standardized_entries(matrix_ou_flow(draw_matrix("bernoulli", N, 5), t, 6), flat_profile(N))
    v0 = 1.0
    target = np.exp(-t) * v0 + (1 - np.exp(-t)) * 1.0
    se = np.std(z**2) / np.sqrt(z.size)
    assert abs(np.var(z) - target) <= 3 * se
    # fourth moment interpolates between 1 (Bernoulli) and 3
    a = np.exp(-t / 2)
    m4 = a**4 * 1 + 6 * a**2 * (1 - a**2) + 3 * (1 - a**2) ** 2
    se4 = np.std(z**4) / np.sqrt(z.size)
    assert abs(np.mean(z**4) - m4) <= 4 * se4


def test_matrix_flow_matches_entrywise_ou():
    n, t = 10_000, 1.0
    rng = stream(0, 9)
    x0 = np.array([-0.5, 0.5])
    h0 = np.tile(np.diag(x0), (n, 1, 1))
    flowed = entrywise_ou(h0, t, 0.01, seed=3)
    ev_ou = np.linalg.eigvalsh(flowed)
    a = rng.standard_normal((n, 2, 2))
    U = (a + np.swapaxes(a, 1, 2)) / 2.0
    ev_mf = np.linalg.eigvalsh(np.exp(-t / 2) * h0 + np.sqrt(1 - np.exp(-t)) * U)
    g_ou = ev_ou[:, 1] - ev_ou[:, 0]
    g_mf = ev_mf[:, 1] - ev_mf[:, 0]
    assert distribution_distance(g_ou, g_mf, n_boot=0).ks < 0.02


@pytest.mark.parametrize("beta", [1, 2])
def test_flow_gap_law_limits(beta):
    law = flow_gap_law(1.0, 30.0, beta)
    s = np.linspace(0.05, 5, 50)
    assert law.cdf(s) == pytest.approx(stationary_gap_law(beta).cdf(s), abs=1e-6)


@pytest.mark.parametrize("beta", [1, 2, 4])
def test_stationary_gap_law_matches_quadrature(beta):
    s = np.linspace(0, 6, 25)
    assert stationary_gap_law(beta).cdf(s) == pytest.approx(quad_gap_cdf(beta)(s), abs=1e-9)


def test_drift_sign_and_fixed_point():
    x = np.array([[-0.05, 0.05], [-3.0, 3.0]])
    d = dbm_drift(x, 1.0)
    assert d[0, 1] > 0 > d[0, 0]  # repulsion dominates when close
    assert d[1, 1] < 0 < d[1, 0]  # confinement dominates when far
    out = dbm_integrate(ParticleState(np.array([-0.05, 0.05])), FlowConfig(beta=1, t=40, dt=0.01, noise=False))
    assert out.x[1] - out.x[0] == pytest.approx(np.sqrt(2), abs=1e-6)


def test_n1_stationary_variance():
    beta = 1
    x, _ = dbm_integrate_batch(np.zeros((10_000, 1)), FlowConfig(beta=beta, t=50.0, dt=0.01, seed=1))
    # invariant law exp(-beta N H) with H = x^2/4 at N = 1
    assert np.var(x) == pytest.approx(2 / beta, rel=0.05)


@pytest.mark.slow
def test_n2_long_run_gap_law():
    beta = 1
    x0 = np.tile([-0.5, 0.5], (10_000, 1))
    x, _ = dbm_integrate_batch(x0, FlowConfig(beta=beta, t=10.0, dt=2e-3, seed=2))
    assert np.all(np.diff(x, axis=1) > 0)
    assert stats.kstest(x[:, 1] - x[:, 0], quad_gap_cdf(beta)).statistic < 0.05


def test_sde_clock():
    assert sde_to_flow_time(1.0, 2) == 1.0
    assert sde_to_flow_time(1.0, 1) == 0.5


def test_two_particle_experiment_beta1():
    rep = two_particle_experiment(beta=1, t=1.0, paths=5000, seed=3)
    assert rep.passed


def test_collision_policy_raises_at_floor():
    # unit steps let the noise cross about one pair in ten; no halving allowed
    x0 = np.tile([-0.5, 0.5], (200, 1))
    with pytest.raises(CollisionError, match="floor"):
        dbm_integrate_batch(x0, FlowConfig(beta=1, t=1.0, dt=1.0, max_halvings=0, seed=0))


def test_ordering_and_determinism():
    x0 = np.tile(np.linspace(-1, 1, 6), (50, 1))
    cfg = FlowConfig(beta=2, t=0.2, seed=7)
    a, ka = dbm_integrate_batch(x0, cfg)
    b, kb = dbm_integrate_batch(x0, cfg)
    assert np.array_equal(a, b) and ka == kb
    assert np.all(np.diff(a, axis=1) > 0)


def test_ks_noise_level():
    assert ks_noise_level(10_000, 10_000) == pytest.approx(1.36 * np.sqrt(2e-4))


def test_relaxation_small():
    rep = relaxation_experiment(N=100, samples=4, n_boot=0, seed=2)
    assert [r["t"] for r in rep.rows] == sorted(r["t"] for r in rep.rows)
    assert rep.checks[-1].passed  # GOE start within noise
    assert rep.summary["reference_n"] > 0


def test_relaxation_thread_independence():
    a = relaxation_experiment(N=60, samples=3, n_boot=0, seed=1, t_grid=[0.0, 0.5], threads=1)
    b = relaxation_experiment(N=60, samples=3, n_boot=0, seed=1, t_grid=[0.0, 0.5], threads=3)
    assert a.rows == b.rows
