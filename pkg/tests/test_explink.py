import numpy as np
import pytest
from scipy import stats

from identlink.datasets import synthetic_sparrow
from identlink.diagnostics import effective_sample_size
from identlink.explink import (
    ETA_MAX, MhConfig, explink_grad, explink_log_posterior, explink_neg_hessian, posterior_mode,
    run_mh_chain,
)
from identlink.poisson import PoissonData
from identlink.prior import GaussianPrior


def test_log_posterior_single_observation():
    data = PoissonData([[1.0]], [1])
    assert explink_log_posterior([0.0], data, GaussianPrior.isotropic(1)) == pytest.approx(-1.0, abs=1e-14)


def test_log_posterior_additive(small_poisson):
    flat = GaussianPrior.isotropic(2, precision=1e-300)
    g = np.array([0.2, -0.4])
    a = PoissonData(small_poisson.design[:1], small_poisson.counts[:1])
    b = PoissonData(small_poisson.design[1:], small_poisson.counts[1:])
    total = explink_log_posterior(g, small_poisson, flat)
    assert total == pytest.approx(explink_log_posterior(g, a, flat) + explink_log_posterior(g, b, flat))
    ll = stats.poisson.logpmf(small_poisson.counts, np.exp(small_poisson.design @ g)).sum()
    assert total == pytest.approx(ll)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_against_finite_differences(small_poisson, seed):
    rng = np.random.default_rng(seed)
    prior = GaussianPrior(rng.standard_normal(2), np.array([[2.0, 0.3], [0.3, 1.0]]))
    g = 0.5 * rng.standard_normal(2)
    h = 1e-6
    fd = np.array([(explink_log_posterior(g + h * e, small_poisson, prior)
                    - explink_log_posterior(g - h * e, small_poisson, prior)) / (2 * h) for e in np.eye(2)])
    np.testing.assert_allclose(explink_grad(g, small_poisson, prior), fd, rtol=1e-6, atol=1e-8)
    # Hessian from differences of the analytic gradient
    fd_h = np.array([(explink_grad(g + h * e, small_poisson, prior)
                      - explink_grad(g - h * e, small_poisson, prior)) / (2 * h) for e in np.eye(2)])
    np.testing.assert_allclose(explink_neg_hessian(g, small_poisson, prior), -fd_h, rtol=1e-5)


def test_overflow_clamp_flag():
    data = PoissonData([[1.0]], [1])
    lp, flag = explink_log_posterior([ETA_MAX + 5], data, GaussianPrior.isotropic(1), with_flag=True)
    assert flag and np.isfinite(lp)
    assert not explink_log_posterior([1.0], data, GaussianPrior.isotropic(1), with_flag=True)[1]


def test_mode_zeroes_gradient(small_poisson, unit_prior):
    mode = posterior_mode(small_poisson, unit_prior)
    np.testing.assert_allclose(explink_grad(mode, small_poisson, unit_prior), 0.0, atol=1e-8)


@pytest.mark.parametrize("kwargs", [dict(target_accept=0.0), dict(target_accept=1.0), dict(keep=0),
                                    dict(initial_step=0.0), dict(init_gamma="mean")])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        MhConfig(**kwargs)


@pytest.fixture(scope="module")
def sparrow_run():
    data = synthetic_sparrow()
    prior = GaussianPrior.isotropic(3, precision=0.01)
    cfg = MhConfig(burn_in=3000, keep=5000, seed=3, n_chains=2, initial_step=0.1)
    return run_mh_chain(data, prior, cfg)


def test_step_frozen_after_burn_in(sparrow_run):
    for trace in sparrow_run.meta["step_trace"]:
        post = trace[3000:]
        assert np.all(post == post[0])
        assert trace[0] == pytest.approx(0.1)


def test_acceptance_near_target(sparrow_run):
    for rate in sparrow_run.meta["acceptance_rate"]:
        assert abs(rate - 0.30) <= 0.1


def test_bookkeeping(sparrow_run):
    assert sparrow_run.n_draws == 10_000
    np.testing.assert_array_equal(np.bincount(sparrow_run.chain), [5000, 5000])
    assert sparrow_run.meta["model"] == "poisson-exp"


def test_deterministic():
    data = PoissonData([[1.0, 0.0], [1.0, 1.0]], [1, 2])
    prior = GaussianPrior.isotropic(2)
    cfg = MhConfig(burn_in=50, keep=50, seed=4)
    np.testing.assert_array_equal(run_mh_chain(data, prior, cfg).beta, run_mh_chain(data, prior, cfg).beta)


def test_prior_recovery_on_nearly_flat_likelihood():
    # one zero count at exposure 1e-10 contributes a likelihood factor within 1e-9 of 1
    data = PoissonData([[1.0, 0.5]], [0], exposures=[1e-10])
    prior = GaussianPrior([0.5, -1.0], np.array([[1.0, 0.4], [0.4, 2.0]]))
    d = run_mh_chain(data, prior, MhConfig(burn_in=1000, keep=40_000, seed=5))
    cov = np.linalg.inv(prior.precision)
    for k in range(2):
        x = d.beta[:, k]
        ess = effective_sample_size(x)
        assert abs(x.mean() - prior.mean[k]) <= 3 * np.sqrt(cov[k, k] / ess)
        # variance SE for a Gaussian: sqrt(2) var / sqrt(ess)
        assert abs(x.var() - cov[k, k]) <= 3 * np.sqrt(2) * cov[k, k] / np.sqrt(ess)
