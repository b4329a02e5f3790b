import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from identlink.chains import SamplerConfig
from identlink.link import lam
from identlink.multinomial import (
    MultinomialData, beta_conditional, bernoulli_success_prob, build_polychotomous_design,
    category_probs, draw_latents, gibbs_sweep_multinomial, initial_state,
    multinomial_log_likelihood, run_chains,
)
from identlink.prior import GaussianPrior
from identlink.rand import make_stream


def one_obs(counts, cov):
    return MultinomialData([np.asarray(counts)], [np.atleast_2d(cov)])


@pytest.mark.parametrize("counts, expected", [
    ([1, 0], [0.5, 0.5]),
    ([1, 0, 0, 0], [0.25] * 4),
])
def test_category_probs_at_origin(counts, expected):
    data = one_obs(counts, np.ones((len(counts) - 1, 2)))
    np.testing.assert_allclose(category_probs(np.zeros(2), 0, data), expected, rtol=1e-15)


def test_category_probs_lambda_two():
    data = one_obs([1, 0], [[1.0]])
    np.testing.assert_allclose(category_probs([1.5], 0, data), [1 / 3, 2 / 3], rtol=1e-15)


@settings(max_examples=200)
@given(st.integers(0, 2**31), st.floats(0, 1e3))
def test_category_probs_simplex(seed, norm):
    rng = np.random.default_rng(seed)
    cov = rng.standard_normal((4, 3))
    beta = rng.standard_normal(3)
    beta *= norm / np.linalg.norm(beta)
    pr = category_probs(beta, 0, one_obs([1, 0, 0, 0, 0], cov))
    assert np.all(pr >= 0)
    assert pr.sum() == pytest.approx(1.0, abs=1e-12)


def test_category_probs_bad_index():
    with pytest.raises(IndexError):
        category_probs([0.0], 1, one_obs([1, 0], [[1.0]]))


@pytest.mark.parametrize("counts, expected", [([0, 1], np.log(0.5)), ([1, 1], np.log(0.5))])
def test_loglik_examples(counts, expected):
    assert multinomial_log_likelihood([0.0], one_obs(counts, [[1.0]])) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_loglik_matches_pmf_oracle(seed):
    rng = np.random.default_rng(seed)
    n, p = 4, 3
    k = rng.integers(1, 4, size=n)
    covs = [rng.standard_normal((ki, p)) for ki in k]
    counts = [rng.multinomial(rng.integers(1, 6), np.ones(ki + 1) / (ki + 1)) for ki in k]
    data = MultinomialData(counts, covs)
    beta = rng.standard_normal(p)
    oracle = sum(stats.multinomial.logpmf(c, c.sum(), category_probs(beta, i, data))
                 for i, c in enumerate(data.counts))
    assert multinomial_log_likelihood(beta, data) == pytest.approx(oracle, rel=1e-12)


@pytest.mark.parametrize("counts, covs", [
    ([[1, 1]], [np.ones((2, 1))]),
    ([[0, 0]], [np.ones((1, 1))]),
    ([[1, -1, 1]], [np.ones((2, 1))]),
    ([[1]], [np.ones((0, 1))]),
    ([[1, 0], [1, 0]], [np.ones((1, 1)), np.ones((1, 2))]),
    ([], []),
])
def test_data_validation(counts, covs):
    with pytest.raises(ValueError):
        MultinomialData(counts, covs)


def test_polychotomous_block_placement():
    a = 0.7
    blocks = build_polychotomous_design([[1.0, a]], 3)
    np.testing.assert_array_equal(blocks[0][1], [0, 0, 1, a, 0, 0])


def test_polychotomous_single_category_is_identity():
    x = np.array([[1.0, 2.0, 3.0]])
    np.testing.assert_array_equal(build_polychotomous_design(x, 1)[0], x)


def test_polychotomous_matches_blockwise():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((5, 2))
    betas = rng.standard_normal((4, 2))
    stacked = betas.ravel()
    for xi, block in zip(x, build_polychotomous_design(x, 4)):
        np.testing.assert_allclose(block @ stacked, betas @ xi, rtol=1e-14)


@pytest.mark.parametrize("xi, expected", [(0.0, 0.5), (1.5, 2 / 3), (-1.5, 1 / 3)])
def test_bernoulli_examples(xi, expected):
    assert bernoulli_success_prob(xi) == pytest.approx(expected, rel=1e-15)


def test_bernoulli_forms_agree():
    xi = np.logspace(-8, 8, 1001)
    xi = np.concatenate([-xi, [0.0], xi])
    lam_form = lam(xi) / (1 + lam(xi))
    np.testing.assert_allclose(bernoulli_success_prob(xi), lam_form, rtol=1e-12)


def test_u0_rate_at_origin():
    # at beta = 0, Lambda_i = p_i so the u0 rate is 2 + 2 p_i
    data = MultinomialData([np.array([1, 1, 0, 1])], [np.ones((3, 2))])
    rng = make_stream(4)
    u0 = np.array([draw_latents(np.zeros(2), data, rng)[0][0] for _ in range(100_000)])
    m = 3
    mean, sd = m / 8, np.sqrt(m) / 8
    assert abs(u0.mean() - mean) <= 3 * sd / np.sqrt(u0.size)


def test_u0_mean_at_fixed_beta():
    rng = make_stream(5)
    covs = [rng.standard_normal((2, 2)) for _ in range(3)]
    data = MultinomialData([np.array([1, 0, 1]), np.array([0, 2, 0]), np.array([3, 1, 1])], covs)
    beta = np.array([0.4, -0.9])
    big_lam = np.array([lam(c @ beta).sum() for c in covs])
    rate = 2 + 2 * big_lam
    u0 = np.array([draw_latents(beta, data, rng)[0] for _ in range(100_000)])
    se = np.sqrt(data.trials) / rate / np.sqrt(u0.shape[0])
    assert np.all(np.abs(u0.mean(axis=0) - data.trials / rate) <= 3 * se)


def test_zero_count_latents():
    data = MultinomialData([np.array([1, 0, 2])], [np.ones((2, 1))])
    u0, u, v = draw_latents(np.array([0.3]), data, make_stream(6))
    assert u[0] == 0 and u[1] > 0
    assert u0[0] > 0 and np.all(v > 0)


def test_scalar_conditional_oracle():
    x, u0, u, v = 1.3, 0.8, 1.1, 0.6
    data = one_obs([1, 2], [[x]])
    prior = GaussianPrior.isotropic(1)
    precision, shift = beta_conditional(np.array([u0]), np.array([u]), np.array([v]), data, prior)
    assert precision[0, 0] == pytest.approx(1 + x * v * (u + u0) ** 2 * x)
    assert shift[0] == pytest.approx(x * (u - u0))


def test_sweep_and_run_chains():
    rng = make_stream(7)
    data = MultinomialData([np.array([1, 1, 0]), np.array([0, 1, 1])],
                           [rng.standard_normal((2, 2)) for _ in range(2)])
    prior = GaussianPrior.isotropic(2)
    state = initial_state(data, prior, rng)
    state = gibbs_sweep_multinomial(state, data, prior, rng)
    assert state.beta.shape == (2,) and state.u.shape == (4,)
    cfg = SamplerConfig(burn_in=5, keep=20, n_chains=2, seed=1)
    a = run_chains(data, prior, cfg)
    np.testing.assert_array_equal(a.beta, run_chains(data, prior, cfg).beta)
    assert a.n_draws == 40 and a.meta["model"] == "multinomial-lambda"
