"""Multinomial response regression under the approximate identity link.

Observation ``i`` has ``m_i`` trials over categories ``0..p_i``. Category 0 is
the baseline with probability ``1/(1 + Lam_i)``; category ``k >= 1`` has
probability ``lam_ik / (1 + Lam_i)`` with ``lam_ik = lam(x_ik' beta)`` and
``Lam_i = sum_k lam_ik``.

The Gibbs sweep draws ``u_i0 ~ Gamma(m_i, 2 + 2 Lam_i)``, ``u_ik ~ Gamma(y_ik, b_ik)``
(zero when ``y_ik = 0``), ``v_ik ~ InvGauss(1/((u_ik + u_i0) s_ik), 1)`` and then
``beta`` from a Gaussian in precision form.

Internally the ragged ``(i, k)`` pairs are stored flat, one row per non-baseline
category, with ``obs`` mapping each row back to its observation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .chains import DrawMatrix, SamplerConfig, run_chains_generic
from .link import LinkValue, b_coeff
from .prior import GaussianPrior
from .rand import cholesky_lower, gaussian_from_precision, inverse_gaussian_core


@dataclass
class MultinomialData:
    """Ragged multinomial observations.

    ``counts[i]`` has length ``p_i + 1`` (baseline first) and ``covariates[i]``
    has shape ``(p_i, p)``, one row per non-baseline category.
    """

    counts: list[np.ndarray]
    covariates: list[np.ndarray]
    # flat views, filled in __post_init__
    X: np.ndarray = field(init=False, repr=False)
    y: np.ndarray = field(init=False, repr=False)
    obs: np.ndarray = field(init=False, repr=False)
    trials: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.counts) != len(self.covariates):
            raise ValueError("counts and covariates must have one entry per observation")
        if len(self.counts) == 0:
            raise ValueError("need at least one observation")
        counts, covs = [], []
        p = None
        for i, (c, x) in enumerate(zip(self.counts, self.covariates)):
            c = np.asarray(c)
            x = np.atleast_2d(np.asarray(x, dtype=float))
            if c.ndim != 1 or c.shape[0] < 2:
                raise ValueError(f"observation {i}: need a baseline and at least one category")
            if np.any(c < 0) or np.any(c != np.round(c)):
                raise ValueError(f"observation {i}: counts must be non-negative integers")
            if c.sum() < 1:
                raise ValueError(f"observation {i}: need at least one trial")
            if x.shape[0] != c.shape[0] - 1:
                raise ValueError(f"observation {i}: expected {c.shape[0] - 1} covariate rows, got {x.shape[0]}")
            if p is None:
                p = x.shape[1]
            elif x.shape[1] != p:
                raise ValueError(f"observation {i}: covariate dimension {x.shape[1]} != {p}")
            if not np.all(np.isfinite(x)):
                raise ValueError(f"observation {i}: non-finite covariates")
            counts.append(c.astype(np.int64))
            covs.append(x)
        self.counts, self.covariates = counts, covs
        self.X = np.vstack(covs)
        self.y = np.concatenate([c[1:] for c in counts])
        self.obs = np.repeat(np.arange(len(counts)), [c.shape[0] - 1 for c in counts])
        self.trials = np.array([c.sum() for c in counts], dtype=np.int64)

    @property
    def n(self) -> int:
        return len(self.counts)

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def n_categories(self) -> np.ndarray:
        """``p_i`` for every observation (baseline excluded)."""
        return np.array([c.shape[0] - 1 for c in self.counts])

    def with_counts(self, counts: Sequence[np.ndarray]) -> "MultinomialData":
        return MultinomialData(list(counts), self.covariates)


@dataclass
class MultinomialChainState:
    beta: np.ndarray
    u0: np.ndarray
    u: np.ndarray  # flat, aligned with MultinomialData.y
    v: np.ndarray  # flat


def _category_sums(data: MultinomialData, lam_flat):
    return np.bincount(data.obs, weights=lam_flat, minlength=data.n)


def category_probs(beta, obs_index: int, data: MultinomialData) -> np.ndarray:
    """Probabilities of categories ``0..p_i`` for observation ``obs_index``."""
    if not 0 <= obs_index < data.n:
        raise IndexError(f"observation index {obs_index} out of range")
    lv = LinkValue.at(data.covariates[obs_index] @ np.asarray(beta, dtype=float))
    denom = 1.0 + lv.lam.sum()
    return np.concatenate([[1.0], lv.lam]) / denom


def multinomial_log_likelihood(beta, data: MultinomialData) -> float:
    lv = LinkValue.at(data.X @ np.asarray(beta, dtype=float))
    big_lam = _category_sums(data, lv.lam)
    total = np.sum(gammaln(data.trials + 1.0))
    total -= sum(np.sum(gammaln(c + 1.0)) for c in data.counts)
    total -= np.sum(data.trials * np.log1p(big_lam))
    total += np.sum(data.y * np.log(lv.lam))
    return float(total)


def draw_latents(beta, data: MultinomialData, rng: np.random.Generator):
    """``(u0, u, v)`` given ``beta``; ``u`` and ``v`` are flat over ``(i, k)``."""
    lv = LinkValue.at(data.X @ beta)
    big_lam = _category_sums(data, lv.lam)
    u0 = rng.gamma(data.trials, 1.0 / (2.0 + 2.0 * big_lam))
    u = np.zeros(data.y.shape[0])
    pos = data.y > 0
    if pos.any():
        u[pos] = rng.gamma(data.y[pos], 1.0 / lv.b[pos])
    tot = u + u0[data.obs]
    with np.errstate(over="ignore"):
        mu = np.maximum(1.0 / (tot * lv.s), 1e-300)
    v = inverse_gaussian_core(rng, mu, 1.0, mu.shape)
    return u0, u, v


def beta_conditional(u0, u, v, data: MultinomialData, prior: GaussianPrior):
    tot = u + u0[data.obs]
    w = v * tot * tot
    precision = prior.precision + data.X.T @ (w[:, None] * data.X)
    shift = prior.shift + data.X.T @ (u - u0[data.obs])
    return precision, shift


def gibbs_sweep_multinomial(state: MultinomialChainState, data: MultinomialData,
                            prior: GaussianPrior, rng: np.random.Generator) -> MultinomialChainState:
    u0, u, v = draw_latents(state.beta, data, rng)
    precision, shift = beta_conditional(u0, u, v, data, prior)
    chol = cholesky_lower(precision)
    beta = gaussian_from_precision(chol, shift, rng.standard_normal(data.p))
    return MultinomialChainState(beta, u0, u, v)


def initial_state(data: MultinomialData, prior: GaussianPrior, rng, init="prior-draw"):
    if isinstance(init, str):
        beta = prior.sample(rng) if init == "prior-draw" else np.zeros(data.p)
    else:
        beta = np.asarray(init, dtype=float).copy()
    u0, u, v = draw_latents(beta, data, rng)
    return MultinomialChainState(beta, u0, u, v)


def run_chains(data: MultinomialData, prior: GaussianPrior, config: SamplerConfig,
               names=None, n_jobs: int = 1) -> DrawMatrix:
    if prior.p != data.p:
        raise ValueError(f"prior has dimension {prior.p}, covariates have {data.p}")
    return run_chains_generic(
        init=lambda rng: initial_state(data, prior, rng, config.init_beta),
        step=lambda s, rng: gibbs_sweep_multinomial(s, data, prior, rng),
        get_beta=lambda s: s.beta,
        get_latents=lambda s: {"u0": s.u0.copy(), "u": s.u.copy(), "v": s.v.copy()},
        config=config,
        names=names,
        meta={"model": "multinomial-lambda", "acceptance_rate": [1.0] * config.n_chains},
        n_jobs=n_jobs,
    )


def build_polychotomous_design(shared_covariates, n_categories: int) -> list[np.ndarray]:
    """Block covariates so one stacked ``beta`` holds every category's coefficients.

    Returns, per observation, an ``(n_categories, q * n_categories)`` array whose
    row ``k`` is zero apart from block ``k``, which equals ``x_i``.
    """
    x = np.atleast_2d(np.asarray(shared_covariates, dtype=float))
    n, q = x.shape
    if q < 1 or n_categories < 1:
        raise ValueError("need q >= 1 and n_categories >= 1")
    eye = np.eye(n_categories)
    return [np.kron(eye, row[None, :]) for row in x]


def bernoulli_success_prob(xi):
    """``lam/(1 + lam)``, evaluated as ``2 / (2 + b)``."""
    b = b_coeff(xi)
    return 2.0 / (2.0 + b)
