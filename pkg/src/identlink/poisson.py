"""Poisson regression under the approximate identity link, with its Gibbs sampler.

Model: ``y_i ~ Poisson(n_i * lam(x_i' beta))`` and ``beta ~ N(mu, Psi^{-1})``.
Each sweep redraws, given the current ``beta``,

* ``u_i ~ Gamma(y_i, b_i)`` (rate ``b_i``), with ``u_i = 0`` when ``y_i = 0``;
* ``v_i ~ InvGauss(1 / ((n_i/2 + u_i) s_i), 1)`` and ``w_i = v_i (n_i/2 + u_i)**2``;

then ``beta`` from the Gaussian with precision ``Psi + X'WX`` and linear term
``Psi mu + X'(u - n/2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .chains import DrawMatrix, SamplerConfig, run_chains_generic
from .link import LinkValue, lam
from .prior import GaussianPrior
from .rand import cholesky_lower, gaussian_from_precision, inverse_gaussian_core

# Floor for the inverse Gaussian mean when (n/2 + u) * s overflows at extreme beta.
IG_MEAN_FLOOR = 1e-300


@dataclass
class PoissonData:
    design: np.ndarray
    counts: np.ndarray
    exposures: np.ndarray | None = None

    def __post_init__(self):
        self.design = np.atleast_2d(np.asarray(self.design, dtype=float))
        n, p = self.design.shape
        if n < 1 or p < 1:
            raise ValueError("need at least one observation and one covariate")
        counts = np.asarray(self.counts)
        if counts.shape != (n,):
            raise ValueError(f"counts must have length {n}")
        if np.any(counts < 0) or np.any(counts != np.round(counts)):
            raise ValueError("counts must be non-negative integers")
        self.counts = counts.astype(np.int64)
        if self.exposures is None:
            self.exposures = np.ones(n)
        self.exposures = np.asarray(self.exposures, dtype=float)
        if self.exposures.shape != (n,):
            raise ValueError(f"exposures must have length {n}")
        if not np.all(self.exposures > 0):
            raise ValueError("exposures must be positive")
        if not np.all(np.isfinite(self.design)):
            raise ValueError("design has non-finite entries")

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]


@dataclass
class PoissonChainState:
    beta: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray


def draw_latents(beta, data: PoissonData, rng: np.random.Generator, u_rate_factor: float = 1.0):
    """Draw ``(u, v, w)`` from their conditional given ``beta``.

    ``u_rate_factor`` scales the gamma rate; it exists only so the validation
    harness can build a deliberately wrong kernel, and must be 1 otherwise.
    """
    lv = LinkValue.at(data.design @ beta)
    y = data.counts
    pos = y > 0
    u = np.zeros(data.n)
    if pos.any():
        u[pos] = rng.gamma(y[pos], 1.0 / (u_rate_factor * lv.b[pos]))
    half_n_u = 0.5 * data.exposures + u
    with np.errstate(over="ignore"):
        mu = np.maximum(1.0 / (half_n_u * lv.s), IG_MEAN_FLOOR)
    v = inverse_gaussian_core(rng, mu, 1.0, mu.shape)
    return u, v, v * half_n_u**2


def beta_conditional(u, w, data: PoissonData, prior: GaussianPrior):
    """Precision and linear term of ``beta | u, v, y``."""
    X = data.design
    precision = prior.precision + X.T @ (w[:, None] * X)
    shift = prior.shift + X.T @ (u - 0.5 * data.exposures)
    return precision, shift


def draw_beta(u, w, data: PoissonData, prior: GaussianPrior, rng, context: str = ""):
    precision, shift = beta_conditional(u, w, data, prior)
    chol = cholesky_lower(precision, context)
    return gaussian_from_precision(chol, shift, rng.standard_normal(data.p))


def gibbs_sweep(state: PoissonChainState, data: PoissonData, prior: GaussianPrior,
                rng: np.random.Generator) -> PoissonChainState:
    """One full scan: latents given ``beta``, then ``beta`` given latents."""
    u, v, w = draw_latents(state.beta, data, rng)
    beta = draw_beta(u, w, data, prior, rng)
    return PoissonChainState(beta, u, v, w)


def initial_state(data: PoissonData, prior: GaussianPrior, rng, init="prior-draw") -> PoissonChainState:
    """Starting state: ``beta`` from ``init`` and latents drawn once given it."""
    if isinstance(init, str):
        beta = prior.sample(rng) if init == "prior-draw" else np.zeros(data.p)
    else:
        beta = np.asarray(init, dtype=float).copy()
        if beta.shape != (data.p,):
            raise ValueError(f"init_beta must have length {data.p}")
    u, v, w = draw_latents(beta, data, rng)
    return PoissonChainState(beta, u, v, w)


def log_likelihood(beta, data: PoissonData) -> float:
    beta = np.asarray(beta, dtype=float)
    mean = data.exposures * lam(data.design @ beta)
    y = data.counts
    return float(np.sum(y * np.log(mean) - mean - gammaln(y + 1.0)))


def run_chains(data: PoissonData, prior: GaussianPrior, config: SamplerConfig,
               names=None, n_jobs: int = 1) -> DrawMatrix:
    if prior.p != data.p:
        raise ValueError(f"prior has dimension {prior.p}, design has {data.p} columns")
    return run_chains_generic(
        init=lambda rng: initial_state(data, prior, rng, config.init_beta),
        step=lambda s, rng: gibbs_sweep(s, data, prior, rng),
        get_beta=lambda s: s.beta,
        get_latents=lambda s: {"u": s.u.copy(), "v": s.v.copy(), "w": s.w.copy()},
        config=config,
        names=names,
        meta={"model": "poisson-lambda", "acceptance_rate": [1.0] * config.n_chains},
        n_jobs=n_jobs,
    )


def posterior_predictive_mean(draws: DrawMatrix | np.ndarray, x_new, exposure: float = 1.0,
                              link: str = "lambda"):
    """Per-draw conditional means ``exposure * link(x_new' beta)`` and their average."""
    beta = draws.beta if isinstance(draws, DrawMatrix) else np.atleast_2d(draws)
    x_new = np.asarray(x_new, dtype=float)
    if x_new.shape != (beta.shape[1],):
        raise ValueError(f"x_new must have length {beta.shape[1]}")
    if not exposure > 0:
        raise ValueError("exposure must be positive")
    eta = beta @ x_new
    if link == "lambda":
        vals = exposure * np.asarray(lam(eta))
    elif link == "exp":
        vals = exposure * np.exp(eta)
    else:
        raise ValueError(f"unknown link {link!r}")
    vals = np.atleast_1d(vals)
    return vals, float(vals.mean())


def collapse_duplicates(data: PoissonData) -> PoissonData:
    """Merge rows with identical covariates, summing their counts and exposures.

    Gamma and inverse Gaussian latents are reproductive, so the posterior of
    ``beta`` is unchanged. Row order follows first appearance.
    """
    rows, first, inverse = np.unique(data.design, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(first)
    remap = np.empty_like(order)
    remap[order] = np.arange(len(order))
    group = remap[inverse]
    k = len(order)
    counts = np.bincount(group, weights=data.counts, minlength=k).round().astype(np.int64)
    exposures = np.bincount(group, weights=data.exposures, minlength=k)
    return PoissonData(rows[order], counts, exposures)
