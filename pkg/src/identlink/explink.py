"""Exponential-link Poisson regression sampled by adaptive random-walk Metropolis.

This is the comparison model: ``y_i ~ Poisson(n_i exp(x_i' gamma))`` with the
same Gaussian prior as the identity-link model. Proposals are
``gamma + step * L z`` where ``L L' `` is the inverse negative Hessian of the log
posterior at its mode, so one scalar step size suits every coordinate. The
log step is tuned by Robbins-Monro during burn-in only and then frozen at the
average of its second-half iterates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .chains import DrawMatrix, SamplerError
from .poisson import PoissonData
from .prior import GaussianPrior
from .rand import CholeskyError, cholesky_lower, make_stream

# exp() of a linear predictor above this is treated as overflow.
ETA_MAX = 700.0


@dataclass
class MhConfig:
    burn_in: int = 1000
    keep: int = 1000
    thin: int = 1
    n_chains: int = 1
    seed: int = 0
    initial_step: float = 1.0
    target_accept: float = 0.30
    adapt_window: int = 50
    init_gamma: str = "mode"

    def __post_init__(self):
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.keep < 1 or self.thin < 1 or self.n_chains < 1 or self.burn_in < 0:
            raise ValueError("need keep, thin, n_chains >= 1 and burn_in >= 0")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if self.init_gamma not in ("mode", "prior-draw", "zero"):
            raise ValueError("init_gamma must be 'mode', 'prior-draw' or 'zero'")


def explink_log_posterior(gamma, data: PoissonData, prior: GaussianPrior, *, with_flag: bool = False):
    """Log posterior up to a constant.

    The linear predictor is clamped at ``ETA_MAX`` before exponentiation; with
    ``with_flag=True`` the return value is ``(logp, clamped)``.
    """
    gamma = np.asarray(gamma, dtype=float)
    eta = data.design @ gamma
    clamped = bool(np.any(eta > ETA_MAX))
    eta_c = np.minimum(eta, ETA_MAX)
    y = data.counts
    ll = np.sum(y * eta_c + y * np.log(data.exposures) - data.exposures * np.exp(eta_c) - gammaln(y + 1.0))
    d = gamma - prior.mean
    lp = float(ll - 0.5 * d @ prior.precision @ d)
    return (lp, clamped) if with_flag else lp


def explink_grad(gamma, data: PoissonData, prior: GaussianPrior) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    mean = data.exposures * np.exp(np.minimum(data.design @ gamma, ETA_MAX))
    return data.design.T @ (data.counts - mean) - prior.precision @ (gamma - prior.mean)


def explink_neg_hessian(gamma, data: PoissonData, prior: GaussianPrior) -> np.ndarray:
    X = data.design
    mean = data.exposures * np.exp(np.minimum(X @ gamma, ETA_MAX))
    return X.T @ (mean[:, None] * X) + prior.precision


def posterior_mode(data: PoissonData, prior: GaussianPrior, max_iter: int = 100, tol: float = 1e-10):
    """Newton iterations with step halving; the log posterior is concave."""
    g = prior.mean.copy()
    lp = explink_log_posterior(g, data, prior)
    for _ in range(max_iter):
        step = np.linalg.solve(explink_neg_hessian(g, data, prior), explink_grad(g, data, prior))
        t = 1.0
        while True:
            cand = g + t * step
            lp_c = explink_log_posterior(cand, data, prior)
            if lp_c >= lp or t < 1e-10:
                break
            t *= 0.5
        done = np.max(np.abs(cand - g)) < tol * (1 + np.max(np.abs(g)))
        g, lp = cand, lp_c
        if done:
            break
    return g


def _one_chain(data, prior, config: MhConfig, chain: int, mode, prop_chol):
    rng = make_stream(config.seed, chain)
    if config.init_gamma == "mode":
        g = mode.copy()
    elif config.init_gamma == "prior-draw":
        g = prior.sample(rng)
    else:
        g = np.zeros(data.p)
    lp = explink_log_posterior(g, data, prior)
    log_step = np.log(config.initial_step)
    n_sweeps = config.burn_in + config.keep * config.thin
    kept, sweeps, steps = [], [], np.empty(n_sweeps)
    n_acc_kept = 0
    avg_sum, avg_n = 0.0, 0
    for t in range(1, n_sweeps + 1):
        step = np.exp(log_step)
        cand = g + step * (prop_chol @ rng.standard_normal(data.p))
        lp_c = explink_log_posterior(cand, data, prior)
        acc_prob = np.exp(min(0.0, lp_c - lp)) if np.isfinite(lp_c) else 0.0
        accepted = rng.random() < acc_prob
        if accepted:
            g, lp = cand, lp_c
        steps[t - 1] = step
        if t <= config.burn_in:
            # Robbins-Monro on the log step; gain decays like t^-0.6 after the window
            gain = min(1.0, (max(t, config.adapt_window) / config.adapt_window) ** -0.6)
            log_step += gain * (acc_prob - config.target_accept)
            if t > config.burn_in // 2:
                avg_sum += log_step
                avg_n += 1
            if t == config.burn_in and avg_n:
                # freeze at the average iterate of the second half, which is far
                # less noisy than the last one
                log_step = avg_sum / avg_n
        else:
            n_acc_kept += accepted
            if (t - config.burn_in) % config.thin == 0:
                kept.append(g.copy())
                sweeps.append(t)
    n_post = n_sweeps - config.burn_in
    return np.array(kept), np.array(sweeps), n_acc_kept / n_post, steps


def run_mh_chain(data: PoissonData, prior: GaussianPrior, config: MhConfig, names=None) -> DrawMatrix:
    """Run ``config.n_chains`` adaptive RWM chains on the exp-link posterior.

    ``meta`` records the realized post-burn-in acceptance rate and the full
    step-size trace of each chain.
    """
    if prior.p != data.p:
        raise ValueError(f"prior has dimension {prior.p}, design has {data.p} columns")
    mode = posterior_mode(data, prior)
    try:
        cov = np.linalg.inv(explink_neg_hessian(mode, data, prior))
        prop_chol = cholesky_lower(0.5 * (cov + cov.T), "proposal covariance")
    except (CholeskyError, np.linalg.LinAlgError) as exc:
        raise SamplerError(-1, 0, exc) from exc
    prop_chol = prop_chol * (2.38 / np.sqrt(data.p))
    results = [_one_chain(data, prior, config, c, mode, prop_chol) for c in range(config.n_chains)]
    beta = np.vstack([r[0] for r in results])
    sweep = np.concatenate([r[1] for r in results])
    chain = np.repeat(np.arange(config.n_chains), [len(r[1]) for r in results])
    meta = {
        "model": "poisson-exp",
        "acceptance_rate": [float(r[2]) for r in results],
        "step_trace": [r[3] for r in results],
        "mode": mode,
    }
    return DrawMatrix(beta=beta, chain=chain, sweep=sweep, seed=config.seed, names=names, meta=meta)


def mh_kernel(data: PoissonData, prior: GaussianPrior, step: float, n_steps: int = 1, prop_chol=None):
    """Fixed-step RWM transition ``gamma -> gamma'`` (used by the validation harness)."""
    if prop_chol is None:
        prop_chol = np.eye(data.p)

    def kernel(g, rng):
        lp = explink_log_posterior(g, data, prior)
        for _ in range(n_steps):
            cand = g + step * (prop_chol @ rng.standard_normal(data.p))
            lp_c = explink_log_posterior(cand, data, prior)
            if np.log(rng.random()) < lp_c - lp:
                g, lp = cand, lp_c
        return g

    return kernel
