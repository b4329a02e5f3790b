"""Bundled small datasets and synthetic data generators."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np
from scipy import stats

from .link import lam
from .multinomial import MultinomialData, category_probs
from .poisson import PoissonData

# Number of birds at ages 1..6 in the sparrow study the look-alike imitates.
SPARROW_AGE_COUNTS = (10, 9, 9, 16, 7, 1)
# Exp-link coefficients (const, age, age^2) the look-alike counts are drawn from.
SPARROW_LOOKALIKE_GAMMA = (0.27, 0.68, -0.13)


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("identlink") / "data" / name))


def sparrow_design(ages) -> np.ndarray:
    ages = np.asarray(ages, dtype=float)
    return np.column_stack([np.ones_like(ages), ages, ages**2])


def synthetic_sparrow(seed: int = 2009) -> PoissonData:
    """52 birds with the study's age profile and exp-link Poisson counts.

    Within each age group the counts are stratified inverse-CDF draws
    (uniforms ``(j + U_j) / n_age``), so every group mean stays close to the
    generating curve instead of carrying the full i.i.d. sampling noise.
    """
    rng = np.random.default_rng(seed)
    gamma = np.array(SPARROW_LOOKALIKE_GAMMA)
    X_parts, y_parts = [], []
    for age, n_age in enumerate(SPARROW_AGE_COUNTS, start=1):
        mean = float(np.exp(sparrow_design([age])[0] @ gamma))
        u = (np.arange(n_age) + rng.random(n_age)) / n_age
        y_parts.append(rng.permutation(stats.poisson.ppf(u, mean).astype(np.int64)))
        X_parts.append(sparrow_design(np.full(n_age, age)))
    return PoissonData(np.vstack(X_parts), np.concatenate(y_parts))


def drift_test_data() -> PoissonData:
    """Full-rank 6 x 3 design with every count >= 1, for the drift probe."""
    X = np.array([
        [1.0, -1.0, 0.5],
        [1.0, -0.5, -1.0],
        [1.0, 0.0, 0.2],
        [1.0, 0.5, 1.0],
        [1.0, 1.0, -0.3],
        [1.0, 1.5, 0.8],
    ])
    return PoissonData(X, np.array([2, 1, 3, 4, 2, 5]))


def simulate_poisson(design, beta, rng: np.random.Generator, exposures=None, link: str = "lambda") -> PoissonData:
    X = np.atleast_2d(np.asarray(design, dtype=float))
    expo = np.ones(X.shape[0]) if exposures is None else np.asarray(exposures, dtype=float)
    eta = X @ np.asarray(beta, dtype=float)
    mean = expo * (np.asarray(lam(eta)) if link == "lambda" else np.exp(eta))
    return PoissonData(X, rng.poisson(mean), expo)


def simulate_multinomial(covariates, trials, beta, rng: np.random.Generator) -> MultinomialData:
    covs = [np.atleast_2d(np.asarray(c, dtype=float)) for c in covariates]
    skeleton = MultinomialData([np.concatenate([[m], np.zeros(c.shape[0], dtype=int)])
                                for m, c in zip(trials, covs)], covs)
    counts = []
    for i, m in enumerate(trials):
        pr = category_probs(beta, i, skeleton)
        counts.append(rng.multinomial(int(m), pr / pr.sum()))
    return skeleton.with_counts(counts)
