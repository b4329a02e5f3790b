"""Seeded random variates used by the samplers and the validation harnesses.

Every function takes an explicit :class:`numpy.random.Generator`. Streams are
built with :func:`make_stream` from a root seed and a stream id (one per chain),
so multi-chain runs are reproducible and chains never share state.

Gamma variates use the rate parameterization throughout, because the
augmented likelihoods are written with kernels ``exp(-rate * u)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, solve_triangular


class CholeskyError(np.linalg.LinAlgError):
    """Raised when a precision matrix is not positive definite.

    ``pivot`` is the 1-based index of the leading minor that failed.
    """

    def __init__(self, pivot: int, context: str = ""):
        self.pivot = pivot
        self.context = context
        msg = f"precision matrix is not positive definite (failing pivot {pivot})"
        if context:
            msg = f"{msg} [{context}]"
        super().__init__(msg)


def make_stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Independent generator for ``(seed, stream_id)``.

    Identical arguments give bit-identical streams; distinct stream ids are
    derived through :class:`numpy.random.SeedSequence` spawn keys.
    """
    if seed < 0 or stream_id < 0:
        raise ValueError("seed and stream_id must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))


def _positive(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(arr > 0) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be positive and finite")
    return arr


def sample_gamma(rng: np.random.Generator, shape, rate, size=None):
    """Gamma(shape, rate) draws with density ``rate**a x**(a-1) e**(-rate x) / Gamma(a)``."""
    shape = _positive("shape", shape)
    rate = _positive("rate", rate)
    return rng.gamma(shape, 1.0 / rate, size=size)


def sample_inverse_gaussian(rng: np.random.Generator, mu, lam, size=None):
    """Inverse Gaussian draws by the Michael-Schucany-Haas transform.

    Density: ``sqrt(lam/(2 pi)) exp(lam/mu) v**-1.5 exp(-(lam v/mu**2 + lam/v)/2)``.
    """
    mu = _positive("mu", mu)
    lam = _positive("lam", lam)
    if size is None:
        size = np.broadcast(mu, lam).shape
    out = inverse_gaussian_core(rng, mu, lam, size)
    return float(out) if out.ndim == 0 else out


def inverse_gaussian_core(rng, mu, lam, size):
    """Unchecked MSH transform; callers guarantee ``mu, lam > 0``.

    The smaller root of the quadratic is written as ``mu / (1 + a + sqrt(a(a+2)))``
    with ``a = mu chi2 / (2 lam)``, which avoids cancellation when ``a`` is large.
    """
    z = rng.standard_normal(size)
    a = mu * z * z / (2.0 * lam)
    x = mu / (1.0 + a + np.sqrt(a * (a + 2.0)))
    flip = rng.random(size) * (mu + x) > mu
    # mu * (mu / x) >= mu, whereas mu * mu underflows for tiny mu
    return np.where(flip, mu * (mu / x), x)


def verify_ig_identity(rng: np.random.Generator, kappa: float, n_draws: int = 1_000_000):
    """Monte Carlo check of ``exp(-kappa) = E[exp(-zeta kappa**2 / 2)]``.

    ``zeta = 1/z**2`` with ``z`` standard normal has the Levy(0, 1) density
    ``(2 pi)**-0.5 zeta**-1.5 exp(-1/(2 zeta))``. Returns ``(estimate, std_error)``.
    """
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if n_draws < 10_000:
        raise ValueError("n_draws must be at least 1e4")
    z = rng.standard_normal(n_draws)
    vals = np.exp(-0.5 * kappa * kappa / (z * z))
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n_draws))


@dataclass(frozen=True)
class PrecisionGaussian:
    """``N(precision^{-1} shift, precision^{-1})``."""

    precision: np.ndarray
    shift: np.ndarray


def cholesky_lower(a: np.ndarray, context: str = "") -> np.ndarray:
    """Lower Cholesky factor; raises :class:`CholeskyError` with the failing pivot."""
    a = np.asarray(a, dtype=float)
    c, info = lapack.dpotrf(a, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise CholeskyError(int(info), context)
    if info < 0:
        raise ValueError(f"invalid argument to dpotrf (info={info})")
    return c


def gaussian_from_precision(chol: np.ndarray, shift: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Map standard normal ``z`` to a draw given the precision's lower factor.

    ``mean = L^{-T} L^{-1} shift`` and the noise is ``L^{-T} z``, so the pair is
    obtained with one forward and one back substitution.
    """
    half = solve_triangular(chol, shift, lower=True, check_finite=False)
    return solve_triangular(chol, half + z, lower=True, trans="T", check_finite=False)


def sample_mvn_precision(rng: np.random.Generator, g: PrecisionGaussian, context: str = "") -> np.ndarray:
    """One draw from a Gaussian given by precision and shift, without inverting."""
    chol = cholesky_lower(g.precision, context)
    z = rng.standard_normal(chol.shape[0])
    return gaussian_from_precision(chol, np.asarray(g.shift, dtype=float), z)


def sample_poisson(rng: np.random.Generator, mean, size=None):
    mean = _positive("mean", mean)
    return rng.poisson(mean, size=size)


def sample_multinomial(rng: np.random.Generator, trials: int, probs) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if trials < 0:
        raise ValueError("trials must be non-negative")
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
        raise ValueError("probs must lie on the simplex (sum to 1 within 1e-12)")
    if trials == 0:
        return np.zeros(probs.shape[0], dtype=np.int64)
    return rng.multinomial(trials, probs)
