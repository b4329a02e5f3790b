from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rand import cholesky_lower, gaussian_from_precision


@dataclass
class GaussianPrior:
    """Normal prior ``N(mean, precision^{-1})`` on the coefficient vector."""

    mean: np.ndarray
    precision: np.ndarray
    _chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.precision = np.atleast_2d(np.asarray(self.precision, dtype=float))
        p = self.mean.shape[0]
        if self.precision.shape != (p, p):
            raise ValueError(f"precision must be {p}x{p}, got {self.precision.shape}")
        if not np.allclose(self.precision, self.precision.T, rtol=1e-12, atol=0):
            raise ValueError("prior precision must be symmetric")
        self._chol = cholesky_lower(self.precision, "prior precision")

    @classmethod
    def isotropic(cls, p: int, precision: float = 1.0, mean: float = 0.0) -> "GaussianPrior":
        return cls(np.full(p, float(mean)), precision * np.eye(p))

    @property
    def p(self) -> int:
        return self.mean.shape[0]

    @property
    def shift(self) -> np.ndarray:
        """``precision @ mean``, the prior's contribution to the linear term."""
        return self.precision @ self.mean

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.p)
        return gaussian_from_precision(self._chol, self.shift, z)

    def energy(self, beta) -> float:
        """``beta' precision beta``, the drift function used in the ergodicity probe."""
        beta = np.asarray(beta, dtype=float)
        return float(beta @ self.precision @ beta)
