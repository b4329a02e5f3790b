"""Bayesian Poisson and multinomial regression with the approximate identity link.

The link ``lam(xi) = (xi + sqrt(xi**2 + 4)) / 2`` admits gamma and inverse
Gaussian data augmentation, so every full conditional is a standard
distribution and the coefficient block is updated jointly from a Gaussian.
"""

from .chains import DrawMatrix, SamplerConfig
from .link import LinkValue, b_coeff, lam, lam_inv
from .multinomial import MultinomialData
from .poisson import PoissonData
from .prior import GaussianPrior
from .rand import make_stream

__all__ = [
    "DrawMatrix", "GaussianPrior", "LinkValue", "MultinomialData", "PoissonData",
    "SamplerConfig", "b_coeff", "lam", "lam_inv", "make_stream",
]
__version__ = "0.1.0"
