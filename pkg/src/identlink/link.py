"""The approximate identity link and its companion coefficients.

``lam(xi) = (xi + sqrt(xi**2 + 4)) / 2`` is the inverse of ``u -> u - 1/u`` on
``(0, inf)``. Both samplers need, per linear predictor, the triple

* ``lam`` -- the mean function,
* ``b = -xi + sqrt(xi**2 + 4) = 2 / lam`` -- the gamma rate of the ``u`` latent,
* ``s = sqrt(xi**2 + 4)`` -- the scale entering the inverse Gaussian latent.

Each is evaluated in the form free of subtractive cancellation on its half-line.
Everything here accepts scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _check_finite(xi):
    xi = np.asarray(xi, dtype=float)
    if not np.all(np.isfinite(xi)):
        raise ValueError("linear predictor must be finite")
    return xi


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def link_scale(xi):
    """``sqrt(xi**2 + 4)``, computed with ``hypot`` so it never overflows early."""
    xi = _check_finite(xi)
    return _scalar_or_array(np.hypot(xi, 2.0))


def lam(xi):
    """Evaluate the link at ``xi``.

    Uses ``(xi + s)/2`` for ``xi >= 0`` and ``2/(s - xi)`` for ``xi < 0``; the
    two agree exactly at the branch point ``xi = 0``.
    """
    xi = _check_finite(xi)
    s = np.hypot(xi, 2.0)
    out = np.where(xi >= 0, 0.5 * (np.maximum(xi, 0.0) + s), 2.0 / (s - np.minimum(xi, 0.0)))
    return _scalar_or_array(out)


def lam_inv(u):
    """Inverse link ``u - 1/u``; requires ``u > 0``."""
    u = np.asarray(u, dtype=float)
    if not np.all(u > 0):
        raise ValueError("inverse link is defined for u > 0 only")
    return _scalar_or_array(u - 1.0 / u)


def b_coeff(xi):
    """Gamma rate ``-xi + sqrt(xi**2 + 4)``, evaluated as ``2/lam(xi)``."""
    xi = _check_finite(xi)
    s = np.hypot(xi, 2.0)
    out = np.where(xi >= 0, 4.0 / (np.maximum(xi, 0.0) + s), s - np.minimum(xi, 0.0))
    return _scalar_or_array(out)


def exp_link(xi):
    """The usual exponential link, kept alongside for the baseline model."""
    return _scalar_or_array(np.exp(_check_finite(xi)))


@dataclass(frozen=True)
class LinkValue:
    """Mutually consistent ``(xi, lam, b, s)`` for a vector of predictors."""

    xi: np.ndarray
    lam: np.ndarray
    b: np.ndarray
    s: np.ndarray

    @classmethod
    def at(cls, xi) -> "LinkValue":
        xi = _check_finite(xi)
        s = np.hypot(xi, 2.0)
        pos = xi >= 0
        neg_part = s - np.minimum(xi, 0.0)
        pos_part = np.maximum(xi, 0.0) + s
        lam_ = np.where(pos, 0.5 * pos_part, 2.0 / neg_part)
        b = np.where(pos, 4.0 / pos_part, neg_part)
        return cls(xi=xi, lam=lam_, b=b, s=s)
