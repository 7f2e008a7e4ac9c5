"""Stein loss of a precision estimate against the true covariance."""
from __future__ import annotations

import numpy as np

from .matcore import DimensionError, as_sym, frob_inner, logdet_spd, spd_inverse


def _pair(x, sigma0):
    x, sigma0 = as_sym(x), as_sym(sigma0)
    if x.shape != sigma0.shape:
        raise DimensionError(f"dimension mismatch: {x.shape} vs {sigma0.shape}")
    return x, sigma0


def stein_loss(x, sigma0) -> float:
    """``-log det(X S) + <X, S> - d``.

    The log-determinant of the (non-symmetric) product is split into two
    symmetric log-determinants.
    """
    x, sigma0 = _pair(x, sigma0)
    d = x.shape[0]
    value = -logdet_spd(x) - logdet_spd(sigma0) + frob_inner(x, sigma0) - d
    return max(value, 0.0) if value > -1e-12 else value


def stein_gradient(x, sigma0) -> np.ndarray:
    """Matrix gradient of the Stein loss in ``X``: ``-X^-1 + S``."""
    x, sigma0 = _pair(x, sigma0)
    return sigma0 - spd_inverse(x)


def stein_loss_spectral(weights, coupling, logdet_sigma0: float):
    """Stein loss for estimates sharing eigenvectors with the sample covariance.

    ``weights`` are the eigen-weights ``x_i``, ``coupling[i] = v_i^T S v_i``.
    Broadcasts over leading axes, which is how the experiment harness
    evaluates many trials at once.
    """
    weights = np.asarray(weights, dtype=float)
    d = weights.shape[-1]
    return (
        -np.sum(np.log(weights), axis=-1)
        - logdet_sigma0
        + np.sum(weights * coupling, axis=-1)
        - d
    )
