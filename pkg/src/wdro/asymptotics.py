"""Large-sample limit objects and the optimal radius constant.

``Z`` is the Gaussian limit of ``sqrt(n) (S_n - S0)``; ``Z_A`` is its image
under the derivative of ``S -> -2 tr(S^-1)^(-1/2) S^-2``. The optimal radius
satisfies ``n rho_n -> rho_star`` with

    rho_star = E<Z, Z_A> / <S0 A0 S0, A0>.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .estimator import a_hat
from .matcore import (
    DimensionError,
    as_sym,
    cholesky_spd,
    frob_inner,
    spd_eig,
    spd_inverse,
    sqrt_spd,
)
from .rng import stream

MC_BLOCK = 50_000


@dataclass(frozen=True)
class RhoStarReport:
    rho_star: float
    numerator: float
    denominator: float
    method: str  # "closed-form" or "monte-carlo"
    mc_std_error: float | None = None

    def as_dict(self) -> dict:
        return {
            "rho_star": self.rho_star,
            "numerator": self.numerator,
            "denominator": self.denominator,
            "method": self.method,
            "mc_std_error": self.mc_std_error,
        }


def z_cov(sigma0, i1: int, j1: int, i2: int, j2: int) -> float:
    """Covariance of two entries of the limit matrix ``Z`` (Isserlis)."""
    s = as_sym(sigma0)
    d = s.shape[0]
    for idx in (i1, j1, i2, j2):
        if not 0 <= idx < d:
            raise IndexError(f"index {idx} out of range for dimension {d}")
    return float(s[i1, i2] * s[j1, j2] + s[i1, j2] * s[j1, i2])


def z_cov_tensor(sigma0) -> np.ndarray:
    """All of ``cov(Z[i,j], Z[k,l])`` as a ``(d, d, d, d)`` array."""
    s = as_sym(sigma0)
    return np.einsum("ik,jl->ijkl", s, s) + np.einsum("il,jk->ijkl", s, s)


def a_zero(sigma0) -> np.ndarray:
    return a_hat(sigma0)


def df_apply(sigma, a) -> np.ndarray:
    """Directional derivative of ``S -> -2 tr(S^-1)^(-1/2) S^-2`` along ``a``.

    ``a`` may carry leading batch axes.
    """
    sigma = as_sym(sigma)
    a = np.asarray(a, dtype=float)
    if a.shape[-2:] != sigma.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {sigma.shape}")
    inv = spd_inverse(sigma)
    inv2 = inv @ inv
    t = np.trace(inv)
    lin = np.einsum("ij,...jk,ki->...", inv, a, inv)
    return (
        -lin[..., None, None] * inv2 / t**1.5
        + 2.0 * (inv @ a @ inv2 + inv2 @ a @ inv) / np.sqrt(t)
    )


def z_a_realization(sigma0, z) -> np.ndarray:
    return df_apply(sigma0, z)


def expected_inner_z_za(sigma0) -> float:
    """``E<Z, Z_A>`` from second moments of ``Z`` only.

    ``<Z, Z_A> = 4 tr(B Z C Z) / sqrt(t) - tr(Z B)^2 / t^1.5`` with
    ``B = S0^-2``, ``C = S0^-1``, ``t = tr(S0^-1)``; both expectations are
    contractions of the covariance tensor of ``Z``.
    """
    k = z_cov_tensor(sigma0)
    c = spd_inverse(sigma0)
    b = c @ c
    t = np.trace(c)
    e_quad = np.einsum("ij,kl,jkli->", b, c, k)
    e_lin2 = np.einsum("ji,lk,ijkl->", b, b, k)
    return float(4.0 * e_quad / np.sqrt(t) - e_lin2 / t**1.5)


def _vech_cov(sigma0):
    d = sigma0.shape[0]
    iu, ju = np.triu_indices(d)
    k = z_cov_tensor(sigma0)
    return iu, ju, k[iu[:, None], ju[:, None], iu[None, :], ju[None, :]]


def sample_z_gaussian(sigma0, size: int, rng: np.random.Generator) -> np.ndarray:
    """Exact draws of the Gaussian limit matrix ``Z``; shape ``(size, d, d)``."""
    s = as_sym(sigma0)
    d = s.shape[0]
    iu, ju, cov = _vech_cov(s)
    chol = cholesky_spd(cov)
    vech = rng.standard_normal((size, len(iu))) @ chol.T
    z = np.zeros((size, d, d))
    z[:, iu, ju] = vech
    z[:, ju, iu] = vech
    return z


def sample_z_outer(sigma0, size: int, rng: np.random.Generator) -> np.ndarray:
    """``xi xi^T - S0`` with ``xi ~ N(0, S0)``.

    Not Gaussian, but it has the same first and second moments as ``Z``, which
    is all a quadratic functional like ``<Z, Z_A>`` sees.
    """
    s = as_sym(sigma0)
    xi = rng.standard_normal((size, s.shape[0])) @ cholesky_spd(s).T
    return xi[:, :, None] * xi[:, None, :] - s


_SAMPLERS = {"outer": sample_z_outer, "gaussian": sample_z_gaussian}


def _mc_block(sigma0, size, seed, block, sampler):
    z = _SAMPLERS[sampler](sigma0, size, stream(seed, block))
    vals = np.einsum("nij,nij->n", z, df_apply(sigma0, z))
    return vals.sum(), (vals**2).sum()


def expected_inner_mc(
    sigma0, samples: int, seed: int, sampler: str = "outer", threads: int = 1
) -> tuple[float, float]:
    """Monte Carlo estimate and standard error of ``E<Z, Z_A>``.

    Samples are drawn in fixed-size blocks, each with its own keyed stream, and
    the block sums are combined in block order, so the estimate is the same
    for any thread count.
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    if sampler not in _SAMPLERS:
        raise ValueError(f"unknown sampler {sampler!r}")
    s = as_sym(sigma0)
    spd_eig(s)
    sizes = [MC_BLOCK] * (samples // MC_BLOCK)
    if samples % MC_BLOCK:
        sizes.append(samples % MC_BLOCK)
    jobs = [(s, size, seed, b, sampler) for b, size in enumerate(sizes)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda j: _mc_block(*j), jobs))
    else:
        parts = [_mc_block(*j) for j in jobs]
    total = sum(p[0] for p in parts)
    total_sq = sum(p[1] for p in parts)
    mean = total / samples
    var = max(total_sq / samples - mean**2, 0.0) * samples / (samples - 1)
    return float(mean), float(np.sqrt(var / samples))


def limit_curvature(sigma0) -> float:
    """``<S0 A0 S0, A0>``, the denominator of ``rho_star``."""
    s = as_sym(sigma0)
    a0 = a_zero(s)
    return frob_inner(s @ a0 @ s, a0)


def rho_star(sigma0) -> RhoStarReport:
    num = expected_inner_z_za(sigma0)
    den = limit_curvature(sigma0)
    return RhoStarReport(num / den, num, den, "closed-form")


def rho_star_mc(sigma0, samples: int, seed: int, sampler: str = "outer", threads: int = 1) -> RhoStarReport:
    num, se = expected_inner_mc(sigma0, samples, seed, sampler, threads)
    den = limit_curvature(sigma0)
    return RhoStarReport(num / den, num, den, "monte-carlo", se / den)


def rho_rule(sigma, n: int) -> float:
    """Radius ``rho_star(sigma) / n``.

    With ``sigma`` set to a sample covariance this is a plug-in heuristic; the
    limit result only covers the true covariance.
    """
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    return rho_star(sigma).rho_star / n


def w2_gaussian(sigma_a, sigma_b) -> float:
    """2-Wasserstein distance between ``N(0, A)`` and ``N(0, B)``."""
    a, b = as_sym(sigma_a), as_sym(sigma_b)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    spd_eig(a)
    spd_eig(b)
    ra = sqrt_spd(a)
    cross = sqrt_spd(ra @ b @ ra)
    sq = np.trace(a) + np.trace(b) - 2.0 * np.trace(cross)
    return float(np.sqrt(max(sq, 0.0)))
