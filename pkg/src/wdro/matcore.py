"""Dense symmetric matrix kernel.

Matrices are plain ``numpy`` arrays. ``as_sym`` is the single entry point that
validates and symmetrizes input; every other routine assumes its argument has
been through it (or calls it itself).
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 100
SPD_RTOL = 1e-12
SYM_RTOL = 1e-8


class NotSPDError(ValueError):
    """Matrix is not (numerically) symmetric positive definite."""


class NotSymmetricError(ValueError):
    pass


class DimensionError(ValueError):
    pass


class SolverError(RuntimeError):
    """An iterative routine did not converge."""


class SpectralDecomp(NamedTuple):
    eigenvalues: np.ndarray  # (..., d), ascending
    eigenvectors: np.ndarray  # (..., d, d), columns


def as_sym(a, tol: float = SYM_RTOL) -> np.ndarray:
    """Return ``(a + a.T) / 2`` as a float array.

    Raises ``NotSymmetricError`` if ``a`` is asymmetric beyond ``tol`` relative
    to its Frobenius norm, which is far above file round-off but catches
    genuinely non-symmetric input.
    """
    a = np.array(a, dtype=float, ndmin=2)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] < 1:
        raise DimensionError("matrix dimension must be at least 1")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    scale = max(1.0, np.linalg.norm(a))
    if np.max(np.abs(a - a.T)) > tol * scale:
        raise NotSymmetricError("matrix is not symmetric")
    return (a + a.T) / 2


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")


def eig_sym_batch(a: np.ndarray) -> SpectralDecomp:
    """Cyclic Jacobi eigendecomposition of a stack of symmetric matrices.

    ``a`` has shape ``(m, d, d)``. Every matrix sees the same (p, q) rotation
    sequence; matrices that have converged get the identity rotation, so the
    result for one matrix does not depend on what else is in the batch.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 3 or a.shape[1] != a.shape[2]:
        raise DimensionError(f"expected (m, d, d), got {a.shape}")
    m, d, _ = a.shape
    a = (a + np.swapaxes(a, 1, 2)) / 2
    v = np.broadcast_to(np.eye(d), (m, d, d)).copy()
    thresh = JACOBI_TOL * np.linalg.norm(a, axis=(1, 2))
    offmask = ~np.eye(d, dtype=bool)

    for _ in range(JACOBI_MAX_SWEEPS + 1):
        off = np.sqrt(np.sum(a[:, offmask] ** 2, axis=1))
        active = off > thresh
        if not active.any():
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[:, p, q]
                rot = active & (apq != 0.0)
                if not rot.any():
                    continue
                safe = np.where(rot, apq, 1.0)
                tau = (a[:, q, q] - a[:, p, p]) / (2.0 * safe)
                t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
                c = np.where(rot, 1.0 / np.hypot(1.0, t), 1.0)
                s = np.where(rot, t * c, 0.0)
                cc, ss = c[:, None], s[:, None]

                ap, aq = a[:, p, :].copy(), a[:, q, :].copy()
                a[:, p, :] = cc * ap - ss * aq
                a[:, q, :] = ss * ap + cc * aq
                ap, aq = a[:, :, p].copy(), a[:, :, q].copy()
                a[:, :, p] = cc * ap - ss * aq
                a[:, :, q] = ss * ap + cc * aq
                a[rot, p, q] = 0.0
                a[rot, q, p] = 0.0

                vp, vq = v[:, :, p].copy(), v[:, :, q].copy()
                v[:, :, p] = cc * vp - ss * vq
                v[:, :, q] = ss * vp + cc * vq
    else:
        raise SolverError(f"Jacobi iteration did not converge in {JACOBI_MAX_SWEEPS} sweeps")

    w = np.diagonal(a, axis1=1, axis2=2)
    order = np.argsort(w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    return SpectralDecomp(w, v)


def eig_sym(a) -> SpectralDecomp:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix."""
    a = as_sym(a)
    w, v = eig_sym_batch(a[None])
    return SpectralDecomp(w[0], v[0])


def reconstruct(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``V diag(w) V^T``, symmetrized; broadcasts over leading axes."""
    out = (v * w[..., None, :]) @ np.swapaxes(v, -1, -2)
    return (out + np.swapaxes(out, -1, -2)) / 2


def spd_threshold(a: np.ndarray) -> float:
    return SPD_RTOL * max(1.0, float(np.linalg.norm(a)))


def spd_eig(a) -> SpectralDecomp:
    """Eigendecomposition that additionally enforces positive definiteness."""
    a = as_sym(a)
    w, v = eig_sym(a)
    if w[0] <= spd_threshold(a):
        raise NotSPDError(f"matrix is not positive definite (smallest eigenvalue {w[0]:.3e})")
    return SpectralDecomp(w, v)


def cholesky_spd(a) -> np.ndarray:
    a = as_sym(a)
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotSPDError("matrix is not positive definite (non-positive pivot)") from exc


def spd_inverse(a) -> np.ndarray:
    w, v = spd_eig(a)
    return reconstruct(1.0 / w, v)


def sqrt_spd(a) -> np.ndarray:
    """Symmetric PSD square root; tiny negative eigenvalues are clipped to zero."""
    a = as_sym(a)
    w, v = eig_sym(a)
    if w[0] < -SPD_RTOL * np.linalg.norm(a):
        raise NotSPDError(f"matrix is not positive semidefinite (smallest eigenvalue {w[0]:.3e})")
    return reconstruct(np.sqrt(np.clip(w, 0.0, None)), v)


def logdet_spd(a) -> float:
    w, _ = spd_eig(a)
    return float(np.sum(np.log(w)))


def frob_inner(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_same_shape(a, b)
    return float(np.sum(a * b))
