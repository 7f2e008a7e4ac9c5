"""Batch diagnostics behind ``wdro check``.

Each check draws its own random inputs from a stream keyed by the run seed and
the check's position, and reports a signed slack: the distance from the
measured quantity to its failure threshold (nonnegative means pass).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import asymptotics as asy
from .estimator import a_hat, estimate_precision, m_hat, solve_gamma, taylor_diagnostics
from .loss import stein_gradient, stein_loss
from .matcore import eig_sym, logdet_spd, reconstruct
from .rng import stream
from .simulate import gaussian_sample, sample_cov

RHO_GRID = np.geomspace(1e-4, 5.0, 40)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    slack: float


def random_spd(d: int, rng: np.random.Generator, floor: float = 0.2) -> np.ndarray:
    """Random SPD matrix with eigenvalues in ``[floor, floor + ~3]``."""
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    w = floor + rng.gamma(2.0, 0.7, size=d)
    return reconstruct(w, q)


def random_sym(d: int, rng: np.random.Generator) -> np.ndarray:
    b = rng.standard_normal((d, d))
    return (b + b.T) / 2


def g_function(a, b):
    """``-a - b + b^3/a^2 + a^3/b^2``; nonnegative on the positive quadrant, zero on the diagonal."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return -a - b + b**3 / a**2 + a**3 / b**2


def _reconstruction(d, rng):
    worst = np.inf
    for _ in range(10):
        a = random_spd(d, rng)
        w, v = eig_sym(a)
        err = np.linalg.norm(reconstruct(w, v) - a)
        orth = np.linalg.norm(v.T @ v - np.eye(d))
        worst = min(worst, 1e-10 * np.linalg.norm(a) - err, 1e-10 * d - orth)
    return worst


def _trace_inequality(d, rng):
    worst = np.inf
    for _ in range(50):
        a, b = rng.standard_normal((2, d, d))
        lhs = np.sum(a * a) * np.sum(b * b)
        rhs = np.sum(a * b) ** 2
        worst = min(worst, (lhs - rhs) / lhs + 1e-12)
    return worst


def _matrix_inequality(d, rng):
    worst = np.inf
    for _ in range(50):
        s = random_spd(d, rng)
        z = asy.sample_z_gaussian(s, 1, rng)[0]
        c = np.linalg.inv(s)
        c2 = c @ c
        lhs = np.trace(c) * np.trace(c @ z @ c2 @ z)
        rhs = np.trace(z @ c2) ** 2
        worst = min(worst, (lhs - rhs) / max(lhs, 1.0) + 1e-10)
    return worst


def _g_function(d, rng):
    a, b = rng.uniform(0.05, 20.0, (2, 1000))
    vals = g_function(a, b)
    diag = np.abs(g_function(a, a))
    return min(float(vals.min()), 1e-9 - float(diag.max()))


def _gamma_residual(d, rng):
    worst = np.inf
    for _ in range(100):
        lam = rng.uniform(0.1, 10.0, d)
        rho = 10 ** rng.uniform(-4, np.log10(2))
        sol = solve_gamma(lam, rho)
        root_s = np.sqrt(np.sum(1 / lam))
        worst = min(
            worst,
            1e-10 * max(1.0, d + lam.sum() * sol.gamma) - abs(sol.residual),
            root_s + 1e-12 - rho * sol.gamma,
        )
        if rho <= 1:
            inv_g = 1 / sol.gamma
            lower = rho / root_s
            upper = lower + m_hat(lam) * rho**2 / root_s
            worst = min(worst, (inv_g - lower) / inv_g + 1e-12, (upper - inv_g) / inv_g + 1e-12)
    return worst


def _monotonicity(d, rng):
    worst = np.inf
    for _ in range(5):
        s_hat = random_spd(d, rng)
        s0 = random_spd(d, rng)
        xs = [estimate_precision(s_hat, r).x for r in np.concatenate([[0.0], RHO_GRID])]
        ld = np.array([logdet_spd(x) for x in xs])
        tr = np.array([np.sum(x * s0) for x in xs])
        worst = min(worst, -np.max(np.diff(ld)) + 1e-10, -np.max(np.diff(tr)) / tr[0] + 1e-10)
    return worst


def _df_linearity(d, rng):
    s = random_spd(d, rng)
    a, b = random_sym(d, rng), random_sym(d, rng)
    al, be = rng.standard_normal(2)
    lhs = asy.df_apply(s, al * a + be * b)
    rhs = al * asy.df_apply(s, a) + be * asy.df_apply(s, b)
    return 1e-10 * max(1.0, np.linalg.norm(lhs)) - np.linalg.norm(lhs - rhs)


def _df_finite_difference(d, rng):
    def f(m):
        return a_hat(m)

    worst = np.inf
    for _ in range(5):
        s = random_spd(d, rng)
        a = random_sym(d, rng)
        h = 1e-5
        fd = (f(s + h * a) - f(s - h * a)) / (2 * h)
        an = asy.df_apply(s, a)
        worst = min(worst, 1e-5 - np.linalg.norm(fd - an) / np.linalg.norm(an))
    return worst


def _stein_gradient(d, rng):
    worst = np.inf
    for _ in range(5):
        x, s0 = random_spd(d, rng), random_spd(d, rng)
        grad = stein_gradient(x, s0)
        for _ in range(3):
            e = random_sym(d, rng)
            h = 1e-5
            fd = (stein_loss(x + h * e, s0) - stein_loss(x - h * e, s0)) / (2 * h)
            an = np.sum(grad * e)
            worst = min(worst, 1e-5 - abs(fd - an) / max(abs(an), 1e-8))
    return worst


def _lemma_sandwich(d, rng):
    worst = np.inf
    s0 = random_spd(d, rng)
    for _ in range(10):
        s_hat = sample_cov(gaussian_sample(s0, 5 * d, rng))
        for rho in (1e-3, 1e-2, 1e-1):
            diag = taylor_diagnostics(s_hat, rho)
            if not all(diag.sandwich_ok):
                return -1.0
            worst = min(worst, min(min(p) for p in diag.slack))
    return worst


def _inner_positivity(d, rng):
    worst = np.inf
    for _ in range(10):
        s0 = random_spd(d, rng)
        z = asy.sample_z_gaussian(s0, 200, rng)
        vals = np.einsum("nij,nij->n", z, asy.df_apply(s0, z))
        worst = min(worst, float(vals.min()) + 1e-10)
        worst = min(worst, asy.expected_inner_z_za(s0))
    return worst


def _finite_sample_surrogate(d, rng):
    worst = np.inf
    for _ in range(10):
        s0 = random_spd(d, rng)
        a0 = asy.a_zero(s0)
        for _ in range(20):
            s_hat = sample_cov(gaussian_sample(s0, 3 * d + 2, rng))
            worst = min(worst, float(np.sum((s_hat - s0) * (a_hat(s_hat) - a0))) + 1e-10)
    return worst


def _z_cov_empirical(d, rng):
    d = min(d, 2)
    n, reps = 2000, 2000
    zs = np.empty((reps, d, d))
    for r in range(reps):
        x = rng.standard_normal((n, d))
        zs[r] = np.sqrt(n) * (x.T @ x / n - np.eye(d))
    iu, ju = np.triu_indices(d)
    flat = zs[:, iu, ju]
    flat = flat - flat.mean(axis=0)
    prods = flat[:, :, None] * flat[:, None, :]
    emp = prods.mean(axis=0)
    se = prods.std(axis=0) / np.sqrt(reps)
    theory = np.array([[asy.z_cov(np.eye(d), i, j, k, l) for k, l in zip(iu, ju)] for i, j in zip(iu, ju)])
    # 5 standard errors per entry, reported in units of the largest covariance
    return float(np.min(5 * se - np.abs(emp - theory))) / float(np.max(np.abs(theory)))


def _rho_star_oracle(d, rng, seed):
    s0 = random_spd(d, rng)
    rep = asy.rho_star(s0)
    num, se = asy.expected_inner_mc(s0, 200_000, seed)
    u = np.trace(np.linalg.inv(s0) @ np.linalg.inv(s0))
    t = np.trace(np.linalg.inv(s0))
    return min(
        3 * se - abs(num - rep.numerator),
        1e-10 * rep.denominator - abs(rep.denominator - 4 * u / t),
        rep.rho_star,
    )


def _w2_metric(d, rng):
    worst = np.inf
    for _ in range(5):
        a, b, c = (random_spd(d, rng) for _ in range(3))
        ab, ba = asy.w2_gaussian(a, b), asy.w2_gaussian(b, a)
        ac, cb = asy.w2_gaussian(a, c), asy.w2_gaussian(c, b)
        worst = min(worst, 1e-9 - abs(ab - ba), ac + cb - ab + 1e-9, 1e-6 - asy.w2_gaussian(a, a))
    return worst


CHECKS = (
    ("jacobi_reconstruction", _reconstruction),
    ("trace_inequality", _trace_inequality),
    ("matrix_inequality", _matrix_inequality),
    ("g_function_nonnegative", _g_function),
    ("gamma_residual_and_bounds", _gamma_residual),
    ("monotonicity_in_rho", _monotonicity),
    ("df_linearity", _df_linearity),
    ("df_finite_difference", _df_finite_difference),
    ("stein_gradient_fd", _stein_gradient),
    ("remainder_sandwich", _lemma_sandwich),
    ("inner_z_za_positivity", _inner_positivity),
    ("finite_sample_surrogate", _finite_sample_surrogate),
    ("z_cov_empirical", _z_cov_empirical),
    ("rho_star_mc_agreement", None),
    ("w2_metric", _w2_metric),
)


def run_checks(dim: int, seed: int) -> list[CheckResult]:
    if not 1 <= dim <= 10:
        raise ValueError("dim must be between 1 and 10")
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    out = []
    for k, (name, fn) in enumerate(CHECKS):
        rng = stream(seed, dim, k)
        slack = _rho_star_oracle(dim, rng, seed) if fn is None else fn(dim, rng)
        slack = float(slack)
        out.append(CheckResult(name, bool(slack >= 0), slack))
    return out
