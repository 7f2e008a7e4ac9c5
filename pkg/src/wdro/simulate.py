"""Monte Carlo harness for the empirically optimal radius.

For each sample size ``n`` the harness draws ``T`` independent sample
covariances once and minimizes the trial-averaged Stein loss over the radius.
The same trials are reused for every candidate radius, so the objective is a
deterministic, smooth function of ``rho``. Trial ``t`` at sample size ``n``
always reads the stream keyed ``(seed, n, t)``: results do not depend on grid
order, thread count, or on ``T`` beyond which trials are included.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .estimator import precision_weights, solve_gamma_batch
from .loss import stein_loss_spectral
from .matcore import SolverError, as_sym, cholesky_spd, eig_sym_batch, spd_eig
from .rng import stream

SCAN_POINTS = 25
AUDIT_POINTS = 50
INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class RhoSearch:
    rho_min: float = 1e-6
    rho_max: float | None = None  # default: 10 sqrt(largest eigenvalue of sigma0)
    tolerance: float = 1e-4

    def resolved(self, sigma0: np.ndarray) -> "RhoSearch":
        if self.rho_max is not None:
            return self
        lmax = float(spd_eig(sigma0).eigenvalues[-1])
        return RhoSearch(self.rho_min, 10.0 * math.sqrt(lmax), self.tolerance)

    def validate(self) -> None:
        if not (self.rho_min > 0 and self.tolerance > 0):
            raise ValueError("rho_min and tolerance must be positive")
        if self.rho_max is not None and not self.rho_max > self.rho_min:
            raise ValueError("rho_max must exceed rho_min")


@dataclass(frozen=True)
class ExperimentConfig:
    sigma0: np.ndarray
    n_grid: tuple[int, ...]
    trials: int
    seed: int = 0
    rho_search: RhoSearch = field(default_factory=RhoSearch)

    def __post_init__(self):
        s = as_sym(self.sigma0)
        spd_eig(s)
        object.__setattr__(self, "sigma0", s)
        grid = tuple(int(n) for n in self.n_grid)
        object.__setattr__(self, "n_grid", grid)
        d = s.shape[0]
        if len(grid) == 0:
            raise ValueError("n_grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if grid[0] <= d:
            raise ValueError(f"every n must exceed the dimension d={d}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError("trials must be a positive integer")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        self.rho_search.validate()

    @property
    def dim(self) -> int:
        return self.sigma0.shape[0]

    def echo(self) -> dict:
        search = self.rho_search.resolved(self.sigma0)
        return {
            "sigma0": self.sigma0.tolist(),
            "n_grid": list(self.n_grid),
            "trials": self.trials,
            "seed": self.seed,
            "rho_search": asdict(search),
        }


@dataclass(frozen=True)
class Regression:
    slope: float
    intercept: float
    slope_ci_95: tuple[float, float]
    intercept_ci_95: tuple[float, float]
    r_squared: float
    points: int


@dataclass(frozen=True)
class ExperimentRow:
    n: int
    rho_hat: float
    objective: float


@dataclass(frozen=True)
class ExperimentResult:
    rows: tuple[ExperimentRow, ...]
    regression: Regression
    config: ExperimentConfig


def gaussian_sample(sigma0, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. rows from ``N(0, sigma0)``."""
    chol = cholesky_spd(sigma0)
    if n < 1:
        raise ValueError("n must be positive")
    return rng.standard_normal((n, chol.shape[0])) @ chol.T


def sample_cov(data) -> np.ndarray:
    """Second-moment matrix ``(1/n) sum x_i x_i^T`` (no centering)."""
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("data must be a non-empty n x d array")
    s = x.T @ x / x.shape[0]
    return (s + s.T) / 2


@dataclass(frozen=True)
class TrialSet:
    """Eigen-data of pre-drawn sample covariances, one row per trial."""

    lambdas: np.ndarray  # (T, d)
    coupling: np.ndarray  # (T, d): v_i^T S0 v_i
    logdet_sigma0: float

    def objective(self, rho: float) -> float:
        """Trial-averaged Stein loss of the robust estimate at radius ``rho``."""
        if rho == 0:
            w = 1.0 / self.lambdas
        else:
            g = solve_gamma_batch(self.lambdas, rho)[0]
            w = precision_weights(self.lambdas, g)
        return float(np.mean(stein_loss_spectral(w, self.coupling, self.logdet_sigma0)))


def draw_trials(sigma0, n: int, trials: int, seed: int) -> TrialSet:
    s = as_sym(sigma0)
    w0, _ = spd_eig(s)
    d = s.shape[0]
    if n <= d:
        raise ValueError(f"n={n} must exceed the dimension d={d}")
    covs = np.stack([sample_cov(gaussian_sample(s, n, stream(seed, n, t))) for t in range(trials)])
    lam, vecs = eig_sym_batch(covs)
    if np.any(lam[:, 0] <= 1e-12 * np.max(lam, axis=1)):
        raise SolverError("a sample covariance is numerically singular; increase n")
    coupling = np.einsum("tji,jk,tki->ti", vecs, s, vecs)
    return TrialSet(lam, coupling, float(np.sum(np.log(w0))))


def golden_section(f, lo: float, hi: float, tol: float, max_iter: int = 500):
    """Minimize a unimodal ``f`` on ``[lo, hi]`` to bracket width ``tol``."""
    a, b = lo, hi
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


def minimize_radius(trial_set: TrialSet, search: RhoSearch) -> tuple[float, float]:
    """Scan a log grid, then refine around its best point by golden section in log rho.

    Returns ``(rho_hat, objective)``; the objective at ``rho_hat`` is never worse
    than at any probed grid point.
    """
    lo, hi = math.log(search.rho_min), math.log(search.rho_max)
    grid = np.linspace(lo, hi, SCAN_POINTS)
    values = [trial_set.objective(math.exp(u)) for u in grid]
    if not np.all(np.isfinite(values)):
        raise SolverError("objective is not finite on the search grid")
    k = int(np.argmin(values))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, SCAN_POINTS - 1)]
    u, fu = golden_section(lambda t: trial_set.objective(math.exp(t)), a, b, search.tolerance)
    if values[k] < fu:
        u, fu = grid[k], values[k]
    return math.exp(u), fu


def empirical_opt_rho(sigma0, n: int, trials: int, seed: int, search: RhoSearch | None = None) -> float:
    s = as_sym(sigma0)
    if trials < 1:
        raise ValueError("trials must be positive")
    search = (search or RhoSearch()).resolved(s)
    search.validate()
    return minimize_radius(draw_trials(s, n, trials, seed), search)[0]


def ols_loglog(xs, ys) -> Regression:
    """OLS of ``log y`` on ``log x`` with t-based 95% intervals."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-d arrays of equal length")
    if len(x) < 3:
        raise ValueError("need at least 3 points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs positive values")
    lx, ly = np.log(x), np.log(y)
    k = len(lx)
    mx, my = lx.mean(), ly.mean()
    sxx = np.sum((lx - mx) ** 2)
    if sxx == 0:
        raise ValueError("xs must not all be equal")
    slope = np.sum((lx - mx) * (ly - my)) / sxx
    intercept = my - slope * mx
    resid = ly - (intercept + slope * lx)
    sse = float(np.sum(resid**2))
    sst = float(np.sum((ly - my) ** 2))
    r2 = 1.0 if sst == 0 else min(max(1.0 - sse / sst, 0.0), 1.0)
    s2 = sse / (k - 2)
    se_slope = math.sqrt(s2 / sxx)
    se_int = math.sqrt(s2 * (1.0 / k + mx**2 / sxx))
    q = float(stats.t.ppf(0.975, k - 2))
    return Regression(
        slope=float(slope),
        intercept=float(intercept),
        slope_ci_95=(float(slope - q * se_slope), float(slope + q * se_slope)),
        intercept_ci_95=(float(intercept - q * se_int), float(intercept + q * se_int)),
        r_squared=r2,
        points=k,
    )


def _one_n(config: ExperimentConfig, search: RhoSearch, n: int) -> ExperimentRow:
    ts = draw_trials(config.sigma0, n, config.trials, config.seed)
    rho, obj = minimize_radius(ts, search)
    return ExperimentRow(n, rho, obj)


def resolve_threads(threads: int | None = None) -> int:
    env = os.environ.get("WDRO_THREADS")
    if env:
        threads = int(env)
    return max(1, int(threads or 1))


def run_experiment(config: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    search = config.rho_search.resolved(config.sigma0)
    threads = resolve_threads(threads)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(lambda n: _one_n(config, search, n), config.n_grid))
    else:
        rows = [_one_n(config, search, n) for n in config.n_grid]
    reg = ols_loglog([r.n for r in rows], [r.rho_hat for r in rows])
    return ExperimentResult(tuple(rows), reg, config)


def ar_sigma0(d: int, scale: float = 10.0, decay: float = 0.5) -> np.ndarray:
    """``scale * decay^|i-j|``; with ``d = 1`` this is the scalar variance ``scale``."""
    idx = np.arange(d)
    return scale * decay ** np.abs(idx[:, None] - idx[None, :])


def log_grid(lo: int, hi: int, points: int = 9) -> tuple[int, ...]:
    return tuple(int(round(v)) for v in np.geomspace(lo, hi, points))


def published_config(dim: int, trials: int | None = None, seed: int = 0) -> ExperimentConfig:
    """Published experiment settings: 1-d over n in [10, 1000], 3-d and 5-d over [20, 400]."""
    if dim == 1:
        return ExperimentConfig(ar_sigma0(1), log_grid(10, 1000), trials or 5000, seed)
    if dim in (3, 5):
        return ExperimentConfig(ar_sigma0(dim), log_grid(20, 400), trials or 100, seed)
    raise ValueError("published settings exist for dimensions 1, 3 and 5")
