"""Wasserstein distributionally robust precision matrix estimation and its optimal radius."""

__version__ = "0.1.0"

from .asymptotics import RhoStarReport, rho_rule, rho_star, rho_star_mc, w2_gaussian  # noqa: E402
from .estimator import PrecisionEstimate, estimate_precision, solve_gamma  # noqa: E402
from .loss import stein_gradient, stein_loss  # noqa: E402
from .simulate import ExperimentConfig, RhoSearch, run_experiment  # noqa: E402

__all__ = [
    "ExperimentConfig",
    "PrecisionEstimate",
    "RhoSearch",
    "RhoStarReport",
    "estimate_precision",
    "rho_rule",
    "rho_star",
    "rho_star_mc",
    "run_experiment",
    "solve_gamma",
    "stein_gradient",
    "stein_loss",
    "w2_gaussian",
]
