"""Report figures (matplotlib, file output only)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "svg.hashsalt": "wdro",
    "svg.fonttype": "none",
}


def radius_figure(path, result, rho_star: float | None = None) -> None:
    """Log-log scatter of the empirical radius against n, with the OLS fit.

    ``rho_star``, when given, adds the limiting line ``rho_star / n``. The file
    format follows the suffix of ``path``; SVG output carries no timestamp so
    reruns are byte-identical.
    """
    n = np.array([r.n for r in result.rows], dtype=float)
    rho = np.array([r.rho_hat for r in result.rows])
    reg = result.regression
    grid = np.geomspace(n.min(), n.max(), 100)

    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.4))
        ax.loglog(n, rho, "o", ms=4, color="k", label="empirical optimum")
        ax.loglog(
            grid,
            np.exp(reg.intercept) * grid**reg.slope,
            "-",
            color="C0",
            label=f"fit: slope {reg.slope:.3f}, intercept {reg.intercept:.3f}",
        )
        if rho_star is not None:
            ax.loglog(grid, rho_star / grid, "--", color="C3", label=r"$\rho_*/n$")
        ax.set_xlabel("n")
        ax.set_ylabel(r"$\hat\rho_n$")
        ax.set_title(f"$R^2$ = {reg.r_squared:.3f}", fontsize=9)
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg") else None)
        plt.close(fig)
