"""``wdro`` command line.

Exit codes: 0 success, 1 solver failure, 2 usage or validation error.
"""
from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

import numpy as np

from . import asymptotics as asy
from .checks import run_checks
from .estimator import estimate_precision
from .fileio import (
    dump_json,
    metadata,
    read_matrix_csv,
    write_json,
    write_matrix_csv,
    write_rows_csv,
)
from .matcore import SolverError, as_sym, spd_eig
from .simulate import ExperimentConfig, RhoSearch, published_config, resolve_threads, run_experiment, sample_cov

PRESETS = {"table1": 1, "table2": 3, "table3": 5}


class UsageError(ValueError):
    pass


def _read_sigma(path) -> np.ndarray:
    s = as_sym(read_matrix_csv(path))
    spd_eig(s)
    return s


def cmd_estimate(args) -> int:
    if args.rho is not None and not args.rho >= 0:
        raise UsageError("rho must be nonnegative")
    data = read_matrix_csv(args.data)
    n, d = data.shape
    if n <= d:
        raise UsageError(f"need more observations than columns (n={n}, d={d})")
    s_hat = sample_cov(data)
    if args.auto_rule:
        rho, rule = asy.rho_rule(s_hat, n), "plug-in rho_star(sample_cov)/n (heuristic)"
    else:
        rho, rule = float(args.rho), "explicit"
    est = estimate_precision(s_hat, rho)
    write_matrix_csv(args.out, est.x)
    sidecar = {
        "metadata": metadata("estimate", data=str(args.data), rho=args.rho, auto_rule=args.auto_rule, out=str(args.out)),
        "n": n,
        "d": d,
        "rho": rho,
        "rule": rule,
        "gamma": None if est.gamma is None else est.gamma.gamma,
        "residual": None if est.gamma is None else est.gamma.residual,
        "iterations": None if est.gamma is None else est.gamma.iterations,
    }
    write_json(str(args.out) + ".json", sidecar)
    return 0


def cmd_rho_star(args) -> int:
    if args.mc_check is not None and args.mc_check < 100:
        raise UsageError("--mc-check needs at least 100 samples")
    sigma0 = _read_sigma(args.sigma0)
    report = asy.rho_star(sigma0).as_dict()
    report["metadata"] = metadata("rho-star", sigma0=str(args.sigma0), mc_check=args.mc_check, seed=args.seed)
    if args.mc_check:
        mc = asy.rho_star_mc(sigma0, args.mc_check, args.seed, threads=resolve_threads(args.threads))
        report["mc"] = mc.as_dict()
    text = dump_json(report)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


def _parse_grid(text: str) -> list[int]:
    try:
        return [int(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise UsageError(f"bad n grid {text!r}") from exc


def _config_sigma(value: str, base: Path) -> np.ndarray:
    try:
        return as_sym(np.array(json.loads(value), dtype=float))
    except (json.JSONDecodeError, TypeError):
        return _read_sigma(base / value)


def _load_config(path) -> dict:
    """Parse a ``key = value`` file (no section header needed)."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.read_string("[experiment]\n" + path.read_text())
    raw = dict(parser["experiment"])
    known = {"preset", "sigma0", "n_grid", "trials", "seed", "rho_min", "rho_max", "tolerance"}
    unknown = set(raw) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    out: dict = {}
    for key, value in raw.items():
        value = value.strip().strip('"')
        if key == "sigma0":
            out[key] = _config_sigma(value, path.parent)
        elif key == "n_grid":
            out[key] = _parse_grid(value.strip("[]"))
        elif key in ("trials", "seed"):
            out[key] = int(value)
        elif key == "preset":
            out[key] = value
        else:
            out[key] = float(value)
    return out


def _experiment_config(args) -> ExperimentConfig:
    opts = _load_config(args.config) if args.config else {}
    for key in ("preset", "n_grid", "trials", "seed", "rho_min", "rho_max", "tolerance"):
        val = getattr(args, key)
        if val is not None:
            opts[key] = _parse_grid(val) if key == "n_grid" else val
    if args.sigma0 is not None:
        opts["sigma0"] = _read_sigma(args.sigma0)

    if "preset" in opts:
        if opts["preset"] not in PRESETS:
            raise UsageError(f"unknown preset {opts['preset']!r}; choose from {sorted(PRESETS)}")
        base = published_config(PRESETS[opts["preset"]])
        opts.setdefault("sigma0", base.sigma0)
        opts.setdefault("n_grid", list(base.n_grid))
        opts.setdefault("trials", base.trials)
    missing = [k for k in ("sigma0", "n_grid", "trials") if k not in opts]
    if missing:
        raise UsageError(f"missing experiment settings: {', '.join(missing)} (use --config, --preset or flags)")
    if opts["trials"] < 1:
        raise UsageError("trials must be a positive integer")
    search = RhoSearch(opts.get("rho_min", 1e-6), opts.get("rho_max"), opts.get("tolerance", 1e-4))
    return ExperimentConfig(opts["sigma0"], tuple(opts["n_grid"]), opts["trials"], opts.get("seed", 0), search)


def cmd_experiment(args) -> int:
    config = _experiment_config(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.svg:
        Path(args.svg).parent.mkdir(parents=True, exist_ok=True)
    result = run_experiment(config, threads=args.threads)
    meta = metadata("experiment", **config.echo())
    reg = result.regression
    limit = asy.rho_star(config.sigma0)
    report = {
        "metadata": meta,
        "regression": {
            "slope": reg.slope,
            "intercept": reg.intercept,
            "slope_ci_95": list(reg.slope_ci_95),
            "intercept_ci_95": list(reg.intercept_ci_95),
            "r_squared": reg.r_squared,
            "points": reg.points,
        },
        "theory": {"rho_star": limit.rho_star, "log_rho_star": float(np.log(limit.rho_star)), "slope": -1.0},
        "rows": [{"n": r.n, "rho_hat": r.rho_hat, "objective": r.objective} for r in result.rows],
    }
    write_rows_csv(out_dir / "rho_hat.csv", result.rows, meta)
    write_json(out_dir / "regression.json", report)
    if args.svg:
        from .plotting import radius_figure

        radius_figure(args.svg, result, limit.rho_star)
    print(
        f"slope {reg.slope:.4f} [{reg.slope_ci_95[0]:.4f}, {reg.slope_ci_95[1]:.4f}]  "
        f"intercept {reg.intercept:.4f}  R^2 {reg.r_squared:.4f}  (theory: -1, {np.log(limit.rho_star):.4f})"
    )
    return 0


def cmd_check(args) -> int:
    if not 1 <= args.dim <= 10:
        raise UsageError("--dim must be between 1 and 10")
    if args.seed < 0:
        raise UsageError("--seed must be nonnegative")
    results = run_checks(args.dim, args.seed)
    print("# " + json.dumps(metadata("check", dim=args.dim, seed=args.seed), sort_keys=True))
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<28} slack={r.slack:.3e}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wdro", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", help="robust precision matrix from a data file")
    e.add_argument("--data", required=True, help="CSV, rows = observations, no header")
    g = e.add_mutually_exclusive_group(required=True)
    g.add_argument("--rho", type=float, help="Wasserstein radius")
    g.add_argument("--auto-rule", action="store_true", help="use rho_star(sample_cov)/n")
    e.add_argument("--out", required=True, help="output CSV; metadata goes to OUT.json")
    e.set_defaults(func=cmd_estimate)

    r = sub.add_parser("rho-star", help="limit constant of the optimal radius")
    r.add_argument("--sigma0", required=True, help="covariance matrix CSV")
    r.add_argument("--mc-check", type=int, help="also estimate by Monte Carlo with N samples")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", help="also write the JSON report here")
    r.add_argument("--threads", type=int)
    r.set_defaults(func=cmd_rho_star)

    x = sub.add_parser("experiment", help="empirical optimal radius over a grid of n")
    x.add_argument("--config", help="key = value file")
    x.add_argument("--preset", choices=sorted(PRESETS))
    x.add_argument("--sigma0", help="covariance matrix CSV")
    x.add_argument("--n-grid", dest="n_grid", help="comma-separated sample sizes")
    x.add_argument("--trials", type=int)
    x.add_argument("--seed", type=int)
    x.add_argument("--rho-min", dest="rho_min", type=float)
    x.add_argument("--rho-max", dest="rho_max", type=float)
    x.add_argument("--tolerance", type=float)
    x.add_argument("--out-dir", default=".", help="where rho_hat.csv and regression.json go")
    x.add_argument("--svg", help="write a log-log figure here")
    x.add_argument("--threads", type=int, help="worker threads (WDRO_THREADS overrides)")
    x.set_defaults(func=cmd_experiment)

    c = sub.add_parser("check", help="run the invariant suites")
    c.add_argument("--dim", type=int, required=True)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SolverError as exc:
        print(f"wdro: solver failure: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError, OSError) as exc:
        print(f"wdro: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
