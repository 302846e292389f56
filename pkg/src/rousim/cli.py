"""Command-line front door.

Subcommands: analytic, simulate, stationary, clt, fclt, doubly.
Exit codes: 0 success, 1 an experiment check failed, 2 usage/config errors.
Machine-readable output is line-oriented ``key=value``; diagnostics go to
stderr.  The seed resolves as: --seed flag, then the ROU_SEED environment
variable, then the config file, then the built-in default.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from typing import Optional, Sequence

from . import analytic, harness
from .errors import RouError
from .model import BoundarySpec, OUParams, write_path_csv
from .simulate import SimConfig, simulate_path

_EXPERIMENTS = ("stationary", "clt", "fclt", "doubly")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=None, help="drift offset")
    p.add_argument("--gamma", type=float, default=None, help="mean-reversion rate (> 0)")
    p.add_argument("--sigma", type=float, default=None, help="volatility (> 0)")
    p.add_argument("--lower", type=float, default=None, help="lower reflecting barrier")
    p.add_argument("--upper", type=float, default=None, help="upper reflecting barrier")


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--x0", type=float, default=None, help="initial state")
    p.add_argument("--dt", type=float, default=None, help="Euler step")
    p.add_argument("--horizon", type=float, default=None, help="time horizon T")
    p.add_argument("--seed", type=int, default=None, help="RNG master seed")


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="rousim",
        description="Reflected Ornstein-Uhlenbeck: closed forms and Monte Carlo checks")
    sub = top.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analytic", help="print q, tau2, stationary mean, "
                                         "boundary density for one-sided reflection")
    _add_model_flags(pa)
    pa.add_argument("--tail-sds", type=float, default=12.0,
                    help="quadrature window for tau2, in stationary sds")

    ps = sub.add_parser("simulate", help="simulate one path, write t,y,l,u CSV")
    _add_model_flags(ps)
    _add_sim_flags(ps)
    ps.add_argument("--output", default=None, help="CSV file (default stdout)")

    for kind in _EXPERIMENTS:
        pe = sub.add_parser(kind, help=f"run the {kind} experiment")
        _add_model_flags(pe)
        _add_sim_flags(pe)
        pe.add_argument("--config", default=None, help="YAML experiment config")
        pe.add_argument("--paths", type=int, default=None, help="number of paths")
        pe.add_argument("--workers", type=int, default=None,
                        help="parallel path workers")
        pe.add_argument("--output", default=None,
                        help="report stem (writes <stem>.json and <stem>.csv)")
        if kind == "fclt":
            pe.add_argument("--fclt-n", type=float, default=None,
                            help="FCLT scaling parameter n")
            pe.add_argument("--fclt-grid", type=float, nargs="+", default=None,
                            help="macroscopic evaluation times")
    return top


def _resolve_seed(flag_value: Optional[int]) -> Optional[int]:
    if flag_value is not None:
        return flag_value
    env = os.environ.get("ROU_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as e:
            raise harness.ConfigError(f"ROU_SEED must be an integer: {e}") from e
    return None


def _params_from(ns, defaults=(0.0, 1.0, 1.0)) -> OUParams:
    return OUParams(
        ns.alpha if ns.alpha is not None else defaults[0],
        ns.gamma if ns.gamma is not None else defaults[1],
        ns.sigma if ns.sigma is not None else defaults[2],
    )


def _cmd_analytic(ns) -> int:
    params = _params_from(ns)
    boundary = BoundarySpec(ns.lower, ns.upper)
    if boundary.is_doubly:
        print("analytic expects a one-sided barrier; the doubly reflected "
              "loss rate is available via the 'doubly' experiment",
              file=sys.stderr)
        return 2
    rv = analytic.rate_and_variance(params, boundary, tail_sds=ns.tail_sds)
    mean = analytic.stationary_mean(params, boundary)
    print(f"q={rv.q:.12g}")
    print(f"tau2={rv.tau2:.12g}")
    print(f"stationary_mean={mean:.12g}")
    print(f"boundary_density={rv.boundary_density:.12g}")
    return 0


def _cmd_simulate(ns) -> int:
    params = _params_from(ns)
    boundary = BoundarySpec(ns.lower, ns.upper)
    seed = _resolve_seed(ns.seed)
    lo = boundary.lower if boundary.lower is not None else -math.inf
    default_x0 = min(max(params.mean_reversion_level, lo),
                     boundary.upper if boundary.upper is not None else math.inf)
    cfg = SimConfig(
        params=params, boundary=boundary,
        x0=ns.x0 if ns.x0 is not None else default_x0,
        dt=ns.dt if ns.dt is not None else 1e-3,
        horizon=ns.horizon if ns.horizon is not None else 10.0,
        seed=seed if seed is not None else 42,
    )
    path = simulate_path(cfg)
    if ns.output:
        with open(ns.output, "w") as f:
            write_path_csv(path, f)
        print(f"path_csv={ns.output}")
    else:
        write_path_csv(path, sys.stdout)
    return 0


def _cmd_experiment(kind: str, ns) -> int:
    overrides = {
        "alpha": ns.alpha, "gamma": ns.gamma, "sigma": ns.sigma,
        "lower": ns.lower, "upper": ns.upper, "x0": ns.x0, "dt": ns.dt,
        "horizon": ns.horizon, "n_paths": ns.paths, "workers": ns.workers,
        "master_seed": _resolve_seed(ns.seed), "output": ns.output,
    }
    if kind == "fclt":
        overrides["fclt_n"] = ns.fclt_n
        if ns.fclt_grid is not None:
            overrides["fclt_grid"] = tuple(ns.fclt_grid)
    if ns.config:
        cfg = harness.load_config(ns.config, kind=kind, overrides=overrides)
    else:
        cfg = harness.config_from_mapping({}, kind=kind, overrides=overrides)
    report = harness.run_experiment(cfg)
    stem = cfg.output_path or f"{kind}_report"
    json_path, csv_path = harness.write_report(report, stem)
    for c in report.checks:
        print(f"{c.metric}={c.value:.12g}")
        print(f"{c.metric}.threshold={c.threshold:.12g}")
        print(f"{c.metric}.pass={str(c.passed).lower()}")
    print(f"passed={str(report.passed).lower()}")
    print(f"report_json={json_path}")
    print(f"report_csv={csv_path}")
    return 0 if report.passed else 1


def run_cli(argv: Sequence[str]) -> int:
    """Parse argv (without the program name) and execute; returns exit code."""
    parser = _build_parser()
    try:
        ns = parser.parse_args(list(argv))
    except SystemExit as e:
        # argparse exits 0 for --help, 2 for usage errors
        return int(e.code or 0)
    try:
        if ns.command == "analytic":
            return _cmd_analytic(ns)
        if ns.command == "simulate":
            return _cmd_simulate(ns)
        return _cmd_experiment(ns.command, ns)
    except RouError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
