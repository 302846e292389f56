"""Experiment orchestration: analytic predictions vs Monte Carlo output.

An experiment is described by an ExperimentConfig (loadable from a YAML file
with nested sections; every field has a CLI flag override).  Runners return
an ExperimentReport whose numeric block is a pure function of the config --
including the master seed -- so reports are bitwise reproducible.  The
standardization constants q and tau always come from the analytic module,
never from the sample under test.

The FCLT's locally uniform convergence cannot be certified by any finite
check; the marginal-normality, variance and covariance comparisons below are
necessary-condition checks and the reports label them as such.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
import yaml

from . import analytic, stats
from .errors import ConfigError, InsufficientSamples, WriteFailure
from .model import BoundarySpec, OUParams
from .simulate import SimConfig, batch_simulate

KINDS = ("stationary", "clt", "fclt", "doubly")

DEFAULT_THRESHOLDS = {
    "stationary": {"rate_abs": 0.01, "mean_abs": 0.01, "ks": 0.05},
    "clt": {"ks": 0.05},
    "fclt": {"var_rel": 0.10, "cov_rel": 0.15, "ks": 0.06},
    "doubly": {"rate_abs": 0.01},
}

_SQRT2 = math.sqrt(2.0)

# Desk-scale defaults; one command reproduces each experiment.
_DEFAULTS = {
    "stationary": dict(alpha=0.0, gamma=1.0, sigma=_SQRT2, lower=0.0,
                       upper=None, x0=0.0, dt=1e-3, horizon=500.0,
                       n_paths=64),
    "clt": dict(alpha=1.0, gamma=1.0, sigma=1.0, lower=0.0, upper=None,
                x0=1.0, dt=1e-3, horizon=200.0, n_paths=2000),
    "fclt": dict(alpha=1.0, gamma=1.0, sigma=1.0, lower=0.0, upper=None,
                 x0=1.0, dt=1e-3, horizon=200.0, n_paths=1000),
    "doubly": dict(alpha=0.0, gamma=1.0, sigma=_SQRT2, lower=0.0, upper=1.0,
                   x0=0.5, dt=1e-3, horizon=500.0, n_paths=64),
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    params: OUParams
    boundary: BoundarySpec
    x0: float
    dt: float
    horizon: float
    n_paths: int
    master_seed: int = 42
    workers: int = 1
    fclt_n: Optional[float] = None
    fclt_grid: tuple = ()
    thresholds: Mapping[str, float] = field(default_factory=dict)
    output_path: Optional[str] = None
    burn_in_fraction: float = 0.1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.n_paths < 0:
            raise ConfigError("n_paths must be >= 0")
        merged = dict(DEFAULT_THRESHOLDS[self.kind])
        merged.update(self.thresholds)
        for k, v in merged.items():
            if not v > 0:
                raise ConfigError(f"threshold {k} must be positive, got {v!r}")
        object.__setattr__(self, "thresholds", merged)
        if self.kind == "fclt":
            if self.fclt_n is None or not self.fclt_n > 0:
                raise ConfigError("fclt requires a positive scaling fclt_n")
            grid = tuple(float(t) for t in self.fclt_grid)
            if not grid:
                raise ConfigError("fclt requires a nonempty fclt_grid")
            hi = self.horizon / self.fclt_n
            if any(not (0.0 < t <= hi * (1 + 1e-12)) for t in grid):
                raise ConfigError(
                    f"fclt_grid must lie in (0, horizon/fclt_n] = (0, {hi!r}]")
            object.__setattr__(self, "fclt_grid", grid)
        if self.kind == "doubly":
            if not self.boundary.is_doubly:
                raise ConfigError("doubly experiment needs both barriers")
            if self.boundary.lower != 0.0:
                raise ConfigError(
                    "the doubly loss-rate formula fixes the interval at [0, d]")
        elif self.boundary.is_doubly:
            raise ConfigError(f"{self.kind} experiment needs a one-sided barrier")

    @property
    def sim(self) -> SimConfig:
        return SimConfig(params=self.params, boundary=self.boundary,
                         x0=self.x0, dt=self.dt, horizon=self.horizon,
                         seed=self.master_seed, record_full_path=False)


def default_config(kind: str, **overrides) -> ExperimentConfig:
    """The shipped desk-scale configuration for ``kind``."""
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    d = dict(_DEFAULTS[kind])
    base = dict(
        kind=kind,
        params=OUParams(d["alpha"], d["gamma"], d["sigma"]),
        boundary=BoundarySpec(d["lower"], d["upper"]),
        x0=d["x0"], dt=d["dt"], horizon=d["horizon"], n_paths=d["n_paths"],
    )
    if kind == "fclt":
        base.update(fclt_n=200.0, fclt_grid=(0.25, 0.5, 1.0))
    base.update(overrides)
    return ExperimentConfig(**base)


@dataclass(frozen=True)
class Check:
    """One thresholded comparison; passed is recomputable from the numbers."""

    metric: str
    value: float
    threshold: float
    passed: bool

    @staticmethod
    def of(metric: str, value: float, threshold: float) -> "Check":
        return Check(metric, float(value), float(threshold),
                     bool(value <= threshold))


@dataclass(frozen=True)
class ExperimentReport:
    config: dict
    analytic: dict
    empirical: dict
    checks: tuple
    passed: bool
    wall_time_s: float
    notes: tuple = ()

    def numeric_block(self) -> dict:
        """Everything that must reproduce bitwise for equal configs."""
        return {"analytic": self.analytic, "empirical": self.empirical,
                "checks": [c.__dict__ for c in self.checks]}


def _config_echo(cfg: ExperimentConfig) -> dict:
    return {
        "kind": cfg.kind,
        "alpha": cfg.params.alpha,
        "gamma": cfg.params.gamma,
        "sigma": cfg.params.sigma,
        "lower": cfg.boundary.lower,
        "upper": cfg.boundary.upper,
        "x0": cfg.x0,
        "dt": cfg.dt,
        "horizon": cfg.horizon,
        "n_paths": cfg.n_paths,
        "master_seed": cfg.master_seed,
        "workers": cfg.workers,
        "fclt_n": cfg.fclt_n,
        "fclt_grid": list(cfg.fclt_grid),
        "thresholds": dict(cfg.thresholds),
        "output_path": cfg.output_path,
        "burn_in_fraction": cfg.burn_in_fraction,
    }


def _finish(cfg, analytic_block, empirical, checks, t0, notes=()) -> ExperimentReport:
    return ExperimentReport(
        config=_config_echo(cfg),
        analytic=analytic_block,
        empirical=empirical,
        checks=tuple(checks),
        passed=all(c.passed for c in checks),
        wall_time_s=time.perf_counter() - t0,
        notes=tuple(notes),
    )


def _stationary_samples(cfg: ExperimentConfig) -> np.ndarray:
    """Post burn-in sampling times at spacing 1/gamma (serial-correlation
    control by subsampling rather than ESS corrections)."""
    end = cfg.sim.n_steps * cfg.dt  # grid horizon (truncated if ragged)
    start = cfg.burn_in_fraction * end
    return np.arange(start, end * (1 + 1e-12), 1.0 / cfg.params.gamma)


def run_stationary_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Checks L_t/t -> q, time-average -> stationary mean, marginal law -> cdf."""
    if cfg.kind != "stationary":
        raise ConfigError(f"expected kind 'stationary', got {cfg.kind!r}")
    if cfg.n_paths < 1:
        raise InsufficientSamples(1, cfg.n_paths)
    t0 = time.perf_counter()
    rv = analytic.rate_and_variance(cfg.params, cfg.boundary)
    mean = analytic.stationary_mean(cfg.params, cfg.boundary)
    law = analytic.stationary_law(cfg.params, cfg.boundary)
    ana = {"q": rv.q, "tau2": rv.tau2, "stationary_mean": mean,
           "boundary_density": rv.boundary_density}

    times = _stationary_samples(cfg)
    batch = batch_simulate(cfg.sim, cfg.n_paths, cfg.master_seed,
                           sample_times=times, workers=cfg.workers)
    rates = batch.l_t / (cfg.sim.n_steps * cfg.dt)
    pooled = batch.y_at.ravel()
    emp = {
        "rate_mean": float(np.mean(rates)),
        "rate_se": float(np.std(rates, ddof=1) / math.sqrt(len(rates)))
        if len(rates) > 1 else float("nan"),
        "time_average": float(np.mean(pooled)),
        "ks_marginal": stats.ks_distance(pooled, law.cdf),
        "n_marginal_samples": int(pooled.size),
    }
    thr = cfg.thresholds
    checks = [
        Check.of("rate_abs_err", abs(emp["rate_mean"] - rv.q), thr["rate_abs"]),
        Check.of("mean_abs_err", abs(emp["time_average"] - mean), thr["mean_abs"]),
        Check.of("ks_marginal", emp["ks_marginal"], thr["ks"]),
    ]
    return _finish(cfg, ana, emp, checks, t0)


def run_clt_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """KS of the standardized terminal idle value against the standard normal."""
    if cfg.kind != "clt":
        raise ConfigError(f"expected kind 'clt', got {cfg.kind!r}")
    if cfg.n_paths < 1:
        raise InsufficientSamples(1, cfg.n_paths)
    t0 = time.perf_counter()
    rv = analytic.rate_and_variance(cfg.params, cfg.boundary)
    mean = analytic.stationary_mean(cfg.params, cfg.boundary)
    ana = {"q": rv.q, "tau2": rv.tau2, "stationary_mean": mean,
           "boundary_density": rv.boundary_density}

    batch = batch_simulate(cfg.sim, cfg.n_paths, cfg.master_seed,
                           workers=cfg.workers)
    horizon = cfg.sim.n_steps * cfg.dt
    z = (batch.l_t - rv.q * horizon) / (math.sqrt(rv.tau2) * math.sqrt(horizon))
    emp = {
        "ks_normal": stats.ks_distance(z, analytic.normal_cdf),
        "z_mean": float(np.mean(z)),
        "z_sd": float(np.std(z, ddof=1)) if len(z) > 1 else float("nan"),
        "rate_mean": float(np.mean(batch.l_t / horizon)),
    }
    checks = [Check.of("ks_normal", emp["ks_normal"], cfg.thresholds["ks"])]
    return _finish(cfg, ana, emp, checks, t0)


def run_fclt_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Finite-dimensional Brownian-limit checks for the scaled idle process.

    Necessary-condition checks only: marginal KS against N(0, t), variance
    against t, covariance against min(s, t).
    """
    if cfg.kind != "fclt":
        raise ConfigError(f"expected kind 'fclt', got {cfg.kind!r}")
    if cfg.n_paths < 2:
        raise InsufficientSamples(2, cfg.n_paths)
    t0 = time.perf_counter()
    rv = analytic.rate_and_variance(cfg.params, cfg.boundary)
    mean = analytic.stationary_mean(cfg.params, cfg.boundary)
    ana = {"q": rv.q, "tau2": rv.tau2, "stationary_mean": mean,
           "boundary_density": rv.boundary_density}
    tau = math.sqrt(rv.tau2)
    grid = np.asarray(cfg.fclt_grid, dtype=float)
    n = float(cfg.fclt_n)

    batch = batch_simulate(cfg.sim, cfg.n_paths, cfg.master_seed,
                           sample_times=n * grid, workers=cfg.workers)
    samples = [stats.ScaledIdleSample(
        n=n, t_grid=grid,
        values=stats.scale_idle_values(batch.l_at[i], rv.q, tau, n, grid))
        for i in range(cfg.n_paths)]
    z = np.vstack([s.values for s in samples])

    thr = cfg.thresholds
    emp = {}
    checks = []
    for j, t in enumerate(grid):
        var = float(np.var(z[:, j], ddof=1))
        ks = stats.ks_distance(z[:, j],
                               lambda x, _t=t: analytic.normal_cdf(
                                   np.asarray(x) / math.sqrt(_t)))
        emp[f"var_at_{t:g}"] = var
        emp[f"ks_at_{t:g}"] = ks
        emp[f"mean_at_{t:g}"] = float(np.mean(z[:, j]))
        checks.append(Check.of(f"var_rel_err_at_{t:g}", abs(var / t - 1.0),
                               thr["var_rel"]))
        checks.append(Check.of(f"ks_at_{t:g}", ks, thr["ks"]))
    s_t, t_t = float(grid[0]), float(grid[-1])
    cov = stats.increment_covariance(samples, s_t, t_t)
    emp[f"cov_{s_t:g}_{t_t:g}"] = cov
    checks.append(Check.of(f"cov_rel_err_{s_t:g}_{t_t:g}",
                           abs(cov / min(s_t, t_t) - 1.0), thr["cov_rel"]))
    notes = ("fclt checks are necessary conditions for the functional limit, "
             "not a certification of convergence in C[0,inf)",)
    return _finish(cfg, ana, emp, checks, t0, notes)


def run_doubly_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Loss-rate check for reflection on [0, d]: mean(U_T/T) vs the closed form."""
    if cfg.kind != "doubly":
        raise ConfigError(f"expected kind 'doubly', got {cfg.kind!r}")
    if cfg.n_paths < 1:
        raise InsufficientSamples(1, cfg.n_paths)
    t0 = time.perf_counter()
    d = cfg.boundary.upper
    q_u = analytic.doubly_loss_rate(cfg.params, d)
    ana = {"q_upper": q_u, "interval_width": d}

    times = _stationary_samples(cfg)
    batch = batch_simulate(cfg.sim, cfg.n_paths, cfg.master_seed,
                           sample_times=times, workers=cfg.workers)
    horizon = cfg.sim.n_steps * cfg.dt
    u_rates = batch.u_t / horizon
    l_rates = batch.l_t / horizon
    ybar = float(np.mean(batch.y_at))
    # stationarity balance: the idle rate should equal q_U - alpha + gamma E[Z]
    balance = q_u - cfg.params.alpha + cfg.params.gamma * ybar
    emp = {
        "loss_rate_mean": float(np.mean(u_rates)),
        "loss_rate_se": float(np.std(u_rates, ddof=1) / math.sqrt(len(u_rates)))
        if len(u_rates) > 1 else float("nan"),
        "idle_rate_mean": float(np.mean(l_rates)),
        "time_average": ybar,
        "idle_rate_balance_residual": float(abs(np.mean(l_rates) - balance)),
    }
    checks = [Check.of("loss_rate_abs_err",
                       abs(emp["loss_rate_mean"] - q_u),
                       cfg.thresholds["rate_abs"])]
    notes = ("idle_rate_balance_residual is diagnostic only (not thresholded)",)
    return _finish(cfg, ana, emp, checks, t0, notes)


_RUNNERS = {
    "stationary": run_stationary_experiment,
    "clt": run_clt_experiment,
    "fclt": run_fclt_experiment,
    "doubly": run_doubly_experiment,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    return _RUNNERS[cfg.kind](cfg)


# -- serialization -------------------------------------------------------------

def report_to_dict(report: ExperimentReport) -> dict:
    return {
        "config": report.config,
        "analytic": report.analytic,
        "empirical": report.empirical,
        "checks": [c.__dict__ for c in report.checks],
        "passed": report.passed,
        "wall_time_s": report.wall_time_s,
        "notes": list(report.notes),
    }


def report_from_dict(d: Mapping) -> ExperimentReport:
    return ExperimentReport(
        config=dict(d["config"]),
        analytic=dict(d["analytic"]),
        empirical=dict(d["empirical"]),
        checks=tuple(Check(**c) for c in d["checks"]),
        passed=bool(d["passed"]),
        wall_time_s=float(d["wall_time_s"]),
        notes=tuple(d.get("notes", ())),
    )


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None or isinstance(v, (str, int)):
        return "" if v is None else str(v)
    return f"{v:.12g}"


def write_report(report: ExperimentReport, output_path: str) -> tuple[str, str]:
    """Write ``<stem>.json`` (full nested report, exact floats) and
    ``<stem>.csv`` (flat ``metric,value,threshold,pass`` rows: one per
    thresholded check, then echo rows).  Returns the two paths."""
    stem = output_path[:-5] if output_path.endswith(".json") else output_path
    json_path, csv_path = stem + ".json", stem + ".csv"
    try:
        with open(json_path, "w") as f:
            json.dump(report_to_dict(report), f, indent=2)
            f.write("\n")
        with open(csv_path, "w") as f:
            f.write("metric,value,threshold,pass\n")
            for c in report.checks:
                f.write(f"{c.metric},{_fmt(c.value)},{_fmt(c.threshold)},"
                        f"{str(c.passed).lower()}\n")
            echo = {**{f"config.{k}": v for k, v in report.config.items()
                       if not isinstance(v, (dict, list))},
                    **{f"analytic.{k}": v for k, v in report.analytic.items()},
                    **{f"empirical.{k}": v for k, v in report.empirical.items()}}
            for k, v in echo.items():
                f.write(f"{k},{_fmt(v)},,\n")
    except OSError as e:
        raise WriteFailure(output_path, e) from e
    return json_path, csv_path


def load_report(json_path: str) -> ExperimentReport:
    with open(json_path) as f:
        return report_from_dict(json.load(f))


# -- config-file ingestion -----------------------------------------------------

_SIM_KEYS = {"alpha", "gamma", "sigma", "lower", "upper", "x0", "dt", "horizon"}
_FCLT_KEYS = {"n", "grid"}
_TOP_KEYS = {"kind", "sim", "n_paths", "master_seed", "workers", "fclt",
             "thresholds", "output", "burn_in_fraction"}


def config_from_mapping(doc: Mapping, kind: Optional[str] = None,
                        overrides: Optional[Mapping] = None) -> ExperimentConfig:
    """Build an ExperimentConfig from a nested mapping (the YAML schema).

    ``overrides`` is a flat mapping of sim/top-level field names (the CLI
    flags) applied after the file.  Unknown keys anywhere are an error.
    """
    doc = dict(doc or {})
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    sim = dict(doc.get("sim") or {})
    unknown = set(sim) - _SIM_KEYS
    if unknown:
        raise ConfigError(f"unknown sim keys: {sorted(unknown)}")
    fclt = dict(doc.get("fclt") or {})
    unknown = set(fclt) - _FCLT_KEYS
    if unknown:
        raise ConfigError(f"unknown fclt keys: {sorted(unknown)}")
    thresholds = dict(doc.get("thresholds") or {})

    file_kind = doc.get("kind")
    if kind is not None and file_kind is not None and kind != file_kind:
        raise ConfigError(
            f"config file is for kind {file_kind!r} but {kind!r} was requested")
    kind = kind or file_kind
    if kind is None:
        raise ConfigError("experiment kind missing (config 'kind' or CLI)")
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")

    merged = dict(_DEFAULTS[kind])
    merged.update({k: v for k, v in sim.items()})
    top = {
        "n_paths": doc.get("n_paths", _DEFAULTS[kind]["n_paths"]),
        "master_seed": doc.get("master_seed", 42),
        "workers": doc.get("workers", 1),
        "burn_in_fraction": doc.get("burn_in_fraction", 0.1),
        "output": doc.get("output"),
        "fclt_n": fclt.get("n", 200.0 if kind == "fclt" else None),
        "fclt_grid": tuple(fclt.get("grid", (0.25, 0.5, 1.0))),
    }
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k in _SIM_KEYS:
            merged[k] = v
        elif k in {"n_paths", "master_seed", "workers", "output", "fclt_n",
                   "burn_in_fraction"}:
            top[k] = v
        elif k == "fclt_grid":
            top["fclt_grid"] = tuple(v)
        elif k == "thresholds":
            thresholds.update(v)
        else:
            raise ConfigError(f"unknown override {k!r}")

    # clearing one barrier via override: explicit null wins over the default
    return ExperimentConfig(
        kind=kind,
        params=OUParams(merged["alpha"], merged["gamma"], merged["sigma"]),
        boundary=BoundarySpec(merged["lower"], merged["upper"]),
        x0=merged["x0"], dt=merged["dt"], horizon=merged["horizon"],
        n_paths=int(top["n_paths"]), master_seed=int(top["master_seed"]),
        workers=int(top["workers"]),
        fclt_n=top["fclt_n"],
        fclt_grid=tuple(top["fclt_grid"]) if kind == "fclt" else (),
        thresholds=thresholds,
        output_path=top["output"],
        burn_in_fraction=float(top["burn_in_fraction"]),
    )


def load_config(path: str, kind: Optional[str] = None,
                overrides: Optional[Mapping] = None) -> ExperimentConfig:
    """Read a YAML experiment config; unknown keys are an error."""
    with open(path) as f:
        doc = yaml.safe_load(f) or {}
    if not isinstance(doc, Mapping):
        raise ConfigError(f"config root must be a mapping, got {type(doc)}")
    return config_from_mapping(doc, kind=kind, overrides=overrides)
