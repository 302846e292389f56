"""Statistical functionals for the CLT/FCLT verification experiments."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    EmptySample,
    HorizonExceeded,
    InsufficientSamples,
)
from .model import BoundarySpec, OUParams, ReflectedPath
from .analytic import h_prime


def empirical_cdf(samples: Sequence[float], x: float) -> float:
    """Fraction of samples <= x."""
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        raise EmptySample()
    return float(np.count_nonzero(s <= x)) / s.size


def ks_distance(samples: Sequence[float],
                reference_cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """One-sample Kolmogorov-Smirnov distance against a reference cdf.

    sup over the sample points of both one-sided ECDF deviations.
    """
    s = np.sort(np.asarray(samples, dtype=float))
    n = s.size
    if n == 0:
        raise EmptySample()
    try:
        f = np.asarray(reference_cdf(s), dtype=float)
        if f.shape != s.shape:
            raise TypeError
    except TypeError:
        f = np.array([float(reference_cdf(v)) for v in s])
    lo = np.arange(0, n) / n
    hi = np.arange(1, n + 1) / n
    return float(max(np.max(hi - f), np.max(f - lo)))


@dataclass(frozen=True)
class ScaledIdleSample:
    """The centered/scaled idle process (L_{n t} - q n t) / (tau sqrt(n))
    evaluated on a grid of macroscopic times."""

    n: float
    t_grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        for name in ("t_grid", "values"):
            a = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        if self.t_grid.shape != self.values.shape:
            raise ValueError("t_grid and values must align")


def scale_idle_values(l_at: np.ndarray, q: float, tau: float, n: float,
                      t_grid: np.ndarray) -> np.ndarray:
    """Apply the FCLT centering/scaling to raw L_{n t} values."""
    return (np.asarray(l_at, dtype=float) - q * n * np.asarray(t_grid)) \
        / (tau * np.sqrt(n))


def scaled_idle_process(path: ReflectedPath, q: float, tau: float, n: float,
                        t_grid: Sequence[float]) -> ScaledIdleSample:
    """Build the scaled idle sample from one path.

    L at the microscopic times n*t is linearly interpolated (L is continuous
    and nondecreasing, so interpolation preserves monotonicity).
    """
    if tau <= 0 or n <= 0:
        raise ValueError("tau and n must be positive")
    t = np.asarray(t_grid, dtype=float)
    need = n * float(np.max(t)) if t.size else 0.0
    if need > path.horizon * (1.0 + 1e-12):
        raise HorizonExceeded(need, path.horizon)
    l_at = np.interp(n * t, path.times, path.l_cum)
    return ScaledIdleSample(n=n, t_grid=t,
                            values=scale_idle_values(l_at, q, tau, n, t))


def ergodic_tau2_estimate(path: ReflectedPath, params: OUParams,
                          boundary: BoundarySpec) -> float:
    """Trapezoidal time-average of sigma^2 h'(Y_s)^2 along the path.

    Converges to the CLT variance as the horizon grows (horizon >> 1/gamma).
    """
    integrand = params.sigma**2 * np.square(h_prime(params, boundary, path.y))
    return float(np.trapezoid(integrand, path.times) / path.horizon)


def increment_covariance(scaled_samples: Sequence[ScaledIdleSample],
                         s: float, t: float) -> float:
    """Unbiased cross-path covariance of the scaled idle values at times s, t."""
    if len(scaled_samples) < 2:
        raise InsufficientSamples(2, len(scaled_samples))
    grid = scaled_samples[0].t_grid

    def locate(v: float) -> int:
        hits = np.nonzero(np.isclose(grid, v, rtol=1e-12, atol=1e-12))[0]
        if not hits.size:
            raise ValueError(f"time {v!r} not in the common grid {grid}")
        return int(hits[0])

    i, j = locate(s), locate(t)
    a = np.array([smp.values[i] for smp in scaled_samples])
    b = np.array([smp.values[j] for smp in scaled_samples])
    return float(np.cov(a, b, ddof=1)[0, 1])
