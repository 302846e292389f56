"""Parameter and path data model.

The SDE is  dY = (alpha - gamma*Y) dt + sigma dW + dL - dU,  with L and U
the minimal nondecreasing processes keeping Y above ``lower`` and below
``upper``.  Everything here is immutable after construction: the dataclasses
are frozen and array fields are marked read-only, so instances are safe to
share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, TextIO

import numpy as np

from .errors import (
    EmptyInterval,
    NoBoundary,
    NonFiniteInput,
    NonPositiveGamma,
    NonPositiveSigma,
    PathInvariantViolation,
)


@dataclass(frozen=True)
class OUParams:
    """Drift/diffusion coefficients: drift alpha - gamma*x, volatility sigma."""

    alpha: float
    gamma: float
    sigma: float

    def __post_init__(self):
        for name in ("alpha", "gamma", "sigma"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise NonFiniteInput(name, v)
            if not math.isfinite(v):
                raise NonFiniteInput(name, v)
            object.__setattr__(self, name, float(v))
        if self.gamma <= 0:
            raise NonPositiveGamma(self.gamma)
        if self.sigma <= 0:
            raise NonPositiveSigma(self.sigma)

    @property
    def mean_reversion_level(self) -> float:
        return self.alpha / self.gamma

    @property
    def stationary_sd(self) -> float:
        """Standard deviation sqrt(sigma^2 / (2 gamma)) of the free process."""
        return math.sqrt(self.sigma**2 / (2.0 * self.gamma))


def validate_params(alpha: float, gamma: float, sigma: float) -> OUParams:
    """Construct OUParams, rejecting non-finite inputs and gamma, sigma <= 0."""
    return OUParams(alpha, gamma, sigma)


@dataclass(frozen=True)
class BoundarySpec:
    """Which reflecting barriers are active.  At least one must be set."""

    lower: Optional[float] = None
    upper: Optional[float] = None

    def __post_init__(self):
        if self.lower is None and self.upper is None:
            raise NoBoundary()
        for name in ("lower", "upper"):
            v = getattr(self, name)
            if v is not None:
                if not math.isfinite(v):
                    raise NonFiniteInput(name, v)
                object.__setattr__(self, name, float(v))
        if self.lower is not None and self.upper is not None:
            if not self.lower < self.upper:
                raise EmptyInterval(self.lower, self.upper)

    @property
    def is_lower_only(self) -> bool:
        return self.upper is None

    @property
    def is_upper_only(self) -> bool:
        return self.lower is None

    @property
    def is_doubly(self) -> bool:
        return self.lower is not None and self.upper is not None

    def contains(self, x: float) -> bool:
        if self.lower is not None and x < self.lower:
            return False
        if self.upper is not None and x > self.upper:
            return False
        return True


def validate_boundary(lower: Optional[float] = None,
                      upper: Optional[float] = None) -> BoundarySpec:
    """Construct a BoundarySpec (raises NoBoundary / EmptyInterval)."""
    return BoundarySpec(lower, upper)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ReflectedPath:
    """A discretized reflected trajectory on the closed grid 0, dt, ..., n*dt.

    ``l_cum`` / ``u_cum`` are the cumulative idle and loss processes; both
    start at 0 and are nondecreasing.  Boundary contact is exact: whenever
    l_cum increases over a step the new state equals ``lower`` bitwise (and
    correspondingly for u_cum / ``upper``), so complementarity can be checked
    with equality rather than a tolerance.
    """

    dt: float
    times: np.ndarray
    y: np.ndarray
    l_cum: np.ndarray
    u_cum: np.ndarray
    seed: int
    boundary: BoundarySpec = field(repr=False)

    def __post_init__(self):
        for name in ("times", "y", "l_cum", "u_cum"):
            object.__setattr__(self, name, _freeze(getattr(self, name)))
        n = len(self.times)
        if not (len(self.y) == len(self.l_cum) == len(self.u_cum) == n):
            raise ValueError("grid arrays must share one length")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def terminal(self) -> tuple[float, float, float]:
        """(Y_T, L_T, U_T)."""
        return float(self.y[-1]), float(self.l_cum[-1]), float(self.u_cum[-1])


def validate_path(path: ReflectedPath) -> None:
    """Assert the three path invariants; raises PathInvariantViolation.

    1. l_cum and u_cum start at 0 and never decrease.
    2. every state respects the active barriers.
    3. discrete complementarity with exact equality: a regulator may only
       increase over a step whose new state sits exactly on its barrier.
    """
    b = path.boundary
    l, u, y = path.l_cum, path.u_cum, path.y
    if l[0] != 0.0 or u[0] != 0.0:
        raise PathInvariantViolation("regulators must start at 0")
    dl = np.diff(l)
    du = np.diff(u)
    if np.any(dl < 0) or np.any(du < 0):
        raise PathInvariantViolation("regulators must be nondecreasing")
    if b.lower is not None and np.any(y < b.lower):
        raise PathInvariantViolation("state fell below the lower barrier")
    if b.upper is not None and np.any(y > b.upper):
        raise PathInvariantViolation("state rose above the upper barrier")
    if b.lower is None and np.any(l != 0.0):
        raise PathInvariantViolation("idle process charged without a lower barrier")
    if b.upper is None and np.any(u != 0.0):
        raise PathInvariantViolation("loss process charged without an upper barrier")
    if b.lower is not None and np.any(y[1:][dl > 0] != b.lower):
        raise PathInvariantViolation(
            "idle process increased off the lower barrier")
    if b.upper is not None and np.any(y[1:][du > 0] != b.upper):
        raise PathInvariantViolation(
            "loss process increased off the upper barrier")


def regulator_integral(path: ReflectedPath, g: Callable[[float], float],
                       which: str = "idle") -> tuple[Fraction, Fraction]:
    """Both sides of the discrete occupation identity, in exact arithmetic.

    Returns (sum_k g(y_{k+1}) dL_k,  g(barrier) * L_T) as Fractions, where
    dL_k are the exact rational differences of the stored cumulative values.
    For a valid path the two are equal exactly, because the regulator only
    charges steps whose state equals the barrier bitwise.  ``which`` selects
    the idle (lower) or loss (upper) regulator.
    """
    if which == "idle":
        cum, barrier = path.l_cum, path.boundary.lower
    elif which == "loss":
        cum, barrier = path.u_cum, path.boundary.upper
    else:
        raise ValueError("which must be 'idle' or 'loss'")
    if barrier is None:
        return Fraction(0), Fraction(0)
    lhs = Fraction(0)
    idx = np.nonzero(np.diff(cum))[0]
    for k in idx:
        d = Fraction(float(cum[k + 1])) - Fraction(float(cum[k]))
        lhs += Fraction(float(g(float(path.y[k + 1])))) * d
    total = Fraction(float(cum[-1])) - Fraction(float(cum[0]))
    rhs = Fraction(float(g(float(barrier)))) * total
    return lhs, rhs


def write_path_csv(path: ReflectedPath, out: TextIO) -> None:
    """Serialize a path as CSV rows ``t,y,l,u`` (>= 12 significant digits)."""
    out.write("t,y,l,u\n")
    for t, y, l, u in zip(path.times, path.y, path.l_cum, path.u_cum):
        out.write(f"{t:.12g},{y:.12g},{l:.12g},{u:.12g}\n")


def read_path_csv(inp: TextIO, dt: float, boundary: BoundarySpec,
                  seed: int = 0) -> ReflectedPath:
    """Inverse of write_path_csv (12-digit precision)."""
    header = inp.readline().strip()
    if header != "t,y,l,u":
        raise ValueError(f"unexpected header {header!r}")
    rows = [tuple(float(c) for c in line.split(",")) for line in inp if line.strip()]
    cols = list(zip(*rows))
    return ReflectedPath(dt=dt, times=np.array(cols[0]), y=np.array(cols[1]),
                         l_cum=np.array(cols[2]), u_cum=np.array(cols[3]),
                         seed=seed, boundary=boundary)
