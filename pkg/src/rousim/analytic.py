"""Closed-form quantities for reflected OU processes.

For reflection at a lower barrier l the process Y - l is a reflected-at-zero
process with drift offset alpha - gamma*l; for an upper barrier d, flipping
(Y := d - Z) reduces to the same case with offset gamma*d - alpha.  All
public functions therefore normalize to the canonical lower-at-zero frame
first and map results back, which makes the translation and flip identities
hold to machine precision by construction.

Canonical frame conventions (barrier at 0, drift offset a, so the free
process is N(m, s^2) with m = a/gamma, s = sqrt(sigma^2 / 2 gamma)):

    u    = m / s                        standardized barrier distance
    p(0) = phi(u) / (s Phi(u))          invariant density at the barrier
    q    = (sigma^2 / 2) p(0)           idle-rate (regulator growth rate)
    h'(x) = exp((z^2 - u^2)/2 + logPhi(-z) - logPhi(u)),  z = (x - m)/s

The h' form is the Mills-ratio formulation evaluated fully in log space:
tail cdf and density both underflow past z ~ 38, their ratio does not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import special

from . import quadrature
from .errors import (
    DoublyReflectedUnsupported,
    NonPositiveWidth,
    OutOfSupport,
)
from .model import BoundarySpec, OUParams

_LOG_2PI = math.log(2.0 * math.pi)
_SQRT_HALF_PI = math.sqrt(math.pi / 2.0)

ArrayLike = Union[float, np.ndarray]


# -- standard-normal helpers -------------------------------------------------

def normal_pdf(x: ArrayLike) -> ArrayLike:
    return np.exp(-0.5 * np.square(x) - 0.5 * _LOG_2PI)


def normal_cdf(x: ArrayLike) -> ArrayLike:
    return special.ndtr(x)


def normal_sf(x: ArrayLike) -> ArrayLike:
    return special.ndtr(-np.asarray(x) if isinstance(x, np.ndarray) else -x)


def log_normal_cdf(x: ArrayLike) -> ArrayLike:
    return special.log_ndtr(x)


def mills_ratio(z: ArrayLike) -> ArrayLike:
    """sf(z)/pdf(z) via the scaled complementary error function.

    Exact to ~1e-13 relative wherever the true value is representable; for
    z below about -37.6 the true ratio exceeds the double range and inf is
    returned.
    """
    return _SQRT_HALF_PI * special.erfcx(z / math.sqrt(2.0))


def log_mills_ratio(z: ArrayLike) -> ArrayLike:
    """log(sf(z)/pdf(z)), finite for all real z."""
    return special.log_ndtr(-np.asarray(z)) + 0.5 * np.square(z) + 0.5 * _LOG_2PI


# -- the exponential weight --------------------------------------------------

def weight_exponent(params: OUParams, v: ArrayLike) -> ArrayLike:
    """Exponent (2 alpha v - gamma v^2) / sigma^2 of the weight function."""
    s2 = params.sigma**2
    return (2.0 * params.alpha - params.gamma * np.asarray(v, dtype=float)) \
        * np.asarray(v, dtype=float) / s2


def weight_W(params: OUParams, v: ArrayLike) -> ArrayLike:
    """exp((2 alpha v - gamma v^2)/sigma^2), the invariant-density weight.

    The quadratic exponent is formed first, so no intermediate factor can
    overflow; the result itself overflows to inf only when the true value
    exceeds the double range (exponent > ~709).
    """
    with np.errstate(over="ignore"):
        out = np.exp(weight_exponent(params, v))
    return float(out) if np.isscalar(v) or np.ndim(v) == 0 else out


# -- canonical reduction ------------------------------------------------------

@dataclass(frozen=True)
class _Frame:
    """Affine map onto the canonical lower-at-zero frame."""

    alpha: float           # canonical drift offset
    barrier: float         # original-coordinates barrier location
    orient: float          # +1 lower reflection, -1 upper (flip)

    def to_canonical(self, x: ArrayLike) -> ArrayLike:
        return self.orient * (np.asarray(x, dtype=float) - self.barrier)


def _frame(params: OUParams, boundary: BoundarySpec, what: str) -> _Frame:
    if boundary.is_doubly:
        raise DoublyReflectedUnsupported(what)
    if boundary.is_lower_only:
        return _Frame(params.alpha - params.gamma * boundary.lower,
                      boundary.lower, 1.0)
    return _Frame(params.gamma * boundary.upper - params.alpha,
                  boundary.upper, -1.0)


def _ms(params: OUParams, alpha_c: float) -> tuple[float, float]:
    return alpha_c / params.gamma, params.stationary_sd


# -- stationary law -----------------------------------------------------------

@dataclass(frozen=True)
class StationaryLaw:
    """Truncated-normal invariant law of a one-sided reflected OU process.

    ``normalizer`` is the mass the free N(mean_unreflected, sd^2) law puts on
    the reflection interval; the truncated density divides by it.
    """

    mean_unreflected: float
    sd_unreflected: float
    lower: Optional[float]
    upper: Optional[float]
    normalizer: float

    def _z(self, y: ArrayLike) -> ArrayLike:
        return (np.asarray(y, dtype=float) - self.mean_unreflected) / self.sd_unreflected

    def _in_support(self, y: ArrayLike) -> ArrayLike:
        y = np.asarray(y, dtype=float)
        ok = np.ones(y.shape, dtype=bool)
        if self.lower is not None:
            ok &= y >= self.lower
        if self.upper is not None:
            ok &= y <= self.upper
        return ok

    def log_pdf(self, y: ArrayLike) -> ArrayLike:
        z = self._z(y)
        out = -0.5 * np.square(z) - 0.5 * _LOG_2PI \
            - math.log(self.sd_unreflected) - math.log(self.normalizer)
        out = np.where(self._in_support(y), out, -np.inf)
        return float(out) if np.ndim(y) == 0 else out

    def pdf(self, y: ArrayLike) -> ArrayLike:
        out = np.exp(self.log_pdf(y))
        return float(out) if np.ndim(y) == 0 else out

    def cdf(self, y: ArrayLike) -> ArrayLike:
        z = self._z(np.clip(y, self.lower, self.upper))
        if self.lower is not None:
            zl = self._z(self.lower)
            out = (special.ndtr(z) - special.ndtr(zl)) / self.normalizer
        else:
            out = special.ndtr(z) / self.normalizer
        out = np.clip(out, 0.0, 1.0)
        return float(out) if np.ndim(y) == 0 else out

    def sf(self, y: ArrayLike) -> ArrayLike:
        z = self._z(np.clip(y, self.lower, self.upper))
        if self.lower is not None:
            out = special.ndtr(-z) / self.normalizer
        else:
            zu = self._z(self.upper)
            out = (special.ndtr(zu) - special.ndtr(z)) / self.normalizer
        out = np.clip(out, 0.0, 1.0)
        return float(out) if np.ndim(y) == 0 else out

    @property
    def barrier_density(self) -> float:
        """Density value at the reflecting barrier."""
        b = self.lower if self.lower is not None else self.upper
        return self.pdf(b)


def stationary_law(params: OUParams, boundary: BoundarySpec) -> StationaryLaw:
    """Invariant law: N(alpha/gamma, sigma^2/2gamma) truncated to the barrier."""
    fr = _frame(params, boundary, "the invariant law")
    m, s = _ms(params, fr.alpha)
    return StationaryLaw(
        mean_unreflected=params.mean_reversion_level,
        sd_unreflected=s,
        lower=boundary.lower,
        upper=boundary.upper,
        normalizer=float(special.ndtr(m / s)),
    )


def stationary_mean(params: OUParams, boundary: BoundarySpec) -> float:
    """Mean of the invariant law: (sigma^2/2gamma) p(0) + alpha/gamma, mapped
    back through the translation/flip that normalized the barrier."""
    fr = _frame(params, boundary, "the stationary mean")
    m, s = _ms(params, fr.alpha)
    p0 = _barrier_density(params, fr.alpha)
    mean_c = params.sigma**2 / (2.0 * params.gamma) * p0 + m
    return fr.barrier + fr.orient * mean_c


def _barrier_density(params: OUParams, alpha_c: float) -> float:
    m, s = _ms(params, alpha_c)
    u = m / s
    return math.exp(-0.5 * u * u - 0.5 * _LOG_2PI - math.log(s)
                    - special.log_ndtr(u))


def boundary_rate(params: OUParams, boundary: BoundarySpec) -> float:
    """Long-run regulator growth rate (sigma^2/2) * density-at-barrier."""
    fr = _frame(params, boundary, "the boundary rate")
    return 0.5 * params.sigma**2 * _barrier_density(params, fr.alpha)


@dataclass(frozen=True)
class RateAndVariance:
    """Boundary rate q, CLT variance tau2, and the barrier density they share."""

    q: float
    tau2: float
    boundary_density: float


def rate_and_variance(params: OUParams, boundary: BoundarySpec,
                      tail_sds: float = 12.0) -> RateAndVariance:
    fr = _frame(params, boundary, "the rate/variance pair")
    p0 = _barrier_density(params, fr.alpha)
    return RateAndVariance(
        q=0.5 * params.sigma**2 * p0,
        tau2=asymptotic_variance(params, boundary, tail_sds=tail_sds),
        boundary_density=p0,
    )


# -- the function h -----------------------------------------------------------

def _h_prime_canonical(params: OUParams, alpha_c: float, xc: ArrayLike) -> ArrayLike:
    m, s = _ms(params, alpha_c)
    u = m / s
    z = (np.asarray(xc, dtype=float) - m) / s
    return np.exp(0.5 * (np.square(z) - u * u)
                  + special.log_ndtr(-z) - special.log_ndtr(u))


def h_prime(params: OUParams, boundary: BoundarySpec, x: ArrayLike) -> ArrayLike:
    """Derivative of the martingale-problem solution h.

    In the canonical frame h'(x) = (p(0)/p(x)) * sf(x); equals 1 exactly at
    the barrier and decreases to 0 like 1/x.  Raises OutOfSupport off the
    reflected half-line.
    """
    fr = _frame(params, boundary, "h'")
    xc = fr.to_canonical(x)
    if np.any(np.asarray(xc) < 0):
        raise OutOfSupport(
            float(np.min(np.asarray(x))) if np.ndim(x) else float(x),
            "beyond the reflecting barrier")
    out = _h_prime_canonical(params, fr.alpha, xc)
    return float(out) if np.ndim(x) == 0 else out


def h_value(params: OUParams, boundary: BoundarySpec, x: float,
            rel_tol: float = 1e-9) -> float:
    """h(x), anchored so h(barrier) = 0, by adaptive quadrature of h'."""
    fr = _frame(params, boundary, "h")
    xc = float(fr.to_canonical(x))
    if xc < 0:
        raise OutOfSupport(x, "beyond the reflecting barrier")
    val = quadrature.integrate(
        lambda t: _h_prime_canonical(params, fr.alpha, t), 0.0, xc,
        abs_tol=1e-14, rel_tol=rel_tol)
    return fr.orient * val


def asymptotic_variance(params: OUParams, boundary: BoundarySpec,
                        tail_sds: float = 12.0) -> float:
    """CLT variance tau^2 = sigma^2 * E[h'(Y)^2] under the invariant law.

    The integral runs from the barrier to max(m, 0) + tail_sds * s in the
    canonical frame; the integrand decays like a Gaussian tail times 1/x^2,
    so the default 12-sd window truncates below 1e-12 of the total.  Note
    that s = sqrt(sigma^2 / 2 gamma) grows as gamma approaches 0, widening
    the window (and the runtime) accordingly.
    """
    fr = _frame(params, boundary, "the asymptotic variance")
    m, s = _ms(params, fr.alpha)
    u = m / s
    log_norm = special.log_ndtr(u)

    def integrand(xc):
        z = (np.asarray(xc, dtype=float) - m) / s
        log_h1 = 0.5 * (np.square(z) - u * u) \
            + special.log_ndtr(-z) - special.log_ndtr(u)
        log_p = -0.5 * np.square(z) - 0.5 * _LOG_2PI - math.log(s) - log_norm
        return np.exp(2.0 * log_h1 + log_p)

    hi = max(m, 0.0) + tail_sds * s
    val = quadrature.integrate(integrand, 0.0, hi, abs_tol=1e-300, rel_tol=1e-11)
    return params.sigma**2 * val


def generator_residual(params: OUParams, boundary: BoundarySpec, x: float,
                       fd_step: float) -> float:
    """(L h)(x) + q with h'' by central difference; ~0 when the closed forms
    are consistent (L h = -q at a lower barrier, +q at an upper one)."""
    if fd_step <= 0:
        raise ValueError("fd_step must be positive")
    fr = _frame(params, boundary, "the generator residual")
    if float(fr.to_canonical(x)) - fd_step < 0:
        raise OutOfSupport(x, "needs x +- fd_step inside the support")
    h1 = h_prime(params, boundary, x)
    h2 = (h_prime(params, boundary, x + fd_step)
          - h_prime(params, boundary, x - fd_step)) / (2.0 * fd_step)
    q = boundary_rate(params, boundary)
    lh = (params.alpha - params.gamma * x) * h1 + 0.5 * params.sigma**2 * h2
    return lh + fr.orient * q


# -- doubly reflected loss rate ----------------------------------------------

def doubly_loss_rate(params: OUParams, d: float) -> float:
    """Loss rate at the upper barrier of reflection on [0, d]:
    (sigma^2/2) W(d) / integral_0^d W(v) dv, with the weight integrated in a
    shifted log frame so large exponents cannot overflow."""
    if not d > 0:
        raise NonPositiveWidth(d)
    # peak of the exponent over [0, d]
    m = params.mean_reversion_level
    peak = float(weight_exponent(params, min(max(m, 0.0), d)))

    def shifted(v):
        return np.exp(weight_exponent(params, v) - peak)

    den = quadrature.integrate(shifted, 0.0, d, abs_tol=1e-300, rel_tol=1e-11)
    num = math.exp(float(weight_exponent(params, d)) - peak)
    return 0.5 * params.sigma**2 * num / den
