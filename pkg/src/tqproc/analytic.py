"""Closed-form Gaussian and kernel analytics.

Pure functions of their arguments: univariate and bivariate normal
distributions, the fractional Brownian motion covariance, the limit
covariance kernels of the time-dependent empirical and quantile processes,
iterated-logarithm normalization constants, the modulus-of-continuity
gauge, and the coupling-rate exponent arithmetic.  Everything here is
deterministic and safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr, ndtri

from .errors import DomainError

__all__ = [
    "std_normal_cdf",
    "std_normal_pdf",
    "std_normal_quantile",
    "marginal_cdf",
    "density_quantile",
    "true_quantile",
    "fbm_covariance",
    "fbm_correlation",
    "bivariate_normal_cdf",
    "limit_kernel_G",
    "quantile_kernel_K",
    "swanson_kernel",
    "lil_constants",
    "modulus_gauge",
    "RateExponents",
    "rate_exponents",
    "Thresholds",
    "thresholds",
    "KernelEval",
    "kernel_eval",
    "KERNEL_KINDS",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _check_hurst(H: float) -> float:
    if not 0.0 < H < 1.0:
        raise DomainError(f"Hurst index must satisfy 0 < H < 1; got {H}")
    return float(H)


# ---------------------------------------------------------------------------
# Univariate normal
# ---------------------------------------------------------------------------

def std_normal_cdf(x):
    """Standard normal CDF, accurate to machine precision on finite reals."""
    return ndtr(x)


def std_normal_pdf(x):
    """Standard normal density exp(-x^2/2)/sqrt(2 pi)."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / _SQRT_2PI
    return float(out) if out.ndim == 0 else out


def std_normal_quantile(alpha):
    """Inverse of the standard normal CDF on (0, 1)."""
    a = np.asarray(alpha, dtype=float)
    if np.any(a <= 0.0) or np.any(a >= 1.0):
        raise DomainError(f"quantile level must lie in (0, 1); got {alpha}")
    out = ndtri(a)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Marginals and quantiles of B(t)
# ---------------------------------------------------------------------------

def marginal_cdf(t: float, x, H: float):
    """P{B(t) <= x} = Phi(x / t^H); at t=0 the unit step at 0.

    B(0) = 0 almost surely, hence the degenerate marginal at t=0.
    """
    _check_hurst(H)
    if t < 0.0:
        raise DomainError(f"time must be nonnegative; got {t}")
    x = np.asarray(x, dtype=float)
    if t == 0.0:
        out = np.where(x >= 0.0, 1.0, 0.0)
    else:
        out = ndtr(x / t**H)
    return float(out) if out.ndim == 0 else out


def density_quantile(t: float, alpha: float, H: float) -> float:
    """Marginal density at the true quantile: exp(-z_a^2/2) / (t^H sqrt(2 pi))."""
    _check_hurst(H)
    if t <= 0.0:
        raise DomainError(f"density degenerates at t <= 0; got t={t}")
    z = std_normal_quantile(alpha)
    return math.exp(-0.5 * z * z) / (t**H * _SQRT_2PI)


def true_quantile(t: float, alpha: float, H: float) -> float:
    """Level-alpha quantile of B(t): t^H z_alpha."""
    _check_hurst(H)
    if t < 0.0:
        raise DomainError(f"time must be nonnegative; got {t}")
    z = std_normal_quantile(alpha)
    return t**H * z


# ---------------------------------------------------------------------------
# fBm covariance
# ---------------------------------------------------------------------------

def fbm_covariance(s, t, H: float):
    """Covariance of fractional Brownian motion:

    E[B(s) B(t)] = (|s|^{2H} + |t|^{2H} - |s - t|^{2H}) / 2
    """
    _check_hurst(H)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    h2 = 2.0 * H
    out = 0.5 * (np.abs(s) ** h2 + np.abs(t) ** h2 - np.abs(s - t) ** h2)
    return float(out) if out.ndim == 0 else out


def fbm_correlation(s: float, t: float, H: float) -> float:
    """Correlation of (B(s), B(t)), i.e. the covariance over s^H t^H."""
    _check_hurst(H)
    if s <= 0.0 or t <= 0.0:
        raise DomainError(f"correlation needs s, t > 0; got s={s}, t={t}")
    if s == t:
        # exactly 1 only on the diagonal; avoids a rounding loss of ~1 ulp
        # that would otherwise dodge the comonotone branch downstream
        return 1.0
    r = fbm_covariance(s, t, H) / (s**H * t**H)
    # the exact value is within (-1, 1); guard rounding for downstream arcsin
    return min(1.0, max(-1.0, r))


# ---------------------------------------------------------------------------
# Bivariate normal
# ---------------------------------------------------------------------------

def _biv_integrand(theta: float, x: float, y: float) -> float:
    s = math.sin(theta)
    c2 = math.cos(theta) ** 2
    return math.exp(-(x * x - 2.0 * s * x * y + y * y) / (2.0 * c2))


def bivariate_normal_cdf(x: float, y: float, rho: float) -> float:
    """P{Z1 <= x, Z2 <= y} for standard normals with correlation rho.

    Computed by integrating the correlation derivative of the CDF from 0 to
    rho (the integrand at correlation r is the bivariate density at (x, y)),
    after substituting r = sin(theta) to remove the 1/sqrt(1-r^2) endpoint
    singularity:

        Phi2(x, y; rho) = Phi(x) Phi(y)
            + (1/2pi) * int_0^{arcsin rho} exp(-(x^2 - 2xy sin t + y^2)
                                               / (2 cos^2 t)) dt

    Absolute error is held below 1e-10 (in practice ~1e-14).  At rho = +-1
    the comonotone/antimonotone limits are returned.
    """
    if not -1.0 <= rho <= 1.0:
        raise DomainError(f"correlation must lie in [-1, 1]; got {rho}")
    if math.isnan(x) or math.isnan(y):
        raise DomainError("bivariate CDF arguments must not be NaN")
    if rho == 1.0:
        return float(min(ndtr(x), ndtr(y)))
    if rho == -1.0:
        return float(max(0.0, ndtr(x) + ndtr(y) - 1.0))
    # clamp extreme arguments; beyond |40| the marginal is 0/1 to full precision
    x = min(40.0, max(-40.0, x))
    y = min(40.0, max(-40.0, y))
    corr, _ = quad(_biv_integrand, 0.0, math.asin(rho), args=(x, y),
                   epsabs=1e-13, epsrel=1e-13, limit=200)
    val = float(ndtr(x)) * float(ndtr(y)) + corr / (2.0 * math.pi)
    return min(1.0, max(0.0, val))


# ---------------------------------------------------------------------------
# Limit kernels
# ---------------------------------------------------------------------------

def limit_kernel_G(s: float, x: float, t: float, y: float, H: float) -> float:
    """Covariance of the limiting empirical-process field:

    E[G(s,x) G(t,y)] = P{B(s) <= x, B(t) <= y} - F(s,x) F(t,y).
    """
    rho = fbm_correlation(s, t, H)
    joint = bivariate_normal_cdf(x / s**H, y / t**H, rho)
    return joint - float(marginal_cdf(s, x, H)) * float(marginal_cdf(t, y, H))


def quantile_kernel_K(t1: float, alpha1: float, t2: float, alpha2: float,
                      H: float, weighted: bool = False) -> float:
    """Covariance kernel of the limiting quantile field at quantile nodes:

        K = P{B(t1) <= t1^H z_{a1}, B(t2) <= t2^H z_{a2}} - a1 a2,

    optionally premultiplied by t1^H t2^H (the weighted form, defined and
    equal to 0 when either time vanishes).
    """
    _check_hurst(H)
    for a in (alpha1, alpha2):
        if not 0.0 < a < 1.0:
            raise DomainError(f"quantile level must lie in (0, 1); got {a}")
    if weighted and (t1 == 0.0 or t2 == 0.0):
        if t1 < 0.0 or t2 < 0.0:
            raise DomainError(f"times must be nonnegative; got {t1}, {t2}")
        return 0.0
    if t1 <= 0.0 or t2 <= 0.0:
        raise DomainError(f"unweighted kernel needs t1, t2 > 0; got {t1}, {t2}")
    rho = fbm_correlation(t1, t2, H)
    z1 = std_normal_quantile(alpha1)
    z2 = std_normal_quantile(alpha2)
    val = bivariate_normal_cdf(z1, z2, rho) - alpha1 * alpha2
    if weighted:
        val *= t1**H * t2**H
    return val


def swanson_kernel(t1: float, t2: float) -> float:
    """Covariance of the scaled-median limit of Brownian ensembles:

    sqrt(t1 t2) * arcsin( min(t1,t2) / sqrt(t1 t2) ); 0 if either time is 0.
    """
    if t1 < 0.0 or t2 < 0.0:
        raise DomainError(f"times must be nonnegative; got {t1}, {t2}")
    if t1 == 0.0 or t2 == 0.0:
        return 0.0
    g = math.sqrt(t1 * t2)
    return g * math.asin(min(t1, t2) / g)


# ---------------------------------------------------------------------------
# LIL constants and modulus gauge
# ---------------------------------------------------------------------------

def lil_constants(gamma: float, T: float, kappa: float) -> tuple[float, float]:
    """Normalizing constants for the iterated-logarithm traces.

    The sup-variance of the limit field over [gamma, T] x R is 1/4 for any
    window, and the t^kappa-weighted sup-variance over [0, T] x R is
    T^{2 kappa}/4; the returned values are their square roots
    (1/2, T^kappa / 2).
    """
    if not (0.0 < gamma <= 1.0 <= T):
        raise DomainError(f"window must satisfy 0 < gamma <= 1 <= T; got ({gamma}, {T})")
    if kappa <= 0.0:
        raise DomainError(f"kappa must be positive; got {kappa}")
    return 0.5, T**kappa / 2.0


def modulus_gauge(u, H: float):
    """Modulus-of-continuity gauge f_H(u) = u^H sqrt(max(1, log(1/u))).

    f_H(0) = 0 by continuous extension.
    """
    _check_hurst(H)
    u = np.asarray(u, dtype=float)
    if np.any(u < 0.0):
        raise DomainError("gauge argument must be nonnegative")
    with np.errstate(divide="ignore"):
        lg = np.where(u > 0.0, -np.log(np.where(u > 0.0, u, 1.0)), 0.0)
    out = np.where(u > 0.0, u**H * np.sqrt(np.maximum(1.0, lg)), 0.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Coupling-rate exponents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateExponents:
    """The seven strong-approximation rate exponents for a given (H, kappa)."""
    nu0: float
    H0: float
    tau1_0: float
    tau_of_alpha: float
    tau2: float
    tau1_prime: float
    tau_prime_of_alpha: float


def rate_exponents(H: float, kappa: float, alpha_cpl: float) -> RateExponents:
    """Exponent arithmetic of the two coupling rates.

    nu0 = 2 + 2/H, H0 = 1 + H, tau1(0) = 1/(2 + 5 nu0),
    tau(alpha) = (alpha tau1(0) - 1/2)/(1 + alpha),
    tau2 = (19 H + 25)/(24 H + 20),
    tau1'(kappa) = kappa/(5 H0 + kappa (2 + 5 nu0)),
    tau'(alpha) = (alpha tau1' - 1/2)/(1 + alpha).

    ``alpha_cpl`` must lie strictly inside both admissible windows
    (1/(2 tau1(0)), 1/tau1(0)) and (1/(2 tau1'), 1/tau1'), which makes both
    tau(alpha) and tau'(alpha) positive.
    """
    _check_hurst(H)
    if kappa <= 0.0:
        raise DomainError(f"kappa must be positive; got {kappa}")
    nu0 = 2.0 + 2.0 / H
    H0 = 1.0 + H
    tau1_0 = 1.0 / (2.0 + 5.0 * nu0)
    tau2 = (19.0 * H + 25.0) / (24.0 * H + 20.0)
    tau1_prime = kappa / (5.0 * H0 + kappa * (2.0 + 5.0 * nu0))
    for name, tau1 in (("tau1(0)", tau1_0), ("tau1'(kappa)", tau1_prime)):
        lo, hi = 1.0 / (2.0 * tau1), 1.0 / tau1
        if not lo < alpha_cpl < hi:
            raise DomainError(
                f"alpha_cpl={alpha_cpl} violates the window "
                f"1/(2*{name}) < alpha < 1/{name}, i.e. ({lo:.6g}, {hi:.6g})")
    tau_of_alpha = (alpha_cpl * tau1_0 - 0.5) / (1.0 + alpha_cpl)
    tau_prime_of_alpha = (alpha_cpl * tau1_prime - 0.5) / (1.0 + alpha_cpl)
    return RateExponents(nu0=nu0, H0=H0, tau1_0=tau1_0,
                         tau_of_alpha=tau_of_alpha, tau2=tau2,
                         tau1_prime=tau1_prime,
                         tau_prime_of_alpha=tau_prime_of_alpha)


# ---------------------------------------------------------------------------
# Window thresholds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Thresholds:
    """Sample-size-dependent window quantities gamma_n, a_n, eps_n."""
    n: int
    gamma_n: float
    a_n: float
    eps_n: float
    a_n_below_gamma_n: bool
    C: float
    c1: float
    delta: float
    eta: float


def thresholds(n: int, H: float, delta: float, eta: float,
               C: float = 1.0, c1: float = 1.0) -> Thresholds:
    """Window floor gamma_n = n^{-eta}, quantile-deviation floor
    a_n = C (loglog n / n)^{1/(2 delta)}, and oscillation scale
    eps_n = c1 gamma_n^{-H/2} (loglog n / n)^{1/4}.

    Flags whether a_n < gamma_n, which holds for all large n whenever
    eta < 1/(2H) >= 1/(2 delta) ... i.e. for every valid configuration.
    """
    _check_hurst(H)
    if n < 16:
        raise DomainError(f"need n >= 16 so that loglog n > 0; got {n}")
    if not 0.0 < delta <= H:
        raise DomainError(f"delta must satisfy 0 < delta <= H={H}; got {delta}")
    if not 0.0 <= eta < 1.0 / (2.0 * H):
        raise DomainError(
            f"eta must satisfy 0 <= eta < 1/(2H) = {1.0 / (2.0 * H):.6g}; got {eta}")
    if C <= 0.0 or c1 <= 0.0:
        raise DomainError(f"constants C, c1 must be positive; got C={C}, c1={c1}")
    lln = math.log(math.log(n))
    gamma_n = float(n) ** (-eta)
    a_n = C * (lln / n) ** (1.0 / (2.0 * delta))
    eps_n = c1 * gamma_n ** (-H / 2.0) * (lln / n) ** 0.25
    return Thresholds(n=n, gamma_n=gamma_n, a_n=a_n, eps_n=eps_n,
                      a_n_below_gamma_n=bool(a_n < gamma_n),
                      C=C, c1=c1, delta=delta, eta=eta)


# ---------------------------------------------------------------------------
# Kernel evaluation records (CLI surface)
# ---------------------------------------------------------------------------

KERNEL_KINDS = ("G", "K", "weightedK", "swanson")


@dataclass(frozen=True)
class KernelEval:
    """One evaluated kernel node, as printed by the CLI kernel command."""
    kind: str
    t1: float
    a1: float | None
    t2: float
    a2: float | None
    value: float


def kernel_eval(kind: str, t1: float, a1: float | None, t2: float,
                a2: float | None, H: float = 0.5,
                kappa: float | None = None) -> KernelEval:
    """Dispatch a kernel evaluation by kind.

    ``G`` takes space arguments (a1, a2 are x-levels), ``K``/``weightedK``
    take quantile levels, ``swanson`` takes times only.  For kind ``G`` an
    optional kappa multiplies by the weight (t1 t2)^kappa used by the
    weighted iterated-logarithm normalization.
    """
    if kind == "G":
        if a1 is None or a2 is None:
            raise DomainError("kind G requires x-levels for both nodes")
        val = limit_kernel_G(t1, a1, t2, a2, H)
        if kappa is not None:
            val *= (t1 * t2) ** kappa
    elif kind in ("K", "weightedK"):
        if a1 is None or a2 is None:
            raise DomainError(f"kind {kind} requires quantile levels for both nodes")
        val = quantile_kernel_K(t1, a1, t2, a2, H, weighted=(kind == "weightedK"))
    elif kind == "swanson":
        val = swanson_kernel(t1, t2)
    else:
        raise DomainError(f"unknown kernel kind {kind!r}; expected one of {KERNEL_KINDS}")
    return KernelEval(kind=kind, t1=t1, a1=a1, t2=t2, a2=a2, value=val)
