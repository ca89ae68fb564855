"""Self-contained special functions for the chi-square intensity model.

Everything here is implemented from scratch (series, continued fractions,
safeguarded root finding, exponentially convergent quadrature) so that no
external math library defines the numerical behaviour of the package. The
test suite checks each routine against independent oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConvergenceError, DomainError

_SQRT_PI = math.sqrt(math.pi)
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_EULER_GAMMA = 0.5772156649015328606


@dataclass(frozen=True)
class GaussParams:
    """Additive Gaussian noise with standard deviation ``sigma > 0``."""

    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0.0) or math.isinf(self.sigma):
            raise DomainError(f"sigma must be a positive finite real, got {self.sigma}")


def _erf_series(x: float) -> float:
    # Non-alternating expansion erf(x) = 2/sqrt(pi) e^{-x^2} sum 2^n x^{2n+1} / (2n+1)!!;
    # every term is positive, so there is no cancellation for moderate x.
    t = x
    acc = x
    x2 = x * x
    n = 0
    while True:
        n += 1
        t *= 2.0 * x2 / (2.0 * n + 1.0)
        acc += t
        if t < acc * 1e-18 or n > 200:
            break
    return (2.0 / _SQRT_PI) * math.exp(-x2) * acc


def _erfc_cf(x: float) -> float:
    # Continued fraction sqrt(pi) e^{x^2} erfc(x) = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    # evaluated with the modified Lentz algorithm; accurate for x >= 3.
    tiny = 1e-300
    f = x if x != 0.0 else tiny
    c = f
    d = 0.0
    for n in range(1, 300):
        a = 0.5 * n
        d = x + a * d
        if d == 0.0:
            d = tiny
        c = x + a / c
        if c == 0.0:
            c = tiny
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-17:
            break
    return math.exp(-x * x) / (_SQRT_PI * f)


def erf(x: float) -> float:
    """Error function, odd in ``x``, with absolute error below 1e-12."""
    if math.isnan(x):
        return math.nan
    ax = abs(x)
    if ax < 3.0:
        val = _erf_series(ax)
    else:
        val = 1.0 - _erfc_cf(ax)
    return math.copysign(val, x)


def erfc(x: float) -> float:
    """Complementary error function with good relative accuracy in the tail."""
    if math.isnan(x):
        return math.nan
    if x >= 3.0:
        return _erfc_cf(x)
    if x >= 0.0:
        return 1.0 - _erf_series(x)
    return 2.0 - erfc(-x)


def chi2_1_cdf(b: float) -> float:
    """C.d.f. of the squared standard normal at ``b >= 0``.

    Equals the normalized lower incomplete gamma value for shape 1/2,
    i.e. erf(sqrt(b/2)).
    """
    if math.isnan(b) or b < 0.0:
        raise DomainError(f"chi2_1_cdf requires b >= 0, got {b}")
    return erf(math.sqrt(0.5 * b))


def chi2_1_pdf(b: float) -> float:
    """Density of the squared standard normal at ``b > 0``."""
    if b <= 0.0:
        return 0.0
    return math.exp(-0.5 * b) / (_SQRT_2PI * math.sqrt(b))


def chi2_1_inv_cdf(p: float) -> float:
    """Quantile of the squared standard normal for ``p in [0, 1)``.

    Safeguarded Newton iteration on :func:`chi2_1_cdf`: the bracket is kept
    valid at every step and the iteration falls back to bisection whenever a
    Newton step leaves it. The result satisfies |cdf(x) - p| <= 1e-12.
    """
    if math.isnan(p) or p < 0.0 or p >= 1.0:
        raise DomainError(f"chi2_1_inv_cdf requires p in [0, 1), got {p}")
    if p == 0.0:
        return 0.0
    lo, hi = 0.0, 50.0
    while chi2_1_cdf(hi) < p:
        hi *= 2.0
        if hi > 1e9:  # p is representable below 1, so this cannot trigger
            raise ConvergenceError("failed to bracket the chi-square quantile")
    x = p * p * 0.5 * math.pi  # small-b inversion of cdf ~ sqrt(2 b / pi)
    if not (lo < x < hi):
        x = 0.5 * (lo + hi)
    for _ in range(200):
        f = chi2_1_cdf(x) - p
        if abs(f) <= 1e-14:
            break
        if f > 0.0:
            hi = x
        else:
            lo = x
        d = chi2_1_pdf(x)
        step_ok = d > 0.0
        if step_ok:
            x_new = x - f / d
            step_ok = lo < x_new < hi
        if not step_ok:
            x_new = 0.5 * (lo + hi)
        if x_new == x:
            break
        x = x_new
    return x


def _bessel_k0_series(x: float) -> float:
    # K0(x) = -(ln(x/2) + gamma) I0(x) + sum_{k>=1} H_k (x^2/4)^k / (k!)^2, x <= 2.
    q = 0.25 * x * x
    term = 1.0
    i0 = 1.0
    correction = 0.0
    hk = 0.0
    for k in range(1, 60):
        term *= q / (k * k)
        hk += 1.0 / k
        i0 += term
        correction += term * hk
        if term < 1e-18:
            break
    return -(math.log(0.5 * x) + _EULER_GAMMA) * i0 + correction


def _bessel_k0_quadrature(x: float) -> float:
    # Trapezoid rule on int_0^inf exp(-x cosh t) dt. The integrand decays
    # double-exponentially, so a fixed step converges spectrally fast.
    h = 0.15
    upper = math.acosh(746.0 / x) + 2.0 * h  # beyond this exp underflows to 0
    acc = 0.5 * math.exp(-x)  # t = 0 endpoint carries half weight
    t = h
    while t <= upper:
        acc += math.exp(-x * math.cosh(t))
        t += h
    return acc * h


def bessel_k0(x: float) -> float:
    """Modified Bessel function of the second kind, order zero, for ``x > 0``.

    Power series with the log term below x = 2, exponentially convergent
    quadrature of the cosh integral representation above.
    """
    if math.isnan(x) or x <= 0.0:
        raise DomainError(f"bessel_k0 requires x > 0, got {x}")
    if x <= 2.0:
        return _bessel_k0_series(x)
    return _bessel_k0_quadrature(x)


def gauss_cdf_family(z: float, g: GaussParams) -> tuple[float, float, float]:
    """C.d.f., density and density derivative of N(0, sigma^2) at ``z``.

    Returns the triple (Phi, Phi', Phi'') used when assembling Fisher
    information for noisy quantized measurements; Phi'' = -(z/sigma^2) Phi'.
    """
    sigma = g.sigma
    if math.isinf(z):
        return (0.0 if z < 0 else 1.0), 0.0, 0.0
    u = z / sigma
    cdf = 0.5 * (1.0 + erf(u / math.sqrt(2.0)))
    pdf = math.exp(-0.5 * u * u) / (sigma * _SQRT_2PI)
    return cdf, pdf, -(z / (sigma * sigma)) * pdf


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-10, max_depth: int = 50) -> float:
    """Adaptive Simpson quadrature of ``f`` on [a, b] to absolute tolerance."""

    def simpson(lo, hi, flo, fmid, fhi):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    def recurse(lo, hi, flo, fmid, fhi, whole, eps, depth):
        mid = 0.5 * (lo + hi)
        lmid = 0.5 * (lo + mid)
        rmid = 0.5 * (mid + hi)
        flmid = f(lmid)
        frmid = f(rmid)
        left = simpson(lo, mid, flo, flmid, fmid)
        right = simpson(mid, hi, fmid, frmid, fhi)
        if depth >= max_depth or abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        half = 0.5 * eps
        return recurse(lo, mid, flo, flmid, fmid, left, half, depth + 1) + recurse(
            mid, hi, fmid, frmid, fhi, right, half, depth + 1
        )

    if a == b:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    return recurse(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, 0)
