"""Special functions needed by the statistical tests.

Everything here is scalar and double precision.  ``math.erfc`` and
``math.lgamma`` from the standard library are the only primitives used.
"""

import math

from .errors import DomainError

SQRT2 = math.sqrt(2.0)
_TWO_OVER_SQRTPI = 2.0 / math.sqrt(math.pi)
_EPS = 2.220446049250313e-16
_TINY = 1e-300

# Acklam's rational approximation to the standard normal quantile
# (relative error < 1.2e-9); only used as a starting point for Halley steps.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _ndtri_approx(p):
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    if p > 1.0 - _P_LOW:
        return -_ndtri_approx(1.0 - p)
    q = p - 0.5
    r = q * q
    return ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
            / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))


def erfcinv(y):
    """Inverse complementary error function on ``(0, 2)``.

    A rational starting guess is polished with Halley iterations on
    ``erfc(x) - y`` until the step falls below machine precision.
    """
    y = float(y)
    if not 0.0 < y < 2.0:
        raise DomainError(f"erfcinv requires 0 < y < 2, got {y!r}")
    if y == 1.0:
        return 0.0
    if y > 1.0:
        # 2 - y is exact here (Sterbenz)
        return -erfcinv(2.0 - y)
    x = -_ndtri_approx(0.5 * y) / SQRT2
    for _ in range(100):
        f = math.erfc(x) - y
        fprime = -_TWO_OVER_SQRTPI * math.exp(-x * x)
        if fprime == 0.0:
            break
        u = f / fprime
        step = u / (1.0 + x * u)
        x -= step
        if abs(step) <= 4.0 * _EPS * abs(x):
            break
    return x


def ndtri(p):
    """Standard normal quantile function."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"ndtri requires 0 < p < 1, got {p!r}")
    return -SQRT2 * erfcinv(2.0 * p)


def norm_sf(z):
    """Standard normal survival function ``P(Z > z)``."""
    return 0.5 * math.erfc(z / SQRT2)


def _gamma_series(a, x):
    # lower regularized gamma P(a, x), valid for x < a + 1
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(10000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_contfrac(a, x):
    # upper regularized gamma Q(a, x) by modified Lentz, valid for x >= a + 1
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammainc_upper(a, x):
    """Regularized upper incomplete gamma function ``Q(a, x)``."""
    if a <= 0.0:
        raise DomainError(f"shape must be positive, got {a!r}")
    if x < 0.0:
        raise DomainError(f"x must be non-negative, got {x!r}")
    if x == 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _gamma_series(a, x))
    return _gamma_contfrac(a, x)


def gammainc_lower(a, x):
    """Regularized lower incomplete gamma function ``P(a, x)``."""
    if x < 0.0:
        raise DomainError(f"x must be non-negative, got {x!r}")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return min(1.0, _gamma_series(a, x))
    return 1.0 - _gamma_contfrac(a, x)


def chi2_sf(x, dof):
    """Survival function of the chi-squared distribution with ``dof`` degrees of freedom."""
    x = float(x)
    if dof <= 0:
        raise DomainError(f"degrees of freedom must be positive, got {dof!r}")
    if x < 0.0 or math.isnan(x):
        raise DomainError(f"chi2_sf requires x >= 0, got {x!r}")
    return gammainc_upper(0.5 * dof, 0.5 * x)


def kolmogorov_sf(lam):
    """``P(K > lam)`` for the limiting Kolmogorov distribution."""
    if lam <= 0.0:
        return 1.0
    if lam < 1.18:
        # Jacobi-transformed series converges fast for small arguments
        k = math.pi * math.pi / (8.0 * lam * lam)
        total = 0.0
        for j in range(1, 40, 2):
            term = math.exp(-j * j * k)
            total += term
            if term < _EPS * total:
                break
        cdf = math.sqrt(2.0 * math.pi) / lam * total
        return min(1.0, max(0.0, 1.0 - cdf))
    total = 0.0
    sign = 1.0
    for j in range(1, 100):
        term = math.exp(-2.0 * j * j * lam * lam)
        total += sign * term
        if term < _EPS * abs(total):
            break
        sign = -sign
    return min(1.0, max(0.0, 2.0 * total))
