"""Chi-square quantiles from the regularized incomplete gamma function.

Series and continued-fraction evaluation of ``P(a, x)`` following the
classic Numerical Recipes scheme, inverted by safeguarded Newton steps.
"""

from __future__ import annotations

import math

from .errors import InvalidInputError

_EPS = 1e-15
_TINY = 1e-300


def _gser(a: float, x: float) -> float:
    # lower regularized gamma by its power series, good for x < a + 1
    ap = a
    term = total = 1.0 / a
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gcf(a: float, x: float) -> float:
    # upper regularized gamma by Lentz's continued fraction, good for x >= a + 1
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
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


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma ``P(a, x)``."""
    if a <= 0 or x < 0:
        raise InvalidInputError("need a > 0 and x >= 0")
    if x == 0:
        return 0.0
    return _gser(a, x) if x < a + 1.0 else 1.0 - _gcf(a, x)


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma ``Q(a, x) = 1 - P(a, x)``."""
    if a <= 0 or x < 0:
        raise InvalidInputError("need a > 0 and x >= 0")
    if x == 0:
        return 1.0
    return 1.0 - _gser(a, x) if x < a + 1.0 else _gcf(a, x)


def chi2_sf(x: float, df: float) -> float:
    return gammainc_upper(df / 2.0, x / 2.0) if x > 0 else 1.0


def chi2_upper_quantile(alpha: float, df: float, tol: float = 1e-10) -> float:
    """``c`` with ``P(chi2_df > c) = alpha``.

    Newton iteration on ``log Q`` from a Wilson-Hilferty start, falling back
    to bisection whenever a step leaves the current bracket.
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    if df <= 0:
        raise InvalidInputError("degrees of freedom must be positive")
    a = df / 2.0
    target = math.log(alpha)

    def f(x):  # decreasing in x
        return math.log(max(chi2_sf(x, df), _TINY)) - target

    z = _normal_upper_quantile(alpha)
    h = 2.0 / (9.0 * df)
    x = max(df * (1.0 - h + z * math.sqrt(h)) ** 3, 1e-8)
    lo, hi = 0.0, max(2.0 * x, df + 10.0)
    while f(hi) > 0:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        fx = f(x)
        if fx > 0:
            lo = max(lo, x)
        else:
            hi = min(hi, x)
        # d/dx log Q = -density / Q
        log_dens = (a - 1.0) * math.log(x / 2.0) - x / 2.0 - math.lgamma(a) - math.log(2.0)
        slope = -math.exp(log_dens) / max(chi2_sf(x, df), _TINY)
        step = fx / slope if slope != 0 else math.inf
        new = x - step
        if not lo < new < hi:
            new = 0.5 * (lo + hi)
        if abs(new - x) <= tol * x:
            return new
        x = new
    return x


def _normal_upper_quantile(p: float) -> float:
    # Acklam's rational approximation; only seeds the Newton iteration
    q = 1.0 - p
    a = [-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
         1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00]
    b = [-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
         6.680131188771972e01, -1.328068155288572e01]
    c = [-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
         -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00]
    d = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00, 3.754408661907416e00]
    if q < 0.02425:
        r = math.sqrt(-2 * math.log(q))
        return (((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) / \
            ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1)
    if q > 1 - 0.02425:
        r = math.sqrt(-2 * math.log(1 - q))
        return -(((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) / \
            ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1)
    r = q - 0.5
    s = r * r
    return (((((a[0] * s + a[1]) * s + a[2]) * s + a[3]) * s + a[4]) * s + a[5]) * r / \
        (((((b[0] * s + b[1]) * s + b[2]) * s + b[3]) * s + b[4]) * s + 1)
