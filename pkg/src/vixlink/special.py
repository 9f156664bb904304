"""Special-function kernel.

Thin, well-tested surface over scipy.special; the rest of the library
goes through these names only.  A log-scaled Bessel variant is provided
because the square-root-diffusion transition density underflows in raw
form at realistic non-centrality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

__all__ = [
    "Accuracy",
    "DEFAULT_ACCURACY",
    "norm_cdf",
    "norm_pdf",
    "bessel_i",
    "log_bessel_i",
    "hyp1f1",
    "dawson",
    "expint_ei",
    "ln_gamma",
]


@dataclass(frozen=True)
class Accuracy:
    """Tolerance bundle for iterative/quadrature evaluations."""

    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_terms: int = 500

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")


DEFAULT_ACCURACY = Accuracy()


def norm_cdf(x):
    """Standard normal CDF; exact complement symmetry via ndtr."""
    return _sp.ndtr(x)


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return out if out.ndim else float(out)


def bessel_i(order: float, x):
    """Modified Bessel function of the first kind I_order(x).

    Raises OverflowError for arguments where the raw value overflows;
    callers needing the far tail use :func:`log_bessel_i`.
    """
    if order < 0:
        raise ValueError(f"order must be >= 0, got {order}")
    out = _sp.iv(order, x)
    if np.any(~np.isfinite(out) & np.isfinite(x)):
        raise OverflowError(
            f"bessel_i({order}, x) overflows for x of size {np.max(x):g}; "
            "use log_bessel_i"
        )
    return out


def log_bessel_i(order: float, x):
    """log I_order(x) for x >= 0, stable for very large x.

    Uses the exponentially scaled Bessel function; falls back to the
    leading series term (x/2)^order / Gamma(order+1) when even the scaled
    value underflows near zero.
    """
    if order < 0:
        raise ValueError(f"order must be >= 0, got {order}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("log_bessel_i requires x >= 0")
    scaled = _sp.ive(order, x)
    with np.errstate(divide="ignore"):
        out = np.log(scaled) + x
    tiny = ~(scaled > 0)
    if np.any(tiny):
        xt = np.where(tiny, x, 1.0)
        series = order * np.log(xt / 2.0) - _sp.gammaln(order + 1.0)
        out = np.where(tiny, series, out)
    return out if out.ndim else float(out)


def hyp1f1(a: float, b: float, x):
    """Confluent hypergeometric function 1F1(a, b, x)."""
    if b <= 0 and b == int(b):
        raise ValueError(f"b must not be a non-positive integer, got {b}")
    out = _sp.hyp1f1(a, b, x)
    if np.any(np.isnan(out)):
        raise ArithmeticError(f"hyp1f1({a}, {b}, x) failed to converge")
    return out


def dawson(x):
    """Dawson integral D+(x) = exp(-x^2) * int_0^x exp(u^2) du (odd)."""
    return _sp.dawsn(x)


def expint_ei(x):
    """Exponential integral Ei(x); pole at zero."""
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise ValueError("Ei has a pole at x = 0")
    out = _sp.expi(x)
    return out if out.ndim else float(out)


def ln_gamma(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("ln_gamma requires x > 0")
    out = _sp.gammaln(x)
    return out if out.ndim else float(out)
