"""Black pricing (forward form) and implied-volatility inversion.

Both market conventions run through the same formulas: underlier options
are quoted against the index forward, volatility-index options against
the volatility-index future.  The market tag on a slice decides which
forward is passed in; there is no separate "spot" convention anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .market_data import Kind
from .special import norm_cdf, norm_pdf

__all__ = ["BsInputs", "BandViolationError", "bs_price", "bs_vega", "implied_vol"]

VOL_TOL = 1e-12
MAX_ITER = 200


class BandViolationError(ValueError):
    """Price outside the static no-arbitrage band [lower, upper]."""

    def __init__(self, price, lower, upper, kind):
        self.price = price
        self.lower = lower
        self.upper = upper
        super().__init__(
            f"{kind.value} price {price} outside static band [{lower:.12g}, {upper:.12g}]"
        )


@dataclass(frozen=True)
class BsInputs:
    """Forward-form pricing inputs for one option."""

    forward: float
    strike: float
    vol: float
    ttm: float
    discount: float = 1.0

    def __post_init__(self):
        if not self.forward > 0:
            raise ValueError(f"forward must be positive, got {self.forward}")
        if not self.strike > 0:
            raise ValueError(f"strike must be positive, got {self.strike}")
        if self.vol < 0:
            raise ValueError(f"vol must be >= 0, got {self.vol}")
        if not self.ttm > 0:
            raise ValueError(f"ttm must be positive, got {self.ttm}")
        if not 0 < self.discount <= 1:
            raise ValueError(f"discount must lie in (0, 1], got {self.discount}")


def bs_price(inputs: BsInputs, kind: Kind) -> float:
    """Discounted Black price.

    Satisfies put-call parity ``call - put = discount * (forward -
    strike)`` exactly; the zero-vol limit is the discounted intrinsic.
    """
    f, k, vol, ttm, b = (
        inputs.forward, inputs.strike, inputs.vol, inputs.ttm, inputs.discount,
    )
    stdev = vol * math.sqrt(ttm)
    if stdev <= 0:
        intrinsic = max(f - k, 0.0) if kind is Kind.CALL else max(k - f, 0.0)
        return b * intrinsic
    d_plus = math.log(f / k) / stdev + 0.5 * stdev
    d_minus = d_plus - stdev
    if kind is Kind.CALL:
        return b * (norm_cdf(d_plus) * f - norm_cdf(d_minus) * k)
    return b * (norm_cdf(-d_minus) * k - norm_cdf(-d_plus) * f)


def bs_vega(inputs: BsInputs) -> float:
    """d price / d vol (discounted)."""
    f, k, vol, ttm, b = (
        inputs.forward, inputs.strike, inputs.vol, inputs.ttm, inputs.discount,
    )
    stdev = vol * math.sqrt(ttm)
    if stdev <= 0:
        return 0.0
    d_plus = math.log(f / k) / stdev + 0.5 * stdev
    return b * f * norm_pdf(d_plus) * math.sqrt(ttm)


def implied_vol(price: float, forward: float, strike: float, ttm: float,
                discount: float = 1.0, kind: Kind = Kind.CALL) -> float:
    """Invert the Black formula for the unique non-negative volatility.

    Bracketed bisection refined with a Newton step where vega allows,
    1e-12 vol tolerance, 200-iteration cap.  Robust at the extreme
    strikes this library lives at, where Newton alone stalls on flat
    vega.

    Returns 0.0 at the intrinsic edge and ``math.inf`` at the upper
    bound; raises :class:`BandViolationError` outside the band.
    """
    if kind is Kind.CALL:
        lower = discount * max(forward - strike, 0.0)
        upper = discount * forward
    else:
        lower = discount * max(strike - forward, 0.0)
        upper = discount * strike
    scale = discount * max(forward, strike)
    edge_tol = 1e-14 * scale

    if price < lower - edge_tol or price > upper + edge_tol:
        raise BandViolationError(price, lower, upper, kind)
    if price <= lower + edge_tol:
        return 0.0
    if price >= upper - edge_tol:
        return math.inf

    def value(vol):
        return bs_price(BsInputs(forward, strike, vol, ttm, discount), kind)

    lo, hi = 0.0, 1.0
    while value(hi) < price:
        hi *= 2.0
        if hi > 1e6:
            return math.inf

    x = 0.5 * (lo + hi)
    for _ in range(MAX_ITER):
        f_x = value(x) - price
        if f_x > 0:
            hi = x
        else:
            lo = x
        if hi - lo < VOL_TOL:
            break
        vega = bs_vega(BsInputs(forward, strike, x, ttm, discount))
        step_ok = vega > 1e-18 * scale
        if step_ok:
            x_new = x - f_x / vega
            step_ok = lo < x_new < hi
        if not step_ok:
            x_new = 0.5 * (lo + hi)
        x = x_new
    return 0.5 * (lo + hi)
