"""Extreme-strike tail machinery.

Links the slope of squared implied volatility at extreme strikes to
moment explosions of the underlier, checks the Holder inequality tying
the vol-index MGF strip to the two underlier power strips, and emits a
static arbitrage portfolio when quoted prices violate it.

Slope conventions: ``beta`` is the (limsup) ratio of squared implied vol
to ``|log(K/F)| / (T - t)``, clamped to [0, 2].  Finite data only ever
produces lower bounds on the limsup; both the single-extreme-quote bound
and a k-point regression are provided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import svi as _svi
from .black_scholes import implied_vol
from .market_data import Kind, Market, OptionSlice
from .strips import (
    DEFAULT_CONFIG,
    PortfolioTriple,
    StripConfig,
    StripResult,
    _build_curve,
    mgf_claim_vix_strip,
    power_claim_call_strip,
    power_claim_put_strip,
)

__all__ = [
    "TailSlope",
    "MomentBounds",
    "TailReport",
    "InequalityResult",
    "TradeLeg",
    "TradeList",
    "beta_from_slice",
    "beta_to_moment",
    "moment_to_beta",
    "check_mgf_inequality",
    "arbitrage_portfolio_on_violation",
    "implied_vol_lower_bounds",
    "build_tail_report",
]


@dataclass(frozen=True)
class TailSlope:
    side: str                 # "left" or "right"
    beta: float               # in [0, 2]
    estimator: str            # "extreme_quote" or "regression"
    moneyness_cut: float

    def __post_init__(self):
        if not 0.0 <= self.beta <= 2.0:
            raise ValueError(f"beta must lie in [0, 2], got {self.beta}")


@dataclass(frozen=True)
class MomentBounds:
    """Supremum orders of finite moments implied by tail slopes."""

    q_tilde: float
    p_tilde: float
    xi_tilde: float


@dataclass(frozen=True)
class TailReport:
    beta_L: float
    beta_R: float
    beta_R_vix: float
    q_tilde: float
    p_tilde: float
    xi_tilde: float           # lower bound tau * q_tilde / 4
    gpd_alpha: float | None
    inequality_margin: float
    xi: float
    p: float
    q: float
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "beta_L": self.beta_L,
            "beta_R": self.beta_R,
            "beta_R_vix": self.beta_R_vix,
            "q_tilde": self.q_tilde,
            "p_tilde": self.p_tilde,
            "xi_tilde": self.xi_tilde,
            "gpd_alpha": self.gpd_alpha,
            "inequality_margin": self.inequality_margin,
            "xi": self.xi, "p": self.p, "q": self.q,
            "flags": list(self.flags),
        }


def _side_quotes(slc: OptionSlice, side: str, cut: float):
    fwd = slc.forward
    if side == "left":
        sel = [q for q in slc.quotes
               if q.kind is Kind.PUT and math.log(q.strike / fwd) <= -abs(cut)]
        sel.sort(key=lambda q: q.strike)          # most extreme first
    elif side == "right":
        sel = [q for q in slc.quotes
               if q.kind is Kind.CALL and math.log(q.strike / fwd) >= abs(cut)]
        sel.sort(key=lambda q: -q.strike)
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return sel


def beta_from_slice(slc: OptionSlice, side: str, cut: float = 0.0,
                    estimator: str = "extreme_quote", npts: int = 5,
                    price: str = "mid") -> TailSlope:
    """Estimate the extreme-strike slope of squared implied volatility.

    ``extreme_quote`` evaluates ``vol^2 * (T-t) / |log(K/F)|`` at the
    single most extreme quoted strike beyond the moneyness cut -- a lower
    bound on the limsup, which is all finite data provides.
    ``regression`` fits the ``npts`` most extreme total variances against
    absolute log-moneyness instead.  Both clamp to [0, 2].

    ``price`` selects mid (default), bid, or ask quotes.
    """
    if estimator not in ("extreme_quote", "regression"):
        raise ValueError(f"unknown estimator {estimator!r}")
    if price not in ("mid", "bid", "ask"):
        raise ValueError(f"price must be mid/bid/ask, got {price!r}")
    quotes = _side_quotes(slc, side, cut)
    if len(quotes) < 2:
        raise ValueError(
            f"insufficient extreme quotes: need >= 2 beyond |log K/F| >= {cut}, "
            f"got {len(quotes)}"
        )

    def quote_price(q):
        if price == "bid" and q.bid is not None:
            return q.bid
        if price == "ask" and q.ask is not None:
            return q.ask
        return q.price

    def total_var(q):
        vol = implied_vol(quote_price(q), slc.forward, q.strike, slc.ttm,
                          slc.discount, q.kind)
        return vol * vol * slc.ttm

    if estimator == "extreme_quote":
        q0 = quotes[0]
        beta = total_var(q0) / abs(math.log(q0.strike / slc.forward))
    else:
        pts = quotes[:npts]
        x = np.array([abs(math.log(q.strike / slc.forward)) for q in pts])
        y = np.array([total_var(q) for q in pts])
        if np.ptp(x) <= 0:
            raise ValueError("degenerate strikes for regression estimator")
        beta = float(np.polyfit(x, y, 1)[0])
    beta = min(max(beta, 0.0), 2.0)
    return TailSlope(side=side, beta=beta, estimator=estimator, moneyness_cut=cut)


def beta_to_moment(beta: float) -> float:
    """Map a tail slope in [0, 2] to the supremum finite moment order.

    ``m = 1/(2 beta) + beta/8 - 1/2`` with the convention ``1/0 = inf``:
    beta = 0 means every moment is finite, beta = 2 means none beyond
    order zero.
    """
    if not 0.0 <= beta <= 2.0:
        raise ValueError(f"beta must lie in [0, 2], got {beta}")
    if beta == 0.0:
        return math.inf
    return 1.0 / (2.0 * beta) + beta / 8.0 - 0.5


def moment_to_beta(m: float) -> float:
    """Inverse of :func:`beta_to_moment`: ``2 - 4 (sqrt(m^2 + m) - m)``."""
    if m < 0:
        raise ValueError(f"moment order must be >= 0, got {m}")
    if math.isinf(m):
        return 0.0
    return 2.0 - 4.0 * (math.sqrt(m * m + m) - m)


def implied_vol_lower_bounds(xi_tilde: float, tau: float, side: str) -> float:
    """Slope lower bound implied by a finite MGF radius of the squared index.

    With ``x = 4 xi_tilde / tau``: the left-tail bound is
    ``2 - 4 (sqrt(x^2 + x) - x)`` and the right-tail bound is
    ``-2 - 4 (sqrt(x^2 - x) - x)``; the latter requires ``x >= 1``.
    """
    if not math.isfinite(xi_tilde) or xi_tilde < 0:
        raise ValueError(f"xi_tilde must be finite and >= 0, got {xi_tilde}")
    x = 4.0 * xi_tilde / tau
    if side == "left":
        bound = 2.0 - 4.0 * (math.sqrt(x * x + x) - x)
    elif side == "right":
        if x < 1.0:
            raise ValueError(
                f"right-tail bound requires 4*xi_tilde/tau >= 1, got {x:.6g}"
            )
        bound = -2.0 - 4.0 * (math.sqrt(x * x - x) - x)
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return min(max(bound, 0.0), 2.0)


# ---------------------------------------------------------------------------
# the inequality check and its arbitrage portfolio
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InequalityResult:
    triple: PortfolioTriple
    margin: float
    pi1: StripResult
    pi2: StripResult
    pi3: StripResult
    tau: float
    diagnostics: dict = field(default_factory=dict)


def check_mgf_inequality(spx_T: OptionSlice, spx_Ttau: OptionSlice,
                         vix_slice: OptionSlice, xi: float, p: float,
                         config: StripConfig = DEFAULT_CONFIG) -> InequalityResult:
    """Value the three portfolios and the no-arbitrage margin.

    margin = pi1 + pi2 - pi3 must be strictly positive on consistent
    data whenever the later-dated price is genuinely random.  Strip
    divergence propagates as an infinite margin with diagnostics rather
    than an exception.
    """
    if p <= 1:
        raise ValueError(f"p must exceed 1, got {p}")
    q = p / (p - 1.0)
    tau = spx_Ttau.expiry - spx_T.expiry
    if tau <= 0:
        raise ValueError("later slice must expire after the earlier slice")
    if abs(vix_slice.expiry - spx_T.expiry) > 1e-8:
        raise ValueError("vol-index options must expire with the earlier slice")
    pi1 = power_claim_put_strip(spx_Ttau, xi, q, tau, config)
    pi2 = power_claim_call_strip(spx_T, xi, p, tau, config)
    pi3 = mgf_claim_vix_strip(vix_slice, xi, config)
    margin = pi1.value + pi2.value - pi3.value
    if math.isnan(margin):
        # both sides diverged: the bound holds as inf <= inf, no violation
        margin = math.inf
    triple = PortfolioTriple(pi1=pi1.value, pi2=pi2.value, pi3=pi3.value,
                             xi=xi, p=p, q=q)
    diag = {
        "divergent_legs": [name for name, r in
                           (("pi1", pi1), ("pi2", pi2), ("pi3", pi3))
                           if r.divergent],
        "error_bound": pi1.error_bound + pi2.error_bound + pi3.error_bound,
    }
    return InequalityResult(triple=triple, margin=margin, pi1=pi1, pi2=pi2,
                            pi3=pi3, tau=tau, diagnostics=diag)


@dataclass(frozen=True)
class TradeLeg:
    instrument: str           # put/call/vix_call/bond/underlier_claim
    market: str
    expiry: float
    strike: float | None
    quantity: float
    unit_price: float

    @property
    def value(self) -> float:
        return self.quantity * self.unit_price


@dataclass(frozen=True)
class TradeList:
    legs: tuple[TradeLeg, ...]
    entry_cash_flow: float    # cash received at entry, >= 0 on violation
    variant: str
    diagnostics: dict = field(default_factory=dict)


def arbitrage_portfolio_on_violation(
        result: InequalityResult, spx_T: OptionSlice, spx_Ttau: OptionSlice,
        vix_slice: OptionSlice, config: StripConfig = DEFAULT_CONFIG,
        log_contract_claim_value: float | None = None) -> TradeList:
    """Build the static trade list exploiting a reversed inequality.

    Long the put strip and the call strip, short the exponential-claim
    strip and one bond (its constant leg); deep-wing strip tails appear
    as bond and underlier-claim positions.  The entry cash flow equals
    minus the margin and is non-negative by the violation.

    When a leg-level valuation of the intermediate power claim on the
    later price is supplied, the mispriced construction is identified:
    ``variant`` reports whether the exponential claim leg, the Young
    (power-split) leg, or both are out of line.

    Raises
    ------
    ValueError
        If called with a positive margin -- there is nothing to exploit.
    """
    if result.margin > 0:
        raise ValueError(
            f"margin {result.margin:.6g} is positive; no violation to exploit"
        )
    legs: list[TradeLeg] = []

    # pi1: long puts at T + tau
    k1, p1, _ = _build_curve(spx_Ttau, Kind.PUT, config)
    price1 = dict(zip(k1, p1))
    if result.pi1.weights is not None:
        for k, w in zip(result.pi1.weights.strikes, result.pi1.weights.weights):
            legs.append(TradeLeg("put", spx_Ttau.market.value, spx_Ttau.expiry,
                                 k, w, price1[k]))
    d1 = result.pi1.diagnostics
    legs.append(TradeLeg("bond", spx_Ttau.market.value, spx_Ttau.expiry, None,
                         d1.get("tail_bond_qty", 0.0), spx_Ttau.discount))
    legs.append(TradeLeg("underlier_claim", spx_Ttau.market.value,
                         spx_Ttau.expiry, None, -d1.get("tail_share_qty", 0.0),
                         spx_Ttau.discount * spx_Ttau.forward))

    # pi2: long calls at T
    k2, p2, _ = _build_curve(spx_T, Kind.CALL, config)
    price2 = dict(zip(k2, p2))
    if result.pi2.weights is not None:
        for k, w in zip(result.pi2.weights.strikes, result.pi2.weights.weights):
            legs.append(TradeLeg("call", spx_T.market.value, spx_T.expiry,
                                 k, w, price2[k]))
    d2 = result.pi2.diagnostics
    legs.append(TradeLeg("underlier_claim", spx_T.market.value, spx_T.expiry,
                         None, d2.get("head_share_qty", 0.0),
                         spx_T.discount * spx_T.forward))
    legs.append(TradeLeg("bond", spx_T.market.value, spx_T.expiry, None,
                         -d2.get("head_bond_qty", 0.0), spx_T.discount))

    # pi3: short the vol-index call strip, its bond leg, and the parity head
    k3, p3, _ = _build_curve(vix_slice, Kind.CALL, config)
    price3 = dict(zip(k3, p3))
    if result.pi3.weights is not None:
        for k, w in zip(result.pi3.weights.strikes, result.pi3.weights.weights):
            legs.append(TradeLeg("vix_call", vix_slice.market.value,
                                 vix_slice.expiry, k, -w, price3.get(k, 0.0)))
    legs.append(TradeLeg("bond", vix_slice.market.value, vix_slice.expiry,
                         None, -1.0, vix_slice.discount))
    d3 = result.pi3.diagnostics
    legs.append(TradeLeg("volindex_claim", vix_slice.market.value,
                         vix_slice.expiry, None, -d3.get("head_claim_qty", 0.0),
                         vix_slice.discount * vix_slice.forward))
    legs.append(TradeLeg("bond", vix_slice.market.value, vix_slice.expiry,
                         None, d3.get("head_bond_qty", 0.0), vix_slice.discount))

    entry = -(sum(leg.value for leg in legs))

    variant = "time_t_static"
    if log_contract_claim_value is not None:
        first = result.pi3.value >= log_contract_claim_value
        second = log_contract_claim_value >= result.pi1.value + result.pi2.value
        if first and second:
            variant = "both_legs"
        elif first:
            variant = "exponential_claim_leg"
        elif second:
            variant = "power_split_leg"
    return TradeList(legs=tuple(legs), entry_cash_flow=entry, variant=variant,
                     diagnostics={"margin": result.margin})


def build_tail_report(spx_T: OptionSlice, spx_Ttau: OptionSlice,
                      vix_slice: OptionSlice, xi: float, p: float,
                      estimator: str = "extreme_quote", cut: float = 0.0,
                      npts: int = 5,
                      config: StripConfig = DEFAULT_CONFIG) -> TailReport:
    """Aggregate slope estimates, moment bounds, and the inequality margin."""
    flags: list[str] = []
    beta_L = beta_from_slice(spx_Ttau, "left", cut, estimator, npts).beta
    beta_R = beta_from_slice(spx_T, "right", cut, estimator, npts).beta
    beta_Rv = beta_from_slice(vix_slice, "right", cut, estimator, npts).beta
    q_tilde = beta_to_moment(beta_L)
    p_tilde = beta_to_moment(beta_R)
    tau = spx_Ttau.expiry - spx_T.expiry
    xi_tilde = math.inf if math.isinf(q_tilde) else tau * q_tilde / 4.0
    flags.append("xi_tilde is the lower bound tau*q_tilde/4 from the left slope")
    gpd_alpha = None
    if 0.0 < beta_Rv < 2.0:
        gpd_alpha = _svi.gpd_tail(beta_Rv).alpha
    else:
        flags.append(f"beta_R_vix={beta_Rv:.4g} outside (0,2): no heavy-tail GPD")
    res = check_mgf_inequality(spx_T, spx_Ttau, vix_slice, xi, p, config)
    if res.diagnostics["divergent_legs"]:
        flags.append("divergent strips: " + ",".join(res.diagnostics["divergent_legs"]))
    if res.margin <= 0:
        flags.append("INEQUALITY VIOLATED: static arbitrage available")
    return TailReport(
        beta_L=beta_L, beta_R=beta_R, beta_R_vix=beta_Rv,
        q_tilde=q_tilde, p_tilde=p_tilde, xi_tilde=xi_tilde,
        gpd_alpha=gpd_alpha, inequality_margin=res.margin,
        xi=xi, p=p, q=res.triple.q, flags=tuple(flags),
    )
