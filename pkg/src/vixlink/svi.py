"""SVI smile fitting, butterfly-arbitrage diagnostics, and the
generalized-Pareto tail of the implied distribution.

The five-parameter total-variance smile

    w(k) = a + b * (rho * (k - m) + sqrt((k - m)^2 + sigma^2))

is fitted per slice in total-variance space.  Its analytic derivatives
give the no-butterfly function g(k) and, where g >= 0, an explicit
risk-neutral density in log-moneyness.  The far right wing has slope
``b * (1 + rho)``; when that slope sits strictly inside (0, 2) the tail
of the implied distribution is generalized-Pareto with shape

    alpha = 0.5 * (sqrt(1/beta) + sqrt(beta)/2)^2  > 1,

and the peaks-over-threshold law with scaling x/alpha converges to
``(1 + y/alpha)^(-alpha)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize

from .black_scholes import implied_vol
from .market_data import Kind, OptionSlice
from .special import norm_cdf

__all__ = [
    "SviParams",
    "SviFit",
    "GpdTail",
    "svi_total_variance",
    "svi_fit",
    "svi_call_price",
    "butterfly_g",
    "svi_density",
    "gpd_tail",
    "pot_ratio",
]


@dataclass(frozen=True)
class SviParams:
    a: float
    b: float
    rho: float
    m: float
    sigma: float

    def __post_init__(self):
        if self.b < 0:
            raise ValueError(f"b must be >= 0, got {self.b}")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [-1, 1], got {self.rho}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        min_w = self.a + self.b * self.sigma * math.sqrt(1.0 - self.rho**2)
        if min_w < -1e-12:
            raise ValueError(
                f"negative minimum total variance {min_w:.6g}; smile is invalid"
            )

    @property
    def right_slope(self) -> float:
        """Asymptotic slope of w(k)/k for large k: b * (1 + rho)."""
        return self.b * (1.0 + self.rho)


@dataclass(frozen=True)
class SviFit:
    params: SviParams
    rmse: float
    n_quotes: int
    slope_cap_ok: bool        # b (1 + |rho|) <= 4 / ttm heuristic
    n_starts: int
    converged: bool
    diagnostics: dict = field(default_factory=dict)


def svi_total_variance(params: SviParams, k):
    k = np.asarray(k, dtype=float)
    d = k - params.m
    out = params.a + params.b * (params.rho * d + np.sqrt(d * d + params.sigma**2))
    return out if out.ndim else float(out)


def _w_derivs(params: SviParams, k):
    d = np.asarray(k, dtype=float) - params.m
    root = np.sqrt(d * d + params.sigma**2)
    w = params.a + params.b * (params.rho * d + root)
    wp = params.b * (params.rho + d / root)
    wpp = params.b * params.sigma**2 / root**3
    return w, wp, wpp


def _smile_points(slc: OptionSlice):
    """(k, total variance, weight) triples from a slice's quotes."""
    ks, ws, wt = [], [], []
    for q in slc.quotes:
        try:
            vol = implied_vol(q.price, slc.forward, q.strike, slc.ttm,
                              slc.discount, q.kind)
        except ValueError:
            continue
        if not math.isfinite(vol) or vol <= 0:
            continue
        ks.append(math.log(q.strike / slc.forward))
        ws.append(vol * vol * slc.ttm)
        if q.bid is not None and q.ask is not None and q.ask > q.bid:
            wt.append(1.0 / (q.ask - q.bid))
        else:
            wt.append(1.0)
    return np.array(ks), np.array(ws), np.array(wt)


def _reduced_fit(ks, ws, wt, m, sigma):
    """Exact weighted linear solve for (a, b, rho) at fixed (m, sigma).

    Basis: w = a + c1 * y + c2 * sqrt(y^2 + 1) with y = (k - m)/sigma,
    c1 = b rho sigma, c2 = b sigma; constraints c2 >= 0 and |c1| <= c2
    are enforced by clipping after the solve.
    """
    y = (ks - m) / sigma
    basis = np.column_stack([np.ones_like(y), y, np.sqrt(y * y + 1.0)])
    sw = np.sqrt(wt)
    coef, *_ = np.linalg.lstsq(basis * sw[:, None], ws * sw, rcond=None)
    a, c1, c2 = coef
    c2 = max(c2, 0.0)
    c1 = min(max(c1, -c2), c2)
    b = c2 / sigma
    rho = 0.0 if c2 == 0 else c1 / c2
    fit = a + c1 * y + c2 * np.sqrt(y * y + 1.0)
    # keep the smile minimum non-negative
    min_w = a + b * sigma * math.sqrt(max(1.0 - rho * rho, 0.0))
    if min_w < 0:
        a = a - min_w
        fit = fit - min_w
    resid = float(np.sqrt(np.average((fit - ws) ** 2, weights=wt)))
    return (a, b, rho), resid


def svi_fit(slc: OptionSlice, init: SviParams | None = None,
            n_starts: int = 5, seed: int = 0, maxiter: int = 400) -> SviFit:
    """Weighted least-squares SVI calibration of one slice.

    Outer Nelder-Mead over (m, log sigma) with an exact linear solve for
    (a, b, rho) at each trial point; five quasi-random deterministic
    starts (plus the user's init when given).  Weights are inverse
    bid-ask widths when available, else uniform.  Deterministic given
    (init, seed).
    """
    ks, ws, wt = _smile_points(slc)
    if len(ks) < 5:
        raise ValueError(f"need at least 5 usable quotes, got {len(ks)}")
    k_lo, k_hi = float(ks.min()), float(ks.max())
    span = max(k_hi - k_lo, 1e-3)

    def objective(theta):
        m, log_sig = theta
        sigma = math.exp(log_sig)
        if not (k_lo - 2 * span <= m <= k_hi + 2 * span):
            return 1e6
        _, resid = _reduced_fit(ks, ws, wt, m, sigma)
        return resid

    rng = np.random.default_rng(seed)
    starts = [np.array([0.5 * (k_lo + k_hi), math.log(0.3 * span)])]
    for _ in range(n_starts - 1):
        starts.append(np.array([
            rng.uniform(k_lo, k_hi),
            math.log(span * 10 ** rng.uniform(-2.0, 0.3)),
        ]))
    if init is not None:
        starts.insert(0, np.array([init.m, math.log(init.sigma)]))

    best = None
    converged = False
    for x0 in starts:
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"maxiter": maxiter, "xatol": 1e-10,
                                "fatol": 1e-14})
        if best is None or res.fun < best.fun:
            best = res
            converged = bool(res.success) or converged
    if best is None or not math.isfinite(best.fun):
        raise ValueError("SVI calibration failed to produce a finite residual")

    m, log_sig = best.x
    sigma = math.exp(log_sig)
    (a, b, rho), rmse = _reduced_fit(ks, ws, wt, m, sigma)
    params = SviParams(a=max(a, 0.0) if abs(a) < 1e-14 else a,
                       b=b, rho=rho, m=m, sigma=sigma)
    cap_ok = params.b * (1.0 + abs(params.rho)) <= 4.0 / slc.ttm + 1e-12
    return SviFit(params=params, rmse=rmse, n_quotes=len(ks),
                  slope_cap_ok=cap_ok, n_starts=len(starts),
                  converged=converged,
                  diagnostics={"k_range": (k_lo, k_hi),
                               "right_slope": params.right_slope})


def svi_call_price(params: SviParams, forward: float, discount: float,
                   k) -> float | np.ndarray:
    """Call price at log-moneyness k under the fitted smile.

    Black form with total variance w(k):
    ``B * F * (Phi(d_plus) - e^k Phi(d_minus))`` where
    ``d_pm = -k/sqrt(w) pm sqrt(w)/2``.
    """
    k = np.asarray(k, dtype=float)
    w = svi_total_variance(params, k)
    if np.any(w < 0):
        raise ValueError("negative total variance on the requested range")
    sw = np.sqrt(w)
    d_plus = -k / sw + 0.5 * sw
    d_minus = -k / sw - 0.5 * sw
    out = discount * forward * (norm_cdf(d_plus) - np.exp(k) * norm_cdf(d_minus))
    return out if out.ndim else float(out)


def butterfly_g(params: SviParams, k):
    """No-butterfly function; g >= 0 everywhere certifies a valid density.

    g = (1 - k w'/(2w))^2 - (w')^2/4 * (1/w + 1/4) + w''/2 with exact
    analytic derivatives of the smile.
    """
    w, wp, wpp = _w_derivs(params, k)
    if np.any(w <= 0):
        raise ValueError("total variance must be positive where g is evaluated")
    k = np.asarray(k, dtype=float)
    out = (1.0 - k * wp / (2.0 * w)) ** 2 - wp * wp / 4.0 * (1.0 / w + 0.25) \
        + wpp / 2.0
    return out if out.ndim else float(out)


def svi_density(params: SviParams, k):
    """Density of log(index/future) at k implied by the smile.

    ``g(k)/sqrt(2 pi w) * exp(-d_minus^2 / 2)``.  Negative values signal
    butterfly arbitrage in the parameters; they are returned as-is so a
    scan can locate the offending region.
    """
    k = np.asarray(k, dtype=float)
    w, _, _ = _w_derivs(params, k)
    if np.any(w <= 0):
        raise ValueError("total variance must be positive where the density is evaluated")
    g = butterfly_g(params, k)
    sw = np.sqrt(w)
    d_minus = -k / sw - 0.5 * sw
    out = g / np.sqrt(2.0 * np.pi * w) * np.exp(-0.5 * d_minus**2)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class GpdTail:
    alpha: float
    beta_r: float
    scale_rule: str = "a(x) = x/alpha"

    def __post_init__(self):
        if not self.alpha > 1.0:
            raise ValueError(f"alpha must exceed 1, got {self.alpha}")
        if not 0.0 < self.beta_r < 2.0:
            raise ValueError(f"beta_r must lie strictly in (0, 2), got {self.beta_r}")

    def survival(self, y):
        """GPD survival (1 + y/alpha)^(-alpha) for y >= 0."""
        y = np.asarray(y, dtype=float)
        out = (1.0 + y / self.alpha) ** (-self.alpha)
        return out if out.ndim else float(out)


def gpd_tail(beta_r_vix: float) -> GpdTail:
    """Generalized-Pareto tail shape implied by a right slope in (0, 2).

    alpha = 0.5 * (sqrt(1/beta) + sqrt(beta)/2)^2, strictly above 1 on
    the open interval.  The endpoints are rejected: a slope of 2 can sit
    on the edge of butterfly arbitrage, and a slope of 0 is a thin tail
    that needs a different scaling function altogether.
    """
    if not 0.0 < beta_r_vix < 2.0:
        raise ValueError(
            f"beta_R outside supported open interval (0, 2): {beta_r_vix}; "
            "the boundary regimes need different tail treatment"
        )
    alpha = 0.5 * (math.sqrt(1.0 / beta_r_vix) + math.sqrt(beta_r_vix) / 2.0) ** 2
    return GpdTail(alpha=alpha, beta_r=beta_r_vix)


def pot_ratio(params: SviParams, x: float, y: float, forward: float) -> float:
    """Peaks-over-threshold probability from the fitted smile tail.

    ``P(index >= x (1 + y/alpha) | index >= x)`` with both tail masses
    integrated from the smile density; converges to the GPD survival
    ``(1 + y/alpha)^(-alpha)`` as the threshold x grows.  Threshold x
    should sit beyond the quoted strikes.  Evaluation normalizes by the
    density at the threshold so deep tails never underflow.
    """
    if y < 0:
        raise ValueError(f"excess y must be >= 0, got {y}")
    if x <= forward:
        raise ValueError("threshold must exceed the future level")
    alpha = gpd_tail(params.right_slope).alpha
    k0 = math.log(x / forward)
    k1 = math.log(x * (1.0 + y / alpha) / forward)
    ref = svi_density(params, k0)
    if ref <= 0:
        raise ValueError("non-positive density at the threshold; check g(k)")

    def scaled(k):
        return svi_density(params, k) / ref

    top = max(k1 + 60.0 / alpha, k1 * 3)
    num = quad(scaled, k1, top, limit=400)[0]
    den = quad(scaled, k0, top, limit=400)[0]
    if den <= 0:
        raise ValueError("vanishing tail mass at the threshold")
    return num / den
