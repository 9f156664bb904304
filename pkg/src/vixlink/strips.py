"""Option-strip replication integrals.

Four claims are replicated from quoted chains by static strips:

* the volatility index itself (out-of-the-money strip of the underlier),
* a negative power of the later-dated underlier price (put strip),
* a positive power of the earlier-dated underlier price (call strip),
* the exponential claim exp(xi * VIX_T^2) on the vol index (call strip
  with kernel (2 xi + 4 xi^2 K^2) e^{xi K^2}), plus plain power moments
  of the vol index.

Chains quote a finite strike window while the replication integrals run
over (0, inf).  Each operation therefore returns ``(value, error_bound,
diagnostics)`` instead of a bare number: the quoted window is integrated
by trapezoid, deep-in-the-money wings are folded into exact bond/forward
legs through put-call parity, and what remains beyond the window is
either extrapolated at the last quote's implied volatility or estimated
into the error bound, per the tail policy.

Divergence of a strip is a statement about the market's tail, not a
numerical failure.  It is detected from the data: the log-integrand
trend over the most extreme quotes decides whether the tail integral
converges, and the extreme-quote smile slope gives the implied maximal
finite moment order for the diagnostics.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .black_scholes import BsInputs, bs_price, implied_vol
from .market_data import Kind, Market, OptionSlice, Tenor, put_call_split

__all__ = [
    "TailPolicy",
    "StripConfig",
    "StripWeights",
    "StripResult",
    "PortfolioTriple",
    "vix_from_strip",
    "power_claim_put_strip",
    "power_claim_call_strip",
    "mgf_claim_vix_strip",
    "moment_claim_vix_strip",
]


class TailPolicy(str, enum.Enum):
    TRUNCATE = "truncate"
    EXTRAPOLATE_FLAT_VOL = "extrapolate_flat_vol"


@dataclass(frozen=True)
class StripConfig:
    """Discretization controls shared by every strip operation.

    ``tail_mult`` bounds the extrapolated strike range at
    ``[forward / tail_mult, forward * tail_mult]``; ``n_extrap`` is the
    number of geometric extension points per side; ``n_tail_fit`` the
    number of extreme quotes used for trend/slope diagnostics.
    """

    tail_policy: TailPolicy = TailPolicy.EXTRAPOLATE_FLAT_VOL
    tail_mult: float = 8.0
    n_extrap: int = 200
    n_tail_fit: int = 5
    beta_flag_threshold: float = 0.005

    def __post_init__(self):
        if self.tail_mult <= 1:
            raise ValueError("tail_mult must exceed 1")
        if self.n_extrap < 2 or self.n_tail_fit < 2:
            raise ValueError("need at least 2 extension/fit points")


DEFAULT_CONFIG = StripConfig()


@dataclass(frozen=True)
class StripWeights:
    """Per-strike quantities of a discretized strip."""

    strikes: tuple[float, ...]
    weights: tuple[float, ...]
    tail_policy: TailPolicy

    def __post_init__(self):
        if len(self.strikes) != len(self.weights):
            raise ValueError("strikes and weights must have equal length")
        ks = self.strikes
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("strikes must be strictly increasing")
        if not all(math.isfinite(w) for w in self.weights):
            raise ValueError("weights must be finite")


@dataclass(frozen=True)
class StripResult:
    value: float
    error_bound: float
    diagnostics: dict
    weights: StripWeights | None = None

    @property
    def divergent(self) -> bool:
        return bool(self.diagnostics.get("divergent", False))


@dataclass(frozen=True)
class PortfolioTriple:
    """Values of the three replicating portfolios at given (xi, p, q)."""

    pi1: float
    pi2: float
    pi3: float
    xi: float
    p: float
    q: float

    def __post_init__(self):
        if abs(1.0 / self.p + 1.0 / self.q - 1.0) > 1e-12:
            raise ValueError(f"p={self.p}, q={self.q} are not Holder conjugates")
        if self.pi1 < 0 or self.pi2 < 0:
            raise ValueError("pi1 and pi2 must be non-negative")


# ---------------------------------------------------------------------------
# curve assembly
# ---------------------------------------------------------------------------

def _kind_price_map(slc: OptionSlice, kind: Kind) -> dict[float, float]:
    """Prices of ``kind`` at every quoted strike, parity-filling gaps.

    Parity-derived prices (P = C - B(F - K) and vice versa) are floored
    at zero; the floor count is reported by the caller's diagnostics.
    """
    direct = {q.strike: q.price for q in slc.quotes if q.kind is kind}
    other = {q.strike: q.price for q in slc.quotes
             if q.kind is not kind and q.strike not in direct}
    out = dict(direct)
    b, fwd = slc.discount, slc.forward
    for k, price in other.items():
        if kind is Kind.PUT:
            out[k] = max(price - b * (fwd - k), 0.0)
        else:
            out[k] = max(price + b * (fwd - k), 0.0)
    return out


def _flat_vol_at(slc: OptionSlice, strike: float, price: float, kind: Kind) -> float:
    try:
        vol = implied_vol(price, slc.forward, strike, slc.ttm, slc.discount, kind)
    except ValueError:
        return 0.0
    return 0.0 if not math.isfinite(vol) else vol


def _build_curve(slc: OptionSlice, kind: Kind, config: StripConfig):
    """Strike/price arrays for one option kind over the working window."""
    price_map = _kind_price_map(slc, kind)
    strikes = np.array(sorted(price_map), dtype=float)
    prices = np.array([price_map[k] for k in strikes], dtype=float)
    n_quoted = len(strikes)
    lo_target = slc.forward / config.tail_mult
    hi_target = slc.forward * config.tail_mult
    diag = {"n_quoted": n_quoted, "extrapolated_low": 0, "extrapolated_high": 0}

    if config.tail_policy is TailPolicy.EXTRAPOLATE_FLAT_VOL:
        if strikes[0] > lo_target * (1 + 1e-12):
            vol = _flat_vol_at(slc, strikes[0], prices[0], kind)
            ext = np.geomspace(lo_target, strikes[0], config.n_extrap + 1)[:-1]
            ext_p = np.array([
                bs_price(BsInputs(slc.forward, k, vol, slc.ttm, slc.discount), kind)
                for k in ext
            ])
            strikes = np.concatenate([ext, strikes])
            prices = np.concatenate([ext_p, prices])
            diag["extrapolated_low"] = len(ext)
        if strikes[-1] < hi_target * (1 - 1e-12):
            vol = _flat_vol_at(slc, strikes[-1], prices[-1], kind)
            ext = np.geomspace(strikes[-1], hi_target, config.n_extrap + 1)[1:]
            ext_p = np.array([
                bs_price(BsInputs(slc.forward, k, vol, slc.ttm, slc.discount), kind)
                for k in ext
            ])
            strikes = np.concatenate([strikes, ext])
            prices = np.concatenate([prices, ext_p])
            diag["extrapolated_high"] = len(ext)
    return strikes, prices, diag


def _trapz_with_refinement(f: np.ndarray, x: np.ndarray) -> tuple[float, float]:
    """Trapezoid value plus a grid error estimate from 2x coarsening."""
    fine = float(np.trapezoid(f, x))
    if len(x) >= 5:
        idx = np.arange(0, len(x), 2)
        if idx[-1] != len(x) - 1:
            idx = np.append(idx, len(x) - 1)
        coarse = float(np.trapezoid(f[idx], x[idx]))
        return fine, abs(fine - coarse)
    return fine, 0.0


def _trapz_weights(x: np.ndarray) -> np.ndarray:
    w = np.zeros_like(x)
    w[1:] += 0.5 * np.diff(x)
    w[:-1] += 0.5 * np.diff(x)
    return w


def _log_slope(x: np.ndarray, y: np.ndarray) -> float | None:
    """OLS slope of y on x; None when degenerate."""
    if len(x) < 2 or np.ptp(x) <= 0:
        return None
    return float(np.polyfit(x, y, 1)[0])


def _price_floor(slc: OptionSlice) -> float:
    # quotes below this carry no usable tail information (noise floor)
    return 1e-11 * slc.discount * slc.forward


def _tail_smile_slope(slc: OptionSlice, side: str, n_fit: int) -> float | None:
    """Extreme-quote regression slope of total implied variance vs |log K/F|.

    This is the finite-data version of the extreme-strike asymptote; it
    feeds strip divergence diagnostics only (the tail module owns the
    public estimators).
    """
    floor = _price_floor(slc)
    if side == "left":
        quotes = [q for q in slc.quotes
                  if q.kind is Kind.PUT and q.strike < slc.forward
                  and q.price > floor]
        quotes = quotes[:n_fit]
    else:
        quotes = [q for q in slc.quotes
                  if q.kind is Kind.CALL and q.strike > slc.forward
                  and q.price > floor]
        quotes = quotes[-n_fit:]
    xs, ys = [], []
    for q in quotes:
        try:
            vol = implied_vol(q.price, slc.forward, q.strike, slc.ttm,
                              slc.discount, q.kind)
        except ValueError:
            continue
        if math.isfinite(vol) and vol > 0:
            xs.append(abs(math.log(q.strike / slc.forward)))
            ys.append(vol * vol * slc.ttm)
    if len(xs) < 2:
        return None
    return _log_slope(np.array(xs), np.array(ys))


def _implied_moment_order(beta: float) -> float:
    # Lee map: slope beta in (0, 2] to the supremum finite moment order.
    if beta <= 0:
        return math.inf
    return 1.0 / (2.0 * beta) + beta / 8.0 - 0.5


# ---------------------------------------------------------------------------
# the volatility-index strip
# ---------------------------------------------------------------------------

def vix_from_strip(slc: OptionSlice, tau: Tenor | float = Tenor(),
                   config: StripConfig = DEFAULT_CONFIG) -> StripResult:
    """Replicate the volatility index from an out-of-the-money strip.

    Computes ``sqrt((2 / (tau * B)) * [int P dK/K^2 + int C dK/K^2])``
    with the put/call split at the forward.  Only out-of-the-money quotes
    enter, so redundant in-the-money quotes cannot shift the value.

    Raises
    ------
    ValueError
        If the slice expiry is not valuation + tau, if both wings are
        empty, or if corrupt prices produce a negative radicand.
    """
    tau_v = tau.tau if isinstance(tau, Tenor) else float(tau)
    if abs(slc.ttm - tau_v) > 1e-8 * max(1.0, tau_v):
        raise ValueError(
            f"slice expiry ({slc.ttm:.6g}y ahead) must equal the index window "
            f"tau = {tau_v:.6g}y"
        )
    split = put_call_split(slc)
    if not split.puts and not split.calls:
        raise ValueError("both wings empty: no out-of-the-money quotes")

    put_k = np.array([q.strike for q in split.puts])
    put_p = np.array([q.price for q in split.puts])
    call_k = np.array([q.strike for q in split.calls])
    call_p = np.array([q.price for q in split.calls])
    diag: dict = {"n_puts": len(put_k), "n_calls": len(call_k),
                  "tail_policy": config.tail_policy.value}

    if config.tail_policy is TailPolicy.EXTRAPOLATE_FLAT_VOL:
        lo_target = slc.forward / config.tail_mult
        if len(put_k) and put_k[0] > lo_target * (1 + 1e-12):
            vol = _flat_vol_at(slc, put_k[0], put_p[0], Kind.PUT)
            ext = np.geomspace(lo_target, put_k[0], config.n_extrap + 1)[:-1]
            ext_p = np.array([
                bs_price(BsInputs(slc.forward, k, vol, slc.ttm, slc.discount), Kind.PUT)
                for k in ext
            ])
            put_k = np.concatenate([ext, put_k])
            put_p = np.concatenate([ext_p, put_p])
        hi_target = slc.forward * config.tail_mult
        if len(call_k) and call_k[-1] < hi_target * (1 - 1e-12):
            vol = _flat_vol_at(slc, call_k[-1], call_p[-1], Kind.CALL)
            ext = np.geomspace(call_k[-1], hi_target, config.n_extrap + 1)[1:]
            ext_p = np.array([
                bs_price(BsInputs(slc.forward, k, vol, slc.ttm, slc.discount), Kind.CALL)
                for k in ext
            ])
            call_k = np.concatenate([call_k, ext])
            call_p = np.concatenate([call_p, ext_p])

    total, err_grid = 0.0, 0.0
    if len(put_k) >= 2:
        v, e = _trapz_with_refinement(put_p / put_k**2, put_k)
        total += v
        err_grid += e
    if len(call_k) >= 2:
        v, e = _trapz_with_refinement(call_p / call_k**2, call_k)
        total += v
        err_grid += e
    # bridge the one-spacing gap straddling the forward
    if len(put_k) and len(call_k):
        gap = call_k[0] - put_k[-1]
        if gap > 0:
            f_lo = put_p[-1] / put_k[-1] ** 2
            f_hi = call_p[0] / call_k[0] ** 2
            total += 0.5 * (f_lo + f_hi) * gap
            diag["atm_gap"] = gap

    radicand = 2.0 / (tau_v * slc.discount) * total
    if radicand < 0:
        raise ValueError(f"negative radicand {radicand}: corrupt prices")
    value = math.sqrt(radicand)
    scale = 2.0 / (tau_v * slc.discount)
    err = scale * err_grid / (2.0 * value) if value > 0 else math.sqrt(scale * err_grid)

    strikes = np.concatenate([put_k, call_k])
    dens = np.concatenate([
        _trapz_weights(put_k) / put_k**2 if len(put_k) >= 2 else np.zeros_like(put_k),
        _trapz_weights(call_k) / call_k**2 if len(call_k) >= 2 else np.zeros_like(call_k),
    ])
    weights = StripWeights(tuple(strikes), tuple(dens * scale), config.tail_policy)
    diag["flags"] = split.flags
    return StripResult(value=value, error_bound=err, diagnostics=diag, weights=weights)


# ---------------------------------------------------------------------------
# power claims on the underlier
# ---------------------------------------------------------------------------

def power_claim_put_strip(slc: OptionSlice, xi: float, q: float,
                          tau: Tenor | float = Tenor(),
                          config: StripConfig = DEFAULT_CONFIG) -> StripResult:
    """Value the put strip replicating a negative power of the later price.

    The strip holds ``xt * (xt*q + 1) / B_fw`` puts per unit strike at
    ``K^{-(xt*q + 2)}`` where ``xt = 2 xi / tau`` and ``B_fw`` is the
    forward discount over the index window; it replicates a claim paying
    ``S^{-xt*q} / (q * B_fw)`` at the slice expiry.  The deep
    in-the-money put wing beyond the working window is carried exactly as
    bond plus short-forward positions via parity.
    """
    tau_v = tau.tau if isinstance(tau, Tenor) else float(tau)
    if xi <= 0:
        raise ValueError(f"xi must be positive, got {xi}")
    if q <= 1:
        raise ValueError(f"q must exceed 1, got {q}")
    p = q / (q - 1.0)
    xt = 2.0 * xi / tau_v
    if xt * p <= 1:
        raise ValueError(
            f"standing assumption 2*xi*p/tau > 1 violated (got {xt * p:.6g})"
        )
    n = xt * q
    b_fw = math.exp(-slc.rate * tau_v)
    pref = xt * (xt * q + 1.0) / b_fw  # == n (n + 1) / (q * B_fw)

    strikes, prices, diag = _build_curve(slc, Kind.PUT, config)
    diag["exponent"] = n
    diag["tail_policy"] = config.tail_policy.value

    # tail diagnostics from the quoted extreme low strikes
    beta_l = _tail_smile_slope(slc, "left", config.n_tail_fit)
    if beta_l is not None:
        beta_l = min(max(beta_l, 0.0), 2.0)
        diag["beta_left_est"] = beta_l
        diag["q_tilde_est"] = _implied_moment_order(beta_l)
    quoted_puts = [(q_.strike, q_.price) for q_ in slc.quotes
                   if q_.kind is Kind.PUT
                   and q_.price > _price_floor(slc)][:config.n_tail_fit]
    divergent = False
    if len(quoted_puts) >= 2:
        ks = np.array([k for k, _ in quoted_puts])
        ps = np.array([v for _, v in quoted_puts])
        slope = _log_slope(np.log(ks), np.log(ps) - (n + 2.0) * np.log(ks))
        if slope is not None and slope <= -1.0:
            divergent = True
            diag["offending_strikes"] = tuple(ks)
            diag["integrand_log_slope"] = slope
    if beta_l is not None and beta_l > config.beta_flag_threshold:
        if n >= diag["q_tilde_est"]:
            divergent = True
            diag["moment_order_exceeded"] = True
    if divergent:
        diag["divergent"] = True
        return StripResult(value=math.inf, error_bound=math.inf, diagnostics=diag)

    with np.errstate(over="raise"):
        try:
            kernel = strikes ** (-(n + 2.0))
            integrand = prices * kernel
            quad, err_grid = _trapz_with_refinement(integrand, strikes)
            quad *= pref
            err_grid *= pref
        except FloatingPointError:
            diag["divergent"] = True
            diag["overflow"] = True
            return StripResult(value=math.inf, error_bound=math.inf, diagnostics=diag)

    k_hi = strikes[-1]
    tail_bond_qty = pref * k_hi ** (-n) / n          # bonds maturing at expiry
    tail_share_qty = pref * k_hi ** (-n - 1.0) / (n + 1.0)  # short claims on S
    tail_value = slc.discount * (tail_bond_qty - tail_share_qty * slc.forward)
    call_res = max(prices[-1] - slc.discount * (k_hi - slc.forward), 0.0)
    err_tail = pref * call_res * k_hi ** (-n - 1.0) / (n + 1.0)

    low = strikes <= strikes[0] * 2.0
    err_low = abs(float(np.trapezoid(integrand[low], strikes[low]))) * pref \
        if low.sum() >= 2 else 0.0

    value = quad + tail_value
    diag.update({
        "quadrature": quad,
        "parity_tail_value": tail_value,
        "tail_bond_qty": tail_bond_qty,
        "tail_share_qty": tail_share_qty,
        "err_grid": err_grid, "err_tail": err_tail, "err_low_heuristic": err_low,
    })
    weights = StripWeights(tuple(strikes),
                           tuple(pref * kernel * _trapz_weights(strikes)),
                           config.tail_policy)
    return StripResult(value=value, error_bound=err_grid + err_tail + err_low,
                       diagnostics=diag, weights=weights)


def power_claim_call_strip(slc: OptionSlice, xi: float, p: float,
                           tau: Tenor | float = Tenor(),
                           config: StripConfig = DEFAULT_CONFIG) -> StripResult:
    """Value the call strip replicating a positive power of the earlier price.

    Holds ``xt * (xt*p - 1) / B_fw^{xt*p}`` calls per unit strike at
    ``K^{xt*p - 2}``; replicates ``(S / B_fw)^{xt*p} / p`` paid at the
    slice expiry.  Requires ``xt * p > 1`` (the kernel vanishes at the
    boundary).  The in-the-money head below the working window is carried
    exactly as forward-minus-bond positions via parity.
    """
    tau_v = tau.tau if isinstance(tau, Tenor) else float(tau)
    if xi <= 0:
        raise ValueError(f"xi must be positive, got {xi}")
    if p <= 1:
        raise ValueError(f"p must exceed 1, got {p}")
    xt = 2.0 * xi / tau_v
    m = xt * p
    if m <= 1:
        raise ValueError(f"requires 2*xi*p/tau > 1, got {m:.6g}")
    b_fw = math.exp(-slc.rate * tau_v)
    pref = xt * (m - 1.0) / b_fw ** m  # == m (m - 1) / (p * B_fw^m)

    strikes, prices, diag = _build_curve(slc, Kind.CALL, config)
    diag["exponent"] = m
    diag["tail_policy"] = config.tail_policy.value

    beta_r = _tail_smile_slope(slc, "right", config.n_tail_fit)
    if beta_r is not None:
        beta_r = min(max(beta_r, 0.0), 2.0)
        diag["beta_right_est"] = beta_r
        diag["p_tilde_est"] = _implied_moment_order(beta_r)
    quoted_calls = [(q_.strike, q_.price) for q_ in slc.quotes
                    if q_.kind is Kind.CALL
                    and q_.price > _price_floor(slc)][-config.n_tail_fit:]
    divergent = False
    if len(quoted_calls) >= 2:
        ks = np.array([k for k, _ in quoted_calls])
        cs = np.array([v for _, v in quoted_calls])
        slope = _log_slope(np.log(ks), np.log(cs) + (m - 2.0) * np.log(ks))
        if slope is not None and slope >= -1.0:
            divergent = True
            diag["offending_strikes"] = tuple(ks)
            diag["integrand_log_slope"] = slope
    if beta_r is not None and beta_r > config.beta_flag_threshold:
        # finite E S^m needs m - 1 below the implied sup of finite orders
        if m - 1.0 >= diag["p_tilde_est"]:
            divergent = True
            diag["moment_order_exceeded"] = True
    if divergent:
        diag["divergent"] = True
        return StripResult(value=math.inf, error_bound=math.inf, diagnostics=diag)

    with np.errstate(over="raise"):
        try:
            kernel = strikes ** (m - 2.0)
            integrand = prices * kernel
            quad, err_grid = _trapz_with_refinement(integrand, strikes)
            quad *= pref
            err_grid *= pref
        except FloatingPointError:
            diag["divergent"] = True
            diag["overflow"] = True
            return StripResult(value=math.inf, error_bound=math.inf, diagnostics=diag)

    k_lo = strikes[0]
    head_share_qty = pref * k_lo ** (m - 1.0) / (m - 1.0)   # claims on S
    head_bond_qty = pref * k_lo ** m / m                     # short bonds
    head_value = slc.discount * (head_share_qty * slc.forward - head_bond_qty)
    put_res = max(prices[0] - slc.discount * (slc.forward - k_lo), 0.0)
    err_head = pref * put_res * k_lo ** (m - 1.0) / (m - 1.0)

    high = strikes >= strikes[-1] / 2.0
    err_high = abs(float(np.trapezoid(integrand[high], strikes[high]))) * pref \
        if high.sum() >= 2 else 0.0

    value = quad + head_value
    diag.update({
        "quadrature": quad,
        "parity_head_value": head_value,
        "head_share_qty": head_share_qty,
        "head_bond_qty": head_bond_qty,
        "err_grid": err_grid, "err_head": err_head, "err_high_heuristic": err_high,
    })
    weights = StripWeights(tuple(strikes),
                           tuple(pref * kernel * _trapz_weights(strikes)),
                           config.tail_policy)
    return StripResult(value=value, error_bound=err_grid + err_head + err_high,
                       diagnostics=diag, weights=weights)


# ---------------------------------------------------------------------------
# strips on the volatility index
# ---------------------------------------------------------------------------

def _mgf_parity_head(slc: OptionSlice, xi: float, k_lo: float):
    """Exponential-kernel integral below the lowest strike, where calls
    are forward-minus-bond by parity.  Returns (value, claim_qty, bond_qty)."""
    head_grid = np.linspace(0.0, k_lo, 257)
    head_kernel = (2 * xi + 4 * xi * xi * head_grid**2) * np.exp(xi * head_grid**2)
    head_vals = head_kernel * slc.discount * np.maximum(slc.forward - head_grid, 0.0)
    return (float(np.trapezoid(head_vals, head_grid)),
            float(np.trapezoid(head_kernel, head_grid)),
            float(np.trapezoid(head_kernel * head_grid, head_grid)))


def _vix_call_curve(slc: OptionSlice, config: StripConfig, extrapolate: bool):
    cfg = config if extrapolate else StripConfig(
        tail_policy=TailPolicy.TRUNCATE,
        tail_mult=config.tail_mult,
        n_extrap=config.n_extrap,
        n_tail_fit=config.n_tail_fit,
        beta_flag_threshold=config.beta_flag_threshold,
    )
    return _build_curve(slc, Kind.CALL, cfg)


def mgf_claim_vix_strip(slc: OptionSlice, xi: float,
                        config: StripConfig = DEFAULT_CONFIG) -> StripResult:
    """Replicate exp(xi * VIX_T^2) from the vol-index call strip.

    Value is ``B + int (2 xi + 4 xi^2 K^2) e^{xi K^2} C(K) dK``.  At
    ``xi = 0`` the claim is a bond and the value is exactly the discount
    factor.  For positive ``xi`` the integral converges only when call
    prices beat the ``K^2 e^{xi K^2}`` growth: the decay of the last
    quoted calls is fitted and tested; on failure the result is flagged
    divergent with value +inf and the offending strikes reported.
    """
    if slc.market is not Market.VOLINDEX:
        raise ValueError("MGF strip requires a volatility-index slice")
    diag: dict = {"xi": xi}
    if xi == 0.0:
        return StripResult(value=slc.discount, error_bound=0.0, diagnostics=diag,
                           weights=StripWeights((), (), config.tail_policy))

    strikes, prices, cd = _vix_call_curve(slc, config, extrapolate=(xi <= 0))
    diag.update(cd)
    diag["tail_policy"] = config.tail_policy.value

    beta_r = _tail_smile_slope(slc, "right", config.n_tail_fit)
    if beta_r is not None:
        diag["beta_right_vix_est"] = beta_r
    divergent = False
    tail_estimate = 0.0
    if xi > 0:
        # bound the support at the last strictly positive price; interior
        # zeros just contribute nothing
        live = np.nonzero(prices > 0)[0]
        if len(live) == 0:
            # dead chain: the index sits below the lowest strike, the
            # claim is bond plus the parity head (degenerate-index case)
            diag["all_quotes_dead"] = True
            head = _mgf_parity_head(slc, xi, strikes[0])
            diag["parity_head_value"] = head[0]
            return StripResult(slc.discount + head[0], 0.0, diag,
                               StripWeights((), (), config.tail_policy))
        strikes, prices = strikes[:live[-1] + 1], prices[:live[-1] + 1]
        if len(strikes) < 2:
            strikes = np.append(strikes, strikes[-1] * (1 + 1e-9))
            prices = np.append(prices, 0.0)
        # the decay test must see the farthest strictly positive quotes:
        # a noise floor here would cut the fit away from the true tail
        ks, cs = strikes[prices > 0], prices[prices > 0]
        tail_n = min(config.n_tail_fit, len(ks))
        kf, cf = ks[-tail_n:], cs[-tail_n:]
        # decay-rate fit of the full integrand against K^2
        logd = np.log(2 * xi + 4 * xi * xi * kf**2) + xi * kf**2 + np.log(cf)
        lam = _log_slope(kf**2, logd) if tail_n >= 2 else None
        diag["tail_decay_rate"] = lam
        if lam is None or lam >= 0:
            divergent = True
            diag["offending_strikes"] = tuple(kf)
        if beta_r is not None and beta_r > config.beta_flag_threshold:
            # heavy right tail: calls decay polynomially, no Gaussian kernel
            # can be integrated against them
            divergent = True
            diag["heavy_tail_flag"] = True
        if not divergent:
            tail_estimate = math.exp(min(float(logd[-1]), 700.0)) \
                / (2.0 * abs(lam) * kf[-1])
    if divergent:
        diag["divergent"] = True
        return StripResult(value=math.inf, error_bound=math.inf, diagnostics=diag)

    log_kernel = np.log(2 * xi + 4 * xi * xi * strikes**2) + xi * strikes**2 \
        if xi > 0 else None
    if xi > 0:
        with np.errstate(divide="ignore"):
            log_price = np.where(prices > 0, np.log(np.maximum(prices, 1e-320)),
                                 -np.inf)
        log_term = log_kernel + log_price
        if np.any(log_term > 700.0):
            diag["divergent"] = True
            diag["offending_strikes"] = tuple(strikes[log_term > 700.0][:5])
            return StripResult(math.inf, math.inf, diag)
        integrand = np.exp(log_term)
        kernel = np.exp(np.minimum(log_kernel, 700.0))
    else:
        kernel = (2 * xi + 4 * xi * xi * strikes**2) * np.exp(xi * strikes**2)
        integrand = kernel * prices
    quad, err_grid = _trapz_with_refinement(integrand, strikes)

    # head below the lowest strike: calls are forward-minus-bond there
    k_lo = strikes[0]
    head, head_claim_qty, head_bond_qty = _mgf_parity_head(slc, xi, k_lo)
    put_res = 0.0
    put_lo = [q_ for q_ in slc.quotes if q_.kind is Kind.PUT and q_.strike <= k_lo]
    if put_lo:
        head_kernel_max = abs(2 * xi + 4 * xi * xi * k_lo**2) * math.exp(max(xi, 0.0) * k_lo**2)
        put_res = put_lo[0].price * head_kernel_max * k_lo
    diag["parity_head_value"] = head
    diag["head_claim_qty"] = head_claim_qty
    diag["head_bond_qty"] = head_bond_qty

    value = slc.discount + quad + head
    diag["quadrature"] = quad
    diag["tail_estimate"] = tail_estimate
    weights = StripWeights(tuple(strikes),
                           tuple(kernel * _trapz_weights(strikes)),
                           config.tail_policy)
    return StripResult(value=value,
                       error_bound=err_grid + tail_estimate + put_res,
                       diagnostics=diag, weights=weights)


def moment_claim_vix_strip(slc: OptionSlice, n: float,
                           config: StripConfig = DEFAULT_CONFIG) -> StripResult:
    """Replicate B * E[VIX^n] from the call strip, n > 1.

    ``n (n-1) int K^{n-2} C(K) dK`` plus the exact parity head below the
    lowest strike.  As n -> 1+ the value tends to the discounted future.
    A right tail whose implied maximal finite moment order falls below
    ``n - 1`` trips the divergence flag.
    """
    if slc.market is not Market.VOLINDEX:
        raise ValueError("moment strip requires a volatility-index slice")
    if n <= 1:
        raise ValueError(f"moment order must exceed 1, got {n}")
    strikes, prices, diag = _build_curve(slc, Kind.CALL, config)
    diag["order"] = n

    beta_r = _tail_smile_slope(slc, "right", config.n_tail_fit)
    divergent = False
    if beta_r is not None:
        beta_r = min(max(beta_r, 0.0), 2.0)
        diag["beta_right_vix_est"] = beta_r
        if beta_r > config.beta_flag_threshold:
            p_tilde = _implied_moment_order(beta_r)
            diag["p_tilde_est"] = p_tilde
            if n - 1.0 >= p_tilde:
                divergent = True
                diag["moment_order_exceeded"] = True
    pos = prices > 0
    ks, cs = strikes[pos], prices[pos]
    if len(ks) >= 2:
        kf, cf = ks[-config.n_tail_fit:], cs[-config.n_tail_fit:]
        slope = _log_slope(np.log(kf), np.log(cf) + (n - 2.0) * np.log(kf))
        if slope is not None and slope >= -1.0:
            divergent = True
            diag["offending_strikes"] = tuple(kf)
            diag["integrand_log_slope"] = slope
    if divergent:
        diag["divergent"] = True
        return StripResult(value=math.inf, error_bound=math.inf, diagnostics=diag)

    kernel = n * (n - 1.0) * strikes ** (n - 2.0)
    quad, err_grid = _trapz_with_refinement(kernel * prices, strikes)

    k_lo = strikes[0]
    head = slc.discount * (n * slc.forward * k_lo ** (n - 1.0)
                           - (n - 1.0) * k_lo ** n)
    diag["parity_head_value"] = head
    value = quad + head
    diag["quadrature"] = quad
    weights = StripWeights(tuple(strikes),
                           tuple(kernel * _trapz_weights(strikes)),
                           config.tail_policy)
    return StripResult(value=value, error_bound=err_grid, diagnostics=diag,
                       weights=weights)
