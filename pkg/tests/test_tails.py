import math

import numpy as np
import pytest

from oracles import (
    black_price, heston_real_moment, make_slice, svi_underlier_chain,
    svi_vix_chain,
)
from vixlink.market_data import Kind, OptionQuote
from vixlink.svi import SviParams
from vixlink.tails import (
    arbitrage_portfolio_on_violation, beta_from_slice, beta_to_moment,
    build_tail_report, check_mgf_inequality, implied_vol_lower_bounds,
    moment_to_beta,
)

TAU = 30 / 365


# ---------------------------------------------------------------------------
# slope <-> moment conversions
# ---------------------------------------------------------------------------

def test_conversion_endpoints():
    assert beta_to_moment(2.0) == 0.0
    assert beta_to_moment(0.0) == math.inf
    assert moment_to_beta(math.inf) == 0.0
    assert moment_to_beta(0.0) == 2.0


def test_conversion_m_equals_one():
    expect = 2.0 - 4.0 * (math.sqrt(2.0) - 1.0)
    assert moment_to_beta(1.0) == pytest.approx(expect, rel=1e-14)
    # numeric inversion cross-check
    from scipy.optimize import brentq
    root = brentq(lambda b: beta_to_moment(b) - 1.0, 1e-9, 2.0, xtol=1e-13)
    assert root == pytest.approx(expect, abs=1e-10)


def test_conversion_round_trip_grid():
    betas = np.linspace(2.0 / 200.0, 2.0, 200)
    err = max(abs(moment_to_beta(beta_to_moment(b)) - b) for b in betas)
    assert err < 1e-12


def test_beta_to_moment_strictly_decreasing():
    betas = np.linspace(0.01, 2.0, 300)
    ms = [beta_to_moment(b) for b in betas]
    assert all(b < a for a, b in zip(ms, ms[1:]))


# ---------------------------------------------------------------------------
# slope estimation from slices
# ---------------------------------------------------------------------------

def _tail_point_slice(side, beta_target, forward, ttm, rate, strikes_extra):
    """Slice whose most extreme quote evaluates exactly to beta_target."""
    disc = math.exp(-rate * ttm)
    quotes = []
    kind = Kind.PUT if side == "left" else Kind.CALL
    for i, strike in enumerate(strikes_extra):
        b = beta_target if i == 0 else beta_target * 0.95
        vol = math.sqrt(b * abs(math.log(strike / forward)) / ttm)
        price = black_price(forward, strike, vol, ttm, disc, kind)
        quotes.append((strike, price, kind))
    market = "underlier" if side == "left" else "volindex"
    # pad so the slice has >= 3 strikes
    pad_k = forward * (0.99 if side == "left" else 1.01)
    vol = 0.3
    quotes.append((pad_k, black_price(forward, pad_k, vol, ttm, disc, kind), kind))
    return make_slice(market, 0.0, ttm, rate, forward, quotes)


def test_beta_from_slice_reproduces_spx_left_estimate():
    slc = _tail_point_slice("left", 0.3908, 1101.97, 37 / 365, 0.0028,
                            [600.0, 650.0])
    slope = beta_from_slice(slc, "left", cut=0.0)
    assert round(slope.beta, 4) == 0.3908
    assert slope.side == "left" and slope.estimator == "extreme_quote"


def test_beta_from_slice_reproduces_vix_right_estimate():
    slc = _tail_point_slice("right", 0.4044**2, 0.2775, 41 / 365, 0.0,
                            [0.65, 0.55])
    slope = beta_from_slice(slc, "right", cut=0.0)
    assert round(math.sqrt(slope.beta), 4) == 0.4044


def test_beta_flat_smile_vanishes_as_quotes_deepen():
    # finite-moment model: the extreme-quote slope sigma^2 T / |log K/F|
    # decays as the usable quotes reach deeper strikes
    fwd, ttm, vol = 100.0, 0.2, 0.8
    betas = []
    for k_max in (1.0, 1.6, 2.2):
        strikes = fwd * np.exp(-np.linspace(0.2, k_max, 12))
        quotes = [(k, black_price(fwd, k, vol, ttm, 1.0, Kind.PUT), Kind.PUT)
                  for k in strikes]
        slc = make_slice("underlier", 0.0, ttm, 0.0, fwd, quotes)
        betas.append(beta_from_slice(slc, "left").beta)
    assert betas[0] > betas[1] > betas[2]
    assert betas[2] == pytest.approx(vol**2 * ttm / 2.2, rel=1e-7)


def test_beta_regression_estimator_recovers_wing_slope():
    params = SviParams(a=0.02, b=0.3, rho=0.0, m=0.0, sigma=0.2)
    strikes = 0.25 * np.exp(np.linspace(1.5, 3.0, 12))
    slc = svi_vix_chain(params, 0.25, 0.0, 41 / 365, strikes)
    slope = beta_from_slice(slc, "right", estimator="regression", npts=5)
    assert slope.beta == pytest.approx(params.right_slope, rel=0.02)


def test_beta_requires_two_extreme_quotes():
    slc = _tail_point_slice("left", 0.4, 100.0, 0.2, 0.0, [60.0, 70.0])
    with pytest.raises(ValueError, match="insufficient"):
        beta_from_slice(slc, "left", cut=3.0)


def test_beta_bid_ask_price_selection():
    fwd, ttm = 100.0, 0.2
    quotes = []
    for strike in (60.0, 70.0, 99.0):
        mid = black_price(fwd, strike, 0.4, ttm, 1.0, Kind.PUT)
        quotes.append(OptionQuote(strike=strike, price=mid, kind=Kind.PUT,
                                  market="underlier",
                                  bid=mid * 0.9, ask=mid * 1.1))
    slc = make_slice("underlier", 0.0, ttm, 0.0, fwd, [])
    slc = slc.with_quotes(quotes)
    b_bid = beta_from_slice(slc, "left", price="bid").beta
    b_mid = beta_from_slice(slc, "left", price="mid").beta
    b_ask = beta_from_slice(slc, "left", price="ask").beta
    assert b_bid < b_mid < b_ask


# ---------------------------------------------------------------------------
# slope lower bounds from a finite MGF radius
# ---------------------------------------------------------------------------

def test_bound_part1_zero_radius_saturates():
    assert implied_vol_lower_bounds(0.0, TAU, "left") == 2.0


def test_bound_part1_vanishes_for_large_radius():
    assert implied_vol_lower_bounds(1e9 * TAU, TAU, "left") < 1e-8


def test_bound_part1_quarter_tau():
    expect = 2.0 - 4.0 * (math.sqrt(2.0) - 1.0)
    assert implied_vol_lower_bounds(TAU / 4.0, TAU, "left") \
        == pytest.approx(expect, rel=1e-12)


def test_bound_part2_precondition_and_identity():
    with pytest.raises(ValueError, match=">= 1"):
        implied_vol_lower_bounds(0.1 * TAU, TAU, "right")
    # -2 - 4 (sqrt(x^2 - x) - x) equals the part-1 map applied at x - 1
    for xi_t in (TAU / 4.0, TAU, 3 * TAU):
        x = 4 * xi_t / TAU
        direct = implied_vol_lower_bounds(xi_t, TAU, "right")
        via_part1 = 2.0 - 4.0 * (math.sqrt((x - 1) ** 2 + (x - 1)) - (x - 1))
        assert direct == pytest.approx(max(via_part1, 0.0), abs=1e-12)


# ---------------------------------------------------------------------------
# the inequality on consistent synthetic markets
# ---------------------------------------------------------------------------

def test_margin_positive_on_consistent_chains(heston_chain_set):
    cs = heston_chain_set
    for xi in (0.03, 0.04, 0.05):
        res = check_mgf_inequality(cs["spx_T"], cs["spx_Ttau"], cs["vix"],
                                   xi, 2.0)
        assert res.margin > 0
        assert not res.diagnostics["divergent_legs"]


def test_margin_positive_at_other_holder_weights(heston_chain_set):
    cs = heston_chain_set
    res = check_mgf_inequality(cs["spx_T"], cs["spx_Ttau"], cs["vix"],
                               0.04, 3.0)
    assert res.triple.q == pytest.approx(1.5)
    assert res.margin > 0


def test_margin_matches_model_oracle(heston_chain_set):
    cs = heston_chain_set
    model, T, tau = cs["model"], cs["T"], cs["tau"]
    xi, p = 0.04, 2.0
    res = check_mgf_inequality(cs["spx_T"], cs["spx_Ttau"], cs["vix"], xi, p)
    n = 2 * xi * 2.0 / tau
    pi1 = heston_real_moment(-n, model, T + tau) / 2.0
    pi2 = heston_real_moment(n, model, T) / 2.0
    assert res.triple.pi1 == pytest.approx(pi1, abs=2e-7)
    assert res.triple.pi2 == pytest.approx(pi2, abs=2e-7)
    assert res.margin == pytest.approx(pi1 + pi2 - res.triple.pi3, abs=1e-12)


def test_margin_continuous_in_xi(heston_chain_set):
    cs = heston_chain_set
    m = [check_mgf_inequality(cs["spx_T"], cs["spx_Ttau"], cs["vix"], xi,
                              2.0).margin for xi in (0.040, 0.042)]
    assert abs(m[1] - m[0]) < 0.25 * abs(m[0])


def test_degenerate_deterministic_market_sits_at_equality():
    # zero volatility everywhere: the index is zero and the margin sits
    # at the Jensen-equality boundary 1/p + 1/q - 1 = 0
    T, Ttau = 5 / 365, 5 / 365 + TAU
    strikes = np.geomspace(0.25, 4.0, 401)

    def flat_slice(expiry):
        quotes = []
        for k in strikes:
            quotes.append((k, max(1.0 - k, 0.0), Kind.PUT if k > 1.0 else Kind.CALL))
            # quote the other kind too so both curves are populated
        more = [(k, max(k - 1.0, 0.0), Kind.PUT) for k in strikes if k > 1.0]
        more += [(k, max(1.0 - k, 0.0), Kind.CALL) for k in strikes if k <= 1.0]
        base = [(k, 0.0, Kind.PUT if k <= 1.0 else Kind.CALL) for k in strikes]
        return make_slice("underlier", 0.0, expiry, 0.0, 1.0, more + base)

    spx_T = flat_slice(T)
    spx_Ttau = flat_slice(Ttau)
    vix_strikes = np.geomspace(0.01, 0.5, 101)
    vix = make_slice("volindex", 0.0, T, 0.0, 1e-9,
                     [(k, 0.0, Kind.CALL) for k in vix_strikes])
    res = check_mgf_inequality(spx_T, spx_Ttau, vix, 0.05, 2.0)
    assert res.triple.pi3 == pytest.approx(1.0, abs=1e-6)
    assert abs(res.margin) < 5e-4


# ---------------------------------------------------------------------------
# violation, portfolio, refusal
# ---------------------------------------------------------------------------

def _inflate(slc, factor):
    quotes = tuple(OptionQuote(q.strike, q.price * factor, q.kind, q.market)
                   for q in slc.quotes)
    return slc.with_quotes(quotes)


@pytest.fixture(scope="module")
def violation_setup(heston_chain_set):
    cs = heston_chain_set
    xi, p = 0.0055, 8.0
    vix_bad = _inflate(cs["vix"], 1.5)
    res = check_mgf_inequality(cs["spx_T"], cs["spx_Ttau"], vix_bad, xi, p)
    return cs, vix_bad, res


def test_inflated_vol_chain_flips_margin(violation_setup):
    cs, vix_bad, res = violation_setup
    clean = check_mgf_inequality(cs["spx_T"], cs["spx_Ttau"], cs["vix"],
                                 res.triple.xi, res.triple.p)
    assert clean.margin > 0
    assert res.margin < 0


def test_trade_list_entry_equals_minus_margin(violation_setup):
    cs, vix_bad, res = violation_setup
    trades = arbitrage_portfolio_on_violation(res, cs["spx_T"],
                                              cs["spx_Ttau"], vix_bad)
    assert trades.entry_cash_flow == pytest.approx(-res.margin, abs=1e-8)
    kinds = {leg.instrument for leg in trades.legs}
    assert {"put", "call", "vix_call", "bond"} <= kinds
    # short the exponential-claim strip, long the power strips
    assert all(leg.quantity <= 0 for leg in trades.legs
               if leg.instrument == "vix_call")
    assert all(leg.quantity >= 0 for leg in trades.legs
               if leg.instrument == "put")


def test_portfolio_refuses_positive_margin(heston_chain_set):
    cs = heston_chain_set
    res = check_mgf_inequality(cs["spx_T"], cs["spx_Ttau"], cs["vix"],
                               0.0055, 8.0)
    with pytest.raises(ValueError, match="positive"):
        arbitrage_portfolio_on_violation(res, cs["spx_T"], cs["spx_Ttau"],
                                         cs["vix"])


def test_variant_selection_from_leg_level_value(violation_setup):
    cs, vix_bad, res = violation_setup
    pi12 = res.triple.pi1 + res.triple.pi2
    # mid-claim valued between the legs: only the exponential claim is rich
    mid = 0.5 * (res.triple.pi3 + pi12)
    trades = arbitrage_portfolio_on_violation(res, cs["spx_T"], cs["spx_Ttau"],
                                              vix_bad,
                                              log_contract_claim_value=mid)
    assert trades.variant == "exponential_claim_leg"
    # mid-claim above both: the Young split leg is the mispriced one
    trades = arbitrage_portfolio_on_violation(
        res, cs["spx_T"], cs["spx_Ttau"], vix_bad,
        log_contract_claim_value=pi12 + 1.0)
    assert trades.variant == "power_split_leg"


# ---------------------------------------------------------------------------
# divergence consistency and the aggregate report
# ---------------------------------------------------------------------------

def test_divergent_mgf_implies_divergent_put_strip():
    # market with a genuinely heavy vol-index tail and the matching
    # saturated left wing on the underlier: if the exponential strip
    # blows up, so must the negative-power strip
    vix_params = SviParams(a=0.05, b=0.5, rho=0.0, m=0.0, sigma=0.3)
    vix = svi_vix_chain(vix_params, 0.25, 0.0, 5 / 365,
                        np.geomspace(0.02, 3.0, 601))
    spx_params = SviParams(a=0.01, b=1.0, rho=-0.97, m=0.0, sigma=0.2)
    spx_next = svi_underlier_chain(spx_params, 1.0, 0.0, 5 / 365 + TAU,
                                   np.geomspace(0.05, 4.0, 1001))
    spx_now = svi_underlier_chain(
        SviParams(a=0.005, b=0.2, rho=-0.5, m=0.0, sigma=0.2), 1.0, 0.0,
        5 / 365, np.geomspace(0.05, 4.0, 1001))
    res = check_mgf_inequality(spx_now, spx_next, vix, 0.05, 2.0)
    assert "pi3" in res.diagnostics["divergent_legs"]
    assert "pi1" in res.diagnostics["divergent_legs"]
    assert res.margin == math.inf  # inf - inf resolves to the RHS side


def test_tail_report_aggregates(heston_chain_set):
    cs = heston_chain_set
    report = build_tail_report(cs["spx_T"], cs["spx_Ttau"], cs["vix"],
                               xi=0.04, p=2.0)
    assert 0.0 <= report.beta_L <= 2.0
    assert 0.0 <= report.beta_R_vix <= 2.0
    assert report.q_tilde == pytest.approx(beta_to_moment(report.beta_L))
    assert report.xi_tilde == pytest.approx(TAU * report.q_tilde / 4.0)
    assert report.inequality_margin > 0
    d = report.to_dict()
    assert set(d) >= {"beta_L", "beta_R", "beta_R_vix", "q_tilde", "p_tilde",
                      "xi_tilde", "gpd_alpha", "inequality_margin", "flags"}
