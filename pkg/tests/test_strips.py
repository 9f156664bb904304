import math

import numpy as np
import pytest

from oracles import (
    gamma_vix_chain, heston_chain, heston_real_moment, lognormal_chain,
    lognormal_neg_moment, lognormal_pos_moment, lognormal_vix_chain,
    make_slice, svi_underlier_chain, svi_vix_chain,
)
from vixlink.market_data import Kind, Tenor
from vixlink.models import Heston, heston_vix2_coeffs
from vixlink.strips import (
    PortfolioTriple, StripConfig, TailPolicy, mgf_claim_vix_strip,
    moment_claim_vix_strip, power_claim_call_strip, power_claim_put_strip,
    vix_from_strip,
)
from vixlink.svi import SviParams

TAU = 30 / 365


# ---------------------------------------------------------------------------
# vix_from_strip
# ---------------------------------------------------------------------------

def test_vix_strip_flat_vol_recovers_sigma(flat_chain_400):
    res = vix_from_strip(flat_chain_400, Tenor())
    assert res.value == pytest.approx(0.2, rel=5e-3)
    assert abs(res.value - 0.2) < 1e-3


def test_vix_strip_zero_vol_chain_is_zero():
    strikes = np.linspace(50, 200, 31)
    quotes = [(k, 0.0, Kind.PUT if k <= 100 else Kind.CALL) for k in strikes]
    slc = make_slice("underlier", 0.0, TAU, 0.0, 100.0, quotes)
    assert vix_from_strip(slc, Tenor()).value == 0.0


def test_vix_strip_heston_chain_matches_affine_map(heston_model):
    chain = heston_chain(heston_model, 0.0, TAU,
                         np.geomspace(1 / 8, 8, 2001), kinds="otm")
    res = vix_from_strip(chain, Tenor())
    a, b = heston_vix2_coeffs(heston_model, TAU)
    assert res.value == pytest.approx(math.sqrt(a + b * heston_model.y0),
                                      rel=1e-3)


def test_vix_strip_ignores_redundant_itm_quotes(heston_model):
    strikes = np.geomspace(1 / 8, 8, 801)
    otm = heston_chain(heston_model, 0.0, TAU, strikes, kinds="otm")
    both = heston_chain(heston_model, 0.0, TAU, strikes, kinds="both")
    assert vix_from_strip(otm, Tenor()).value \
        == vix_from_strip(both, Tenor()).value


def test_vix_strip_wrong_expiry_rejected(flat_chain_400):
    with pytest.raises(ValueError, match="tau"):
        vix_from_strip(flat_chain_400, Tenor(60 / 365))


def test_vix_strip_both_wings_empty():
    quotes = [(k, 5.0, Kind.CALL) for k in (50.0, 60.0, 70.0)]  # all ITM calls
    slc = make_slice("underlier", 0.0, TAU, 0.0, 100.0, quotes)
    with pytest.raises(ValueError, match="wings"):
        vix_from_strip(slc, Tenor())


def test_vix_strip_grid_refinement_within_error_bound():
    fwd = 100.0
    coarse = lognormal_chain(fwd, 0.25, 0.0, TAU, 0.0,
                             np.geomspace(fwd / 8, fwd * 8, 200))
    fine = lognormal_chain(fwd, 0.25, 0.0, TAU, 0.0,
                           np.geomspace(fwd / 8, fwd * 8, 399))
    v_c = vix_from_strip(coarse, Tenor())
    v_f = vix_from_strip(fine, Tenor())
    assert abs(v_f.value - v_c.value) <= v_c.error_bound


# ---------------------------------------------------------------------------
# put strip (negative power claim)
# ---------------------------------------------------------------------------

def _flat_both(vol=0.2, expiry=71 / 365, n=4001, lo=1 / 10, hi=10.0):
    return lognormal_chain(1.0, vol, 0.0, expiry, 0.0,
                           np.geomspace(lo, hi, n), kinds="both")


def test_put_strip_matches_lognormal_moment():
    # exponent n = xt * q = 0.5 with q = 1.25 keeps the call-side
    # assumption xt * p = 2 > 1 satisfied
    chain = _flat_both()
    q = 1.25
    xi = 0.4 * TAU / 2
    res = power_claim_put_strip(chain, xi, q, Tenor())
    expect = lognormal_neg_moment(1.0, 0.2, 71 / 365, 0.5) / q
    assert res.value == pytest.approx(expect, rel=1e-5)
    assert abs(res.value - expect) < max(res.error_bound, 1e-5)


def test_put_strip_small_exponent_tends_to_bond_over_q():
    # claim on a constant: value -> B_{t,T} / q as the exponent vanishes
    chain = _flat_both()
    q = 1.01
    xi = 0.011 * TAU / 2   # xt*p ~ 1.11 > 1, exponent n ~ 0.011
    res = power_claim_put_strip(chain, xi, q, Tenor())
    assert res.value == pytest.approx(1.0 / q, rel=1e-3)


def test_put_strip_grid_halving_within_error_bound():
    q, xi = 1.25, 0.4 * TAU / 2
    v1 = power_claim_put_strip(_flat_both(n=1500), xi, q, Tenor())
    v2 = power_claim_put_strip(_flat_both(n=2999), xi, q, Tenor())
    assert abs(v2.value - v1.value) <= v1.error_bound


def test_put_strip_preconditions():
    chain = _flat_both(n=101)
    with pytest.raises(ValueError, match="xi"):
        power_claim_put_strip(chain, -0.1, 2.0, Tenor())
    with pytest.raises(ValueError, match="q"):
        power_claim_put_strip(chain, 0.1, 1.0, Tenor())
    with pytest.raises(ValueError, match="2\\*xi\\*p/tau"):
        power_claim_put_strip(chain, 0.001, 1.5, Tenor())


def test_put_strip_monotone_in_q_on_heavy_left_tail():
    params = SviParams(a=0.01, b=0.25, rho=-0.2, m=0.0, sigma=0.2)
    chain = svi_underlier_chain(params, 1.0, 0.0, 71 / 365,
                                np.geomspace(1e-3, 10, 6001))
    xi = 0.55 * TAU / 2
    vals = [power_claim_put_strip(chain, xi, q, Tenor()).value
            for q in (1.95, 2.05, 2.15)]
    assert all(math.isfinite(v) for v in vals)
    assert vals[0] < vals[1] < vals[2]
    # past the implied maximal finite order the strip flags divergence
    res = power_claim_put_strip(chain, xi, 2.20, Tenor())
    assert res.divergent and res.value == math.inf


def test_put_strip_flags_divergence_on_extreme_exponent(heston_chain_set):
    res = power_claim_put_strip(heston_chain_set["spx_Ttau"], 10.0, 2.0,
                                Tenor())
    assert res.divergent
    assert res.value == math.inf
    assert res.error_bound == math.inf


def test_put_strip_weights_reconstruct_quadrature():
    chain = _flat_both(n=801)
    res = power_claim_put_strip(chain, 0.4 * TAU / 2, 1.25, Tenor())
    w = res.weights
    assert len(w.strikes) == len(w.weights)
    assert all(b > a for a, b in zip(w.strikes, w.strikes[1:]))


# ---------------------------------------------------------------------------
# call strip (positive power claim)
# ---------------------------------------------------------------------------

def test_call_strip_matches_lognormal_moment():
    chain = _flat_both(expiry=41 / 365)
    p = 2.0
    xi = 0.75 * TAU / 2    # m = xt * p = 1.5
    res = power_claim_call_strip(chain, xi, p, Tenor())
    expect = lognormal_pos_moment(1.0, 0.2, 41 / 365, 1.5) / p
    assert res.value == pytest.approx(expect, rel=1e-5)


def test_call_strip_kernel_boundary_rejected():
    chain = _flat_both(n=101)
    with pytest.raises(ValueError, match="2\\*xi\\*p/tau"):
        power_claim_call_strip(chain, TAU / 4, 2.0, Tenor())  # m exactly 1


def test_call_strip_grid_halving_within_error_bound():
    p, xi = 2.0, 0.75 * TAU / 2
    v1 = power_claim_call_strip(_flat_both(expiry=41 / 365, n=1500), xi, p, Tenor())
    v2 = power_claim_call_strip(_flat_both(expiry=41 / 365, n=2999), xi, p, Tenor())
    assert abs(v2.value - v1.value) <= v1.error_bound


def test_call_strip_flags_heavy_right_tail():
    # right wing slope 0.5: implied sup of finite orders ~ 0.56, so a
    # power claim of order 2.6 cannot be finite
    params = SviParams(a=0.02, b=0.5, rho=0.0, m=0.0, sigma=0.2)
    chain = svi_underlier_chain(params, 1.0, 0.0, 41 / 365,
                                np.geomspace(0.05, 50, 3001))
    res = power_claim_call_strip(chain, 1.3 * TAU / 2, 2.0, Tenor())
    assert res.divergent


# ---------------------------------------------------------------------------
# MGF strip on the vol index
# ---------------------------------------------------------------------------

GAMMA_KAPPA, GAMMA_YBAR, GAMMA_GAM = 2.0, 0.09, 0.3


def _gamma_setup():
    alpha = 2 * GAMMA_YBAR * GAMMA_KAPPA / GAMMA_GAM**2 - 1
    scale = GAMMA_GAM**2 / (2 * GAMMA_KAPPA)
    b_lin = -math.expm1(-GAMMA_KAPPA * TAU) / (GAMMA_KAPPA * TAU)
    xi_t = 1.0 / (b_lin * scale)
    slc, fwd = gamma_vix_chain(alpha + 1, scale, b_lin, 0.0, 41 / 365,
                               np.geomspace(0.004, 3.2, 4001))
    return alpha, scale, b_lin, xi_t, slc


@pytest.fixture(scope="module")
def gamma_setup():
    return _gamma_setup()


def test_mgf_strip_zero_xi_is_discount_exactly():
    slc = lognormal_vix_chain(0.2, 0.8, 0.0, 41 / 365,
                              np.geomspace(0.02, 2.0, 301), rate=0.01)
    res = mgf_claim_vix_strip(slc, 0.0)
    assert res.value == slc.discount
    assert res.error_bound == 0.0


def test_mgf_strip_matches_gamma_law(gamma_setup):
    alpha, scale, b_lin, xi_t, slc = gamma_setup
    for frac, rel in ((0.5, 1e-5), (0.9, 1e-5)):
        res = mgf_claim_vix_strip(slc, frac * xi_t)
        expect = (1.0 - frac) ** (-(alpha + 1))
        assert not res.divergent
        assert res.value == pytest.approx(expect, rel=rel)


def test_mgf_strip_divergence_above_boundary(gamma_setup):
    *_, xi_t, slc = gamma_setup
    res = mgf_claim_vix_strip(slc, 1.1 * xi_t)
    assert res.divergent
    assert res.value == math.inf
    assert "offending_strikes" in res.diagnostics \
        or res.diagnostics.get("tail_decay_rate", -1) >= 0


def test_mgf_strip_monotone_in_xi(gamma_setup):
    *_, slc = gamma_setup
    vals = [mgf_claim_vix_strip(slc, xi).value for xi in (-5.0, 0.0, 5.0, 10.0)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_mgf_strip_negative_xi_finite_below_one():
    slc = lognormal_vix_chain(0.2, 0.8, 0.0, 41 / 365,
                              np.geomspace(0.01, 3.0, 1501))
    res = mgf_claim_vix_strip(slc, -3.0)
    assert 0.0 < res.value < 1.0
    assert not res.divergent


def test_mgf_strip_flags_lognormal_index_when_quotes_reach_crossover():
    # a lognormal index has every power moment yet no squared-index MGF;
    # the kernel beats the lognormal decay beyond K ~ exp(2 xi w K^2)
    # crossover, so the flag requires quotes out far enough to see it
    slc = lognormal_vix_chain(0.2, 0.8, 0.0, 41 / 365,
                              np.geomspace(0.01, 6.0, 2001))
    res = mgf_claim_vix_strip(slc, 2.0)
    assert res.divergent
    assert res.diagnostics["tail_decay_rate"] > 0


def test_mgf_strip_requires_volindex_market(flat_chain_400):
    with pytest.raises(ValueError, match="volatility-index"):
        mgf_claim_vix_strip(flat_chain_400, 0.1)


# ---------------------------------------------------------------------------
# moment strip on the vol index
# ---------------------------------------------------------------------------

def test_moment_strip_second_moment_lognormal():
    fwd, vol, ttm = 0.2, 0.8, 41 / 365
    slc = lognormal_vix_chain(fwd, vol, 0.0, ttm, np.geomspace(0.005, 4.0, 3001))
    res = moment_claim_vix_strip(slc, 2.0)
    expect = fwd**2 * math.exp(vol * vol * ttm)
    assert res.value == pytest.approx(expect, rel=1e-5)


def test_moment_strip_order_one_limit_is_future():
    fwd = 0.2
    slc = lognormal_vix_chain(fwd, 0.8, 0.0, 41 / 365,
                              np.geomspace(0.005, 4.0, 3001))
    res = moment_claim_vix_strip(slc, 1.0001)
    assert res.value == pytest.approx(fwd, rel=1e-3)
    with pytest.raises(ValueError, match="order"):
        moment_claim_vix_strip(slc, 1.0)


def test_moment_strip_flags_heavy_tail():
    # right slope 0.5 implies sup finite order ~ 1.5625 < 2
    params = SviParams(a=0.05, b=0.5, rho=0.0, m=0.0, sigma=0.3)
    slc = svi_vix_chain(params, 0.2, 0.0, 41 / 365,
                        np.geomspace(0.02, 3.0, 1001))
    res = moment_claim_vix_strip(slc, 2.0)
    assert res.divergent
    assert res.diagnostics.get("p_tilde_est", math.inf) < 1.0


# ---------------------------------------------------------------------------
# PortfolioTriple invariants
# ---------------------------------------------------------------------------

def test_portfolio_triple_validates_conjugates():
    PortfolioTriple(1.0, 1.0, 1.0, xi=0.1, p=2.0, q=2.0)
    with pytest.raises(ValueError, match="conjugate"):
        PortfolioTriple(1.0, 1.0, 1.0, xi=0.1, p=2.0, q=2.1)
    with pytest.raises(ValueError, match="non-negative"):
        PortfolioTriple(-1.0, 1.0, 1.0, xi=0.1, p=2.0, q=2.0)
