"""vixlink: model-free links between an equity-index option market and
its volatility-index option market.

Replicates the volatility index and the MGF of its square from option
strips, estimates extreme-strike tail slopes, checks the Holder
inequality tying the two markets together, emits static arbitrage
portfolios on violation, extracts a generalized-Pareto tail from a
fitted smile, and cross-validates everything against a zoo of
stochastic-volatility models with known moment boundaries.
"""

from .black_scholes import BandViolationError, BsInputs, bs_price, bs_vega, implied_vol
from .market_data import (
    ChainError, Kind, Market, OptionQuote, OptionSlice, SplitResult, Tenor,
    parse_chain, put_call_split, serialize_chain,
)
from .mc import (
    EmpiricalEstimate, PathBundle, SimConfig, empirical_mgf,
    empirical_negative_moment, estimate_vix, simulate,
)
from .models import (
    CevPrice, CevVol, ExpOU, GaussianJumps, Heston, JumpAdjustment,
    JumpOverlay, MgfResult, ModelSpec, MomentBoundary, Sabr, ThreeHalves,
    carr_sun_mgf, cev_vol_density, cev_vol_moments, cir_density,
    cir_log_density, cir_mean_reciprocal, cir_shape_alpha, exp_ou_vix2,
    heston_explosion_time, heston_vix2_coeffs, heston_vix2_mgf,
    heston_vix_transform, jump_adjustments, moment_boundary,
    render_summary_table, sabr_vix, sabr_vix_call, sabr_vix_coeff,
    summary_table, three_halves_neg_moment, three_halves_vix2,
    three_halves_vix2_approx,
)
from .special import Accuracy, bessel_i, dawson, expint_ei, hyp1f1, ln_gamma, log_bessel_i, norm_cdf
from .strips import (
    PortfolioTriple, StripConfig, StripResult, StripWeights, TailPolicy,
    mgf_claim_vix_strip, moment_claim_vix_strip, power_claim_call_strip,
    power_claim_put_strip, vix_from_strip,
)
from .svi import (
    GpdTail, SviFit, SviParams, butterfly_g, gpd_tail, pot_ratio,
    svi_call_price, svi_density, svi_fit, svi_total_variance,
)
from .tails import (
    InequalityResult, MomentBounds, TailReport, TailSlope, TradeLeg, TradeList,
    arbitrage_portfolio_on_violation, beta_from_slice, beta_to_moment,
    build_tail_report, check_mgf_inequality, implied_vol_lower_bounds,
    moment_to_beta,
)

__version__ = "0.1.0"
