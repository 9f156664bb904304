r"""Stochastic-volatility model zoo with closed-form moment boundaries.

Each model knows three things about its risk-neutral law: the largest
``xi`` with a finite MGF of the squared vol index, the largest finite
negative moment order of the deferred price, and how the vol index maps
onto the volatility state.  These boundaries make the tail machinery
falsifiable: simulation and quadrature must find finiteness below each
boundary and blow-up above it.

Models (all with r = 0):

* ``CevPrice``   dS = S^a dW, 0 <= a < 1, optional realized-variance cap
* ``Sabr``       dY = alpha_vol * Y dB (lognormal vol), price corr rho <= 0
* ``CevVol``     dY = c Y^2 dB (strict local martingale vol)
* ``Heston``     dY = kappa (Ybar - Y) dt + gamma sqrt(Y) dB (CIR vol^2)
* ``ExpOU``      vol = e^Y, dY = kappa (Ybar - Y) dt + gamma dB
* ``ThreeHalves``dZ = Z (kappa - (kappa Ybar - gamma^2) Z) dt - gamma Z^{3/2} dB,
                 equivalently Z = 1/Y with Y the CIR above

Parameter naming: the lognormal vol-of-vol is ``sabr_alpha`` and the CIR
shape is ``cir_shape_alpha = 2 Ybar kappa / gamma^2 - 1``; they are never
both called plain alpha.  The integrated-reciprocal-CIR MGF helper
(:func:`carr_sun_mgf`) renames its internal vol-of-vol to ``gamma`` so it
cannot collide with anything else:

    carr_sun_mgf(shape_alpha, gamma, phi, xi)
        = Gamma(b - a)/Gamma(b) * x^a * 1F1(a, b, -x),
    x = 2/(gamma^2 phi),  a = -shape_alpha/2 + sqrt(shape_alpha^2
        - 8 xi / gamma^2)/2,  b = 1 + 2 a + shape_alpha,
and for the 3/2 model phi = Z0 (e^{kappa T} - 1)/kappa.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.integrate import quad

from .special import dawson, hyp1f1, ln_gamma, log_bessel_i, norm_cdf, norm_pdf

__all__ = [
    "CevPrice", "Sabr", "CevVol", "Heston", "ExpOU", "ThreeHalves",
    "GaussianJumps", "JumpOverlay", "ModelSpec", "MomentBoundary",
    "MgfResult", "JumpAdjustment", "TableCell", "TableRow",
    "cir_shape_alpha", "moment_boundary", "heston_vix2_coeffs",
    "heston_vix_transform", "cir_density", "cir_log_density",
    "heston_explosion_time", "heston_vix2_mgf", "sabr_vix_coeff",
    "sabr_vix", "sabr_vix_call", "carr_sun_mgf", "three_halves_neg_moment",
    "cir_mean_reciprocal", "three_halves_vix2", "three_halves_vix2_approx",
    "cev_vol_density", "cev_vol_moments", "exp_ou_vix2", "jump_adjustments",
    "summary_table", "render_summary_table",
]


# ---------------------------------------------------------------------------
# model specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CevPrice:
    """dS = S^a dW with optional cap M on integrated variance."""

    exponent: float = 0.5
    cap: float | None = None
    s0: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.exponent < 1.0:
            raise ValueError(f"exponent must lie in [0, 1), got {self.exponent}")
        if self.cap is not None and self.cap <= 0:
            raise ValueError("variance cap must be positive")
        if self.s0 <= 0:
            raise ValueError("s0 must be positive")


@dataclass(frozen=True)
class Sabr:
    sabr_alpha: float
    rho: float
    y0: float
    s0: float = 1.0

    def __post_init__(self):
        if self.sabr_alpha <= 0:
            raise ValueError("vol-of-vol must be positive")
        if not -1.0 < self.rho <= 0.0:
            raise ValueError(
                f"rho must lie in (-1, 0] for the price to be a martingale, "
                f"got {self.rho}"
            )
        if self.y0 <= 0 or self.s0 <= 0:
            raise ValueError("y0 and s0 must be positive")


@dataclass(frozen=True)
class CevVol:
    c: float
    rho: float
    y0: float
    s0: float = 1.0

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("c must be positive")
        if not -1.0 < self.rho <= 0.0:
            raise ValueError(
                f"rho must lie in (-1, 0] for the price to be a martingale, "
                f"got {self.rho}"
            )
        if self.y0 <= 0 or self.s0 <= 0:
            raise ValueError("y0 and s0 must be positive")


@dataclass(frozen=True)
class Heston:
    kappa: float
    ybar: float
    gamma: float
    rho: float
    y0: float
    s0: float = 1.0

    def __post_init__(self):
        if min(self.kappa, self.ybar, self.gamma, self.y0, self.s0) <= 0:
            raise ValueError("kappa, ybar, gamma, y0, s0 must be positive")
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
        if self.gamma**2 > 2.0 * self.ybar * self.kappa:
            raise ValueError(
                f"Feller condition violated: gamma^2 = {self.gamma**2:.6g} > "
                f"2 ybar kappa = {2 * self.ybar * self.kappa:.6g}"
            )


@dataclass(frozen=True)
class ExpOU:
    kappa: float
    ybar: float
    gamma: float
    rho: float
    y0: float
    s0: float = 1.0

    def __post_init__(self):
        if self.kappa <= 0 or self.gamma <= 0 or self.s0 <= 0:
            raise ValueError("kappa, gamma, s0 must be positive")
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")


@dataclass(frozen=True)
class ThreeHalves:
    """3/2 volatility: Z = 1/Y with Y CIR(kappa, ybar, gamma)."""

    kappa: float
    ybar: float
    gamma: float
    rho: float
    z0: float
    s0: float = 1.0

    def __post_init__(self):
        if min(self.kappa, self.ybar, self.gamma, self.z0, self.s0) <= 0:
            raise ValueError("kappa, ybar, gamma, z0, s0 must be positive")
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
        if 2.0 * self.ybar * self.kappa <= self.gamma**2:
            raise ValueError("requires 2 ybar kappa > gamma^2")
        if self.kappa * self.ybar - self.rho * self.gamma < 0.5 * self.gamma**2:
            raise ValueError(
                "martingale condition kappa ybar - rho gamma >= gamma^2/2 violated"
            )


@dataclass(frozen=True)
class GaussianJumps:
    mean: float = 0.0
    std: float = 0.1

    def __post_init__(self):
        if self.std < 0:
            raise ValueError("std must be >= 0")

    def exp_moment(self) -> float:
        return math.exp(self.mean + 0.5 * self.std**2)

    def first_moment(self) -> float:
        return self.mean

    def second_moment(self) -> float:
        return self.std**2 + self.mean**2


@dataclass(frozen=True)
class JumpOverlay:
    lam: float
    jumps: GaussianJumps = field(default_factory=GaussianJumps)

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("jump intensity must be >= 0")


ModelSpec = Union[CevPrice, Sabr, CevVol, Heston, ExpOU, ThreeHalves]


def cir_shape_alpha(kappa: float, ybar: float, gamma: float) -> float:
    """CIR shape parameter 2 ybar kappa / gamma^2 - 1 (>= 0 under Feller)."""
    return 2.0 * ybar * kappa / gamma**2 - 1.0


@dataclass(frozen=True)
class MomentBoundary:
    """Closed-form finiteness boundaries for one model and horizon."""

    xi_tilde: float
    q_tilde: float | None
    p_tilde: float | None
    t_star: float | None = None
    notes: str = ""


@dataclass(frozen=True)
class MgfResult:
    value: float
    divergent: bool
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Heston / CIR
# ---------------------------------------------------------------------------

def heston_vix2_coeffs(model: Heston, tau: float) -> tuple[float, float]:
    """Affine map VIX^2 = a + b Y with b = (1 - e^{-kappa tau})/(kappa tau)."""
    kt = model.kappa * tau
    b = -math.expm1(-kt) / kt
    a = model.ybar * (1.0 - b)
    return a, b


def heston_vix_transform(model: Heston, y, tau: float):
    """Squared vol index at state y (vectorized)."""
    a, b = heston_vix2_coeffs(model, tau)
    return a + b * np.asarray(y, dtype=float)


def cir_log_density(model: Heston, y0: float, y, dt: float):
    """log transition density of the CIR state over dt, stable in the tails."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    y = np.asarray(y, dtype=float)
    c = 2.0 * model.kappa / (model.gamma**2 * -math.expm1(-model.kappa * dt))
    alpha = cir_shape_alpha(model.kappa, model.ybar, model.gamma)
    u = c * y0 * math.exp(-model.kappa * dt)
    v = c * y
    with np.errstate(divide="ignore"):
        out = (math.log(c) - u - v + 0.5 * alpha * (np.log(v) - math.log(u))
               + log_bessel_i(alpha, 2.0 * np.sqrt(u * v)))
    return out if out.ndim else float(out)


def cir_density(model: Heston, y0: float, y, dt: float):
    out = np.exp(cir_log_density(model, y0, y, dt))
    return out if np.ndim(out) else float(out)


def heston_explosion_time(model: Heston, q: float) -> float:
    """Horizon T* beyond which E S^{-q} is infinite; inf when it never is.

    T*(q) = (pi 1{d > 0} + atan(-sqrt(D)/d)) / sqrt(D) with
    d = q gamma rho + kappa and D = gamma^2 q (1+q) - d^2 > 0.
    """
    if q <= 0:
        raise ValueError("q must be positive")
    d = q * model.gamma * model.rho + model.kappa
    disc = model.gamma**2 * q * (1.0 + q) - d * d
    if disc <= 0:
        return math.inf
    root = math.sqrt(disc)
    return (math.pi * (1.0 if d > 0 else 0.0) + math.atan(-root / d)) / root


def _heston_q_tilde(model: Heston, horizon: float) -> float:
    def explodes(q):
        return heston_explosion_time(model, q) <= horizon

    q_hi = 1.0
    while not explodes(q_hi):
        q_hi *= 2.0
        if q_hi > 1e8:
            return math.inf
    q_lo = 0.0
    for _ in range(200):
        mid = 0.5 * (q_lo + q_hi)
        if mid == q_lo or mid == q_hi:
            break
        if explodes(mid):
            q_hi = mid
        else:
            q_lo = mid
    return 0.5 * (q_lo + q_hi)


def heston_vix2_mgf(model: Heston, xi: float, t: float, T: float,
                    tau: float, rel_tol: float = 1e-9,
                    growth_threshold: float = 0.10,
                    consecutive: int = 4) -> MgfResult:
    """E_t exp(xi VIX_T^2) by quadrature against the CIR transition law.

    No closed-form shortcut: the integral cutoff doubles until the value
    is stable, and the estimate is declared infinite when four
    consecutive doublings each grow it by more than 10% (the same
    falsifiable protocol the simulation oracle uses).
    """
    if T <= t:
        raise ValueError("need T > t")
    a, b = heston_vix2_coeffs(model, tau)
    dt = T - t

    def integral(limit):
        def f(y):
            with np.errstate(over="ignore"):
                return np.exp(xi * (a + b * y) + cir_log_density(model, model.y0, y, dt))
        val = quad(f, 0.0, limit, limit=400)[0]
        return val

    limit = max(8.0 * (model.ybar + model.y0), 1.0)
    history = [(limit, integral(limit))]
    growth_run = 0
    for _ in range(60):
        limit *= 2.0
        new = integral(limit)
        prev = history[-1][1]
        history.append((limit, new))
        if not math.isfinite(new):
            return MgfResult(math.inf, True, {"history": history})
        if prev > 0 and (new - prev) / prev > growth_threshold:
            growth_run += 1
            if growth_run >= consecutive:
                return MgfResult(math.inf, True, {"history": history})
        else:
            growth_run = 0
            if prev > 0 and abs(new - prev) <= rel_tol * prev:
                return MgfResult(new, False, {"history": history})
    return MgfResult(math.inf, True, {"history": history, "exhausted": True})


# ---------------------------------------------------------------------------
# SABR
# ---------------------------------------------------------------------------

def sabr_vix_coeff(model: Sabr, tau: float) -> float:
    """C = sqrt((e^{alpha^2 tau} - 1)/(tau alpha^2)); -> 1 as alpha -> 0."""
    x = model.sabr_alpha**2 * tau
    return math.sqrt(math.expm1(x) / x)


def sabr_vix(model: Sabr, y, tau: float):
    """Vol index is a fixed multiple of the lognormal vol state."""
    return sabr_vix_coeff(model, tau) * np.asarray(y, dtype=float)


def sabr_vix_call(model: Sabr, strike: float, t: float, T: float,
                  tau: float) -> float:
    """Vol-index call under lognormal volatility: a scaled Black call.

    C^vix(K) = C_coef * BlackCall(forward = y0, strike = K/C_coef,
    vol = sabr_alpha); the implied smile against the vol-index future
    C_coef * y0 is exactly flat at sabr_alpha.
    """
    if strike <= 0:
        raise ValueError("strike must be positive")
    if T <= t:
        raise ValueError("need T > t")
    coef = sabr_vix_coeff(model, tau)
    stdev = model.sabr_alpha * math.sqrt(T - t)
    k_eff = strike / coef
    d_plus = math.log(model.y0 / k_eff) / stdev + 0.5 * stdev
    d_minus = d_plus - stdev
    return coef * (model.y0 * norm_cdf(d_plus) - k_eff * norm_cdf(d_minus))


# ---------------------------------------------------------------------------
# 3/2 model and the integrated-reciprocal-CIR MGF
# ---------------------------------------------------------------------------

def carr_sun_mgf(shape_alpha: float, gamma: float, phi: float,
                 xi: float) -> float:
    """MGF of the integrated reciprocal of a CIR state.

    Real and positive iff xi <= gamma^2 shape_alpha^2 / 8; returns inf
    beyond that boundary (the discriminant goes negative and the formula
    leaves the real line).
    """
    if phi <= 0:
        raise ValueError("phi must be positive")
    if xi == 0:
        return 1.0
    disc = shape_alpha**2 - 8.0 * xi / gamma**2
    if disc < 0:
        return math.inf
    a = -0.5 * shape_alpha + 0.5 * math.sqrt(disc)
    b = 1.0 + 2.0 * a + shape_alpha
    x = 2.0 / (gamma**2 * phi)
    return math.exp(ln_gamma(b - a) - ln_gamma(b) + a * math.log(x)) \
        * float(hyp1f1(a, b, -x))


def three_halves_neg_moment(model: ThreeHalves, q: float, T: float) -> float:
    """E S_T^{-q} = carr_sun_mgf at xi = q (q + 1)/2; inf past the boundary.

    Finite iff q <= q_tilde = (sqrt(1 + gamma^2 alpha^2) - 1)/2 with
    alpha the CIR shape.  The formula routes the price moment through the
    integrated reciprocal variance, which is exact for uncorrelated
    volatility (rho = 0); a nonzero rho tilts the reciprocal-CIR drift.
    """
    if q <= 0:
        raise ValueError("q must be positive")
    if T <= 0:
        raise ValueError("T must be positive")
    alpha = cir_shape_alpha(model.kappa, model.ybar, model.gamma)
    phi = model.z0 * math.expm1(model.kappa * T) / model.kappa
    return model.s0 ** (-q) * carr_sun_mgf(alpha, model.gamma, phi,
                                           0.5 * q * (q + 1.0))


def _scaled_hyp_ratio(alpha: float, z):
    """e^{-z} 1F1(alpha, 1 + alpha, z), stable for large z."""
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=float))
    small = z < 80.0
    out = np.empty_like(z)
    if np.any(small):
        zs = np.where(small, z, 0.0)
        out[small] = (np.exp(-zs) * hyp1f1(alpha, 1.0 + alpha, zs))[small]
    if np.any(~small):
        zb = np.where(~small, z, 100.0)
        acc = np.ones_like(zb)
        term = np.ones_like(zb)
        for j in range(1, 9):
            term = term * (j - alpha) / zb
            acc = acc + term
        out[~small] = (alpha / zb * acc)[~small]
    return out[0] if scalar else out


def cir_mean_reciprocal(kappa: float, ybar: float, gamma: float, y0, t: float):
    """E[1/Y_t | Y_0 = y0] for a CIR state, vectorized in y0.

    (zeta_t / alpha) * e^{-y0 nu_t} 1F1(alpha, 1+alpha, y0 nu_t) with
    zeta_t = 2 kappa/(gamma^2 (1 - e^{-kappa t})), nu_t = zeta_t e^{-kappa t}.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    alpha = cir_shape_alpha(kappa, ybar, gamma)
    if alpha <= 0:
        raise ValueError("requires 2 ybar kappa > gamma^2")
    zeta = 2.0 * kappa / (gamma**2 * -math.expm1(-kappa * t))
    nu = zeta * math.exp(-kappa * t)
    y0 = np.asarray(y0, dtype=float)
    out = zeta / alpha * _scaled_hyp_ratio(alpha, y0 * nu)
    return out if out.ndim else float(out)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(96)


def _integrate_01(fn, upper: float):
    """Gauss-Legendre integral of fn over (0, upper)."""
    u = 0.5 * upper * (_GL_NODES + 1.0)
    w = 0.5 * upper * _GL_WEIGHTS
    return fn(u) @ w


def three_halves_vix2(model: ThreeHalves, z, tau: float):
    """Exact squared vol index: the time-average of E[1/Y] from state z.

    VIX^2 = (1/tau) int_0^tau E[ Z_{T+u} | Z_T = z ] du with Z = 1/Y;
    vectorized over the state.
    """
    z = np.asarray(z, dtype=float)
    y0 = 1.0 / z

    def fn(u):
        return np.stack([
            cir_mean_reciprocal(model.kappa, model.ybar, model.gamma, y0, ui)
            for ui in u
        ], axis=-1)

    out = _integrate_01(fn, tau) / tau
    return out if out.ndim else float(out)


def three_halves_vix2_approx(model: ThreeHalves, z, tau: float):
    """Second-order expansion of the squared vol index in the CIR state.

    (1/tau) int [ 1/Y - (E Y_u - Y)/Y^2 + E (Y_u - Y)^2 / Y^3 ] du using
    the CIR conditional mean and variance in closed form.  Heavier in the
    small-Y tail than the exact transform: usable as a pricing shortcut
    near the mean, not for moment-boundary work.
    """
    z = np.asarray(z, dtype=float)
    y = 1.0 / z
    kap, ybar, gam = model.kappa, model.ybar, model.gamma

    def fn(u):
        e = np.exp(-kap * u)
        m = ybar + (y[..., None] - ybar) * e           # conditional mean
        var = (y[..., None] * gam**2 / kap * (e - e * e)
               + ybar * gam**2 / (2 * kap) * (1 - e) ** 2)
        s2 = var + (m - y[..., None]) ** 2
        yy = y[..., None]
        return 1.0 / yy - (m - yy) / yy**2 + s2 / yy**3

    out = _integrate_01(fn, tau) / tau
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# CEV volatility process
# ---------------------------------------------------------------------------

def cev_vol_density(c: float, y0: float, T: float, z):
    """Transition density of dY = c Y^2 dB at horizon T.

    The unit-c density evaluated at the rescaled horizon T c^2 (the law
    scales time by c^2).
    """
    if c <= 0 or y0 <= 0 or T <= 0:
        raise ValueError("c, y0, T must be positive")
    tt = T * c * c
    z = np.asarray(z, dtype=float)
    pref = y0 / z**3 / math.sqrt(2.0 * math.pi * tt)
    out = pref * (np.exp(-((1.0 / z - 1.0 / y0) ** 2) / (2.0 * tt))
                  - np.exp(-((1.0 / z + 1.0 / y0) ** 2) / (2.0 * tt)))
    return out if out.ndim else float(out)


def cev_vol_moments(c: float, y0: float, T: float, which: str,
                    strike: float | None = None) -> float:
    """Closed-form moments of the quadratic-volatility diffusion.

    ``which`` is one of ``mean``, ``second_moment``, ``log_mean``,
    ``call`` (the last needs ``strike``).  All formulas are the unit-c
    ones evaluated at the rescaled horizon ``T c^2``:

    * mean:   y (1 - 2 Phi(-1/(y sqrt T)))
    * second: sqrt(2 y^2 / T) D+(1/(y sqrt(2T)))
    * log:    (euler_gamma + log(2/T) + dF(x) - 2)/2 at x = -1/(2 T y^2),
              dF the a-derivative of 1F1(a, 3/2, x) at a = 0
    * call:   y (Phi(kap - del) - Phi(-del) + Phi(del) - Phi(del + kap))
              - K (Phi(kap + del) - Phi(del - kap)
                   + (phi(kap + del) - phi(kap - del))/del)
    """
    if c <= 0 or y0 <= 0 or T <= 0:
        raise ValueError("c, y0, T must be positive")
    tt = T * c * c
    if which == "mean":
        return y0 * (1.0 - 2.0 * norm_cdf(-1.0 / (y0 * math.sqrt(tt))))
    if which == "second_moment":
        return math.sqrt(2.0 * y0**2 / tt) * float(dawson(1.0 / (y0 * math.sqrt(2.0 * tt))))
    if which == "log_mean":
        x = -1.0 / (2.0 * tt * y0**2)
        dF = quad(lambda u: (float(hyp1f1(1.0, 1.5, u)) - 1.0) / u, 0.0, x,
                  limit=600)[0]
        return 0.5 * (-2.0 + np.euler_gamma + math.log(2.0 / tt) + dF)
    if which == "call":
        if strike is None or strike <= 0:
            raise ValueError("call moment needs a positive strike")
        delta = 1.0 / (y0 * math.sqrt(tt))
        kap = 1.0 / (strike * math.sqrt(tt))
        term_y = y0 * (norm_cdf(kap - delta) - norm_cdf(-delta)
                       + norm_cdf(delta) - norm_cdf(delta + kap))
        term_k = strike * (norm_cdf(kap + delta) - norm_cdf(delta - kap)
                           + (norm_pdf(kap + delta) - norm_pdf(kap - delta)) / delta)
        return float(term_y - term_k)
    raise ValueError(f"unknown moment {which!r}")


# ---------------------------------------------------------------------------
# exponential OU
# ---------------------------------------------------------------------------

def exp_ou_vix2(model: ExpOU, y, tau: float):
    """Squared vol index from state y: (1/tau) int e^{2 m(u) + 2 v(u)} du
    with the OU conditional mean m and variance v started at y."""
    y = np.asarray(y, dtype=float)
    kap, ybar, gam = model.kappa, model.ybar, model.gamma

    def fn(u):
        e = np.exp(-kap * u)
        m = ybar + (y[..., None] - ybar) * e
        v = gam**2 / (2.0 * kap) * (1.0 - e * e)
        return np.exp(2.0 * m + 2.0 * v)

    out = _integrate_01(fn, tau) / tau
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# jumps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JumpAdjustment:
    variance_swap_rate: float
    additive_premium: float
    q_multiplier: float


def jump_adjustments(overlay: JumpOverlay, vix2: float) -> JumpAdjustment:
    """Corrections linking the squared vol index to the variance-swap rate.

    Additive form: rate = vix2 - 2 lam E[e^Y - 1 - Y - Y^2/2].
    Multiplier form for a time-changed Levy log-return X (unit diffusion
    plus the compound-Poisson jumps): Q = Var(X_1)/(log E e^{X_1} - E X_1),
    equal to 2 in the continuous case.
    """
    j = overlay.jumps
    lam = overlay.lam
    convexity = j.exp_moment() - 1.0 - j.first_moment() - 0.5 * j.second_moment()
    additive = -2.0 * lam * convexity
    var_x = 1.0 + lam * j.second_moment()
    denom = 0.5 + lam * (j.exp_moment() - 1.0) - lam * j.first_moment()
    q_mult = var_x / denom
    return JumpAdjustment(variance_swap_rate=vix2 + additive,
                          additive_premium=additive, q_multiplier=q_mult)


# ---------------------------------------------------------------------------
# moment boundaries and the summary table
# ---------------------------------------------------------------------------

def moment_boundary(model: ModelSpec, t: float, T: float,
                    tau: float) -> MomentBoundary:
    """Closed-form finiteness boundaries at horizon (t, T, T + tau).

    ``xi_tilde`` bounds the MGF of the squared vol index at T seen from
    t; ``q_tilde`` bounds negative moments of the price at T + tau;
    ``p_tilde`` bounds E S^{1+p} where the literature provides it (None
    where it does not).
    """
    if T <= t:
        raise ValueError("need T > t")
    if isinstance(model, CevPrice):
        if model.cap is None:
            return MomentBoundary(
                xi_tilde=0.0, q_tilde=0.0, p_tilde=math.inf,
                notes="uncapped: the vol index is infinite with positive "
                      "probability, so its moments and MGF explode and no "
                      "negative price moment exists",
            )
        return MomentBoundary(
            xi_tilde=math.inf, q_tilde=1.0, p_tilde=math.inf,
            notes=f"variance cap M={model.cap:g}: index bounded by sqrt(M); "
                  "negative moments shown for q <= 1 via the e^{qM} bound",
        )
    if isinstance(model, Sabr):
        p_tilde = model.rho**2 / (1.0 - model.rho**2)
        return MomentBoundary(
            xi_tilde=0.0, q_tilde=0.0, p_tilde=p_tilde,
            notes="lognormal volatility: every index moment is finite yet the "
                  "MGF explodes for every xi > 0, hence no negative price moments",
        )
    if isinstance(model, CevVol):
        return MomentBoundary(
            xi_tilde=1.5 * tau * model.c**2,
            q_tilde=0.5 * (math.sqrt(1.0 + model.c**2) - 1.0),
            p_tilde=None,
            notes="positive price-moment order not derived in the source "
                  "analysis; left unpopulated",
        )
    if isinstance(model, Heston):
        kt = model.kappa * tau
        xi_tilde = 2.0 * model.kappa**2 * tau / (
            model.gamma**2 * -math.expm1(-model.kappa * (T - t))
            * -math.expm1(-kt))
        q_tilde = _heston_q_tilde(model, T + tau - t)
        return MomentBoundary(
            xi_tilde=xi_tilde, q_tilde=q_tilde, p_tilde=None,
            notes="q_tilde solves T*(q) = horizon; per-q explosion times via "
                  "heston_explosion_time",
        )
    if isinstance(model, ExpOU):
        return MomentBoundary(
            xi_tilde=0.0, q_tilde=0.0, p_tilde=None,
            notes="Gaussian log-volatility: every index moment finite, MGF "
                  "infinite for every xi > 0, hence no negative price moments",
        )
    if isinstance(model, ThreeHalves):
        alpha = cir_shape_alpha(model.kappa, model.ybar, model.gamma)
        return MomentBoundary(
            xi_tilde=0.5 * model.gamma**2 * tau * alpha * (alpha + 1.0),
            q_tilde=0.5 * (math.sqrt(1.0 + model.gamma**2 * alpha**2) - 1.0),
            p_tilde=None,
            notes=f"cir_shape_alpha={alpha:g}",
        )
    raise TypeError(f"unknown model {type(model).__name__}")


@dataclass(frozen=True)
class TableCell:
    quantifier: str           # none / all / above / at_or_above / conditional
    expr: str
    value: float | None = None


@dataclass(frozen=True)
class TableRow:
    model: str
    vix_moment: TableCell     # E VIX^p = inf for ...
    mgf: TableCell            # E e^{xi VIX^2} = inf for ...
    neg_moment: TableCell     # E S_{T+tau}^{-q} = inf for ...


def summary_table(models: dict[str, ModelSpec] | None = None,
                  t: float = 0.0, T: float = 41.0 / 365.0,
                  tau: float = 30.0 / 365.0) -> list[TableRow]:
    """Moment-relationship table across the model zoo.

    Without ``models`` the rows are symbolic (no numeric thresholds);
    with instances the thresholds are evaluated through
    :func:`moment_boundary` at the given horizons.
    """
    def boundary(key):
        if models is not None and key in models:
            return moment_boundary(models[key], t, T, tau)
        return None

    rows = []
    b = boundary("cev_price")
    rows.append(TableRow(
        "cev_price",
        TableCell("all", "p > 0"),
        TableCell("all", "xi > 0"),
        TableCell("all", "q > 0"),
    ))
    b = boundary("sabr")
    rows.append(TableRow(
        "sabr",
        TableCell("none", "p = inf"),
        TableCell("all", "xi > 0"),
        TableCell("all", "q > 0"),
    ))
    b = boundary("cev_vol")
    rows.append(TableRow(
        "cev_vol",
        TableCell("above", "p > 3", 3.0),
        TableCell("above", "xi > 3 tau c^2 / 2",
                  None if b is None else b.xi_tilde),
        TableCell("above", "q > (sqrt(1 + c^2) - 1)/2",
                  None if b is None else b.q_tilde),
    ))
    b = boundary("heston")
    rows.append(TableRow(
        "heston",
        TableCell("none", "p = inf"),
        TableCell("at_or_above",
                  "xi >= 2 kappa^2 tau / (gamma^2 (1 - e^{-kappa (T-t)}) "
                  "(1 - e^{-kappa tau}))",
                  None if b is None else b.xi_tilde),
        TableCell("conditional",
                  "q > 0 with (q gamma rho + kappa)^2 < gamma^2 q (1+q) "
                  "and T + tau >= T*(q)",
                  None if b is None else b.q_tilde),
    ))
    b = boundary("three_halves")
    rows.append(TableRow(
        "three_halves",
        TableCell("none", "p = inf"),
        TableCell("at_or_above", "xi >= gamma^2 tau alpha (alpha + 1)/2",
                  None if b is None else b.xi_tilde),
        TableCell("above", "q > (sqrt(1 + gamma^2 alpha^2) - 1)/2",
                  None if b is None else b.q_tilde),
    ))
    b = boundary("exp_ou")
    rows.append(TableRow(
        "exp_ou",
        TableCell("none", "p = inf"),
        TableCell("all", "xi > 0"),
        TableCell("all", "q > 0"),
    ))
    return rows


def render_summary_table(rows: list[TableRow]) -> str:
    header = f"{'model':<14}| {'E VIX^p = inf':<22}| {'E e^(xi VIX^2) = inf':<46}| E S^(-q) = inf"
    lines = [header, "-" * len(header)]

    def cell(c: TableCell) -> str:
        if c.value is None or not math.isfinite(c.value):
            return c.expr
        return f"{c.expr}  [= {c.value:.6g}]"

    for r in rows:
        lines.append(f"{r.model:<14}| {cell(r.vix_moment):<22}| "
                     f"{cell(r.mgf):<46}| {cell(r.neg_moment)}")
    return "\n".join(lines)
