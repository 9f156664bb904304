"""Monte Carlo engine: brute-force oracles for every closed-form claim.

Simulation is deliberately plain: counter-based Philox streams, per-step
vectorized updates, exact transitions where the law is known (CIR via the
noncentral chi-square mixture, lognormal and OU states in closed form),
full-truncation Euler and Milstein retained for cross-checks.  Identical
(seed, config, model) inputs give bit-identical results.

Estimates of moment-boundary quantities come with a tail-sensitivity
diagnostic: when the top 1% of the transformed sample carries more than
half the mean, the estimate is flagged unreliable/divergent.  That is the
finite-sample face of an infinite expectation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .models import (
    CevPrice, CevVol, ExpOU, Heston, JumpOverlay, ModelSpec, Sabr, ThreeHalves,
    cev_vol_moments, exp_ou_vix2, heston_vix_transform, sabr_vix,
    three_halves_vix2, three_halves_vix2_approx,
)

__all__ = [
    "SimConfig", "PathBundle", "EmpiricalEstimate",
    "simulate", "estimate_vix", "empirical_mgf", "empirical_negative_moment",
]

SCHEMES = ("exact_cir", "euler_log", "milstein")
CEV_VOL_GUARD = 1e9  # absorbing overflow guard for the strict local martingale


@dataclass(frozen=True)
class SimConfig:
    n_paths: int
    n_steps: int
    seed: int = 0
    scheme: str = "euler_log"
    antithetic: bool = False

    def __post_init__(self):
        if self.n_paths < 2:
            raise ValueError("n_paths must be >= 2")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme}")


@dataclass(frozen=True)
class PathBundle:
    model: ModelSpec
    horizon: float
    config: SimConfig
    terminal_price: np.ndarray
    terminal_state: np.ndarray     # vol state: Y (or Z for the 3/2 model)
    realized_variance: np.ndarray  # int sigma^2 dt per path (plus jump squares)
    jump_counts: np.ndarray | None = None
    jump_sum: np.ndarray | None = None


@dataclass(frozen=True)
class EmpiricalEstimate:
    value: float
    std_error: float
    top_share: float          # mean share of the top 1% order statistics
    flagged: bool             # unreliable / divergent
    n: int
    diagnostics: dict = field(default_factory=dict)


def _rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(seed, stream)))


def _normals(rng, n, antithetic):
    if not antithetic:
        return rng.standard_normal(n)
    half = (n + 1) // 2
    z = rng.standard_normal(half)
    return np.concatenate([z, -z])[:n]


def simulate(model: ModelSpec, horizon: float, config: SimConfig,
             jumps: JumpOverlay | None = None) -> PathBundle:
    """Simulate terminal price, vol state, and realized variance.

    The exact_cir scheme samples the square-root state from its exact
    transition law and is valid only for models carrying one (Heston and
    the 3/2 model); everything else raises a scheme/model mismatch.
    Realized variance uses the trapezoid of sigma^2 along the path; jump
    squares are added when an overlay is active.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if config.scheme == "exact_cir" and not isinstance(model, (Heston, ThreeHalves)):
        raise ValueError(
            f"exact_cir applies to square-root states only, not "
            f"{type(model).__name__}"
        )
    n, steps = config.n_paths, config.n_steps
    dt = horizon / steps
    rng = _rng(config.seed, 0)

    if isinstance(model, Heston):
        log_s, state, rv = _run_heston(model, n, steps, dt, rng, config)
    elif isinstance(model, ThreeHalves):
        log_s, state, rv = _run_three_halves(model, n, steps, dt, rng, config)
    elif isinstance(model, Sabr):
        log_s, state, rv = _run_sabr(model, n, steps, dt, rng, config)
    elif isinstance(model, CevVol):
        log_s, state, rv = _run_cev_vol(model, n, steps, dt, rng, config)
    elif isinstance(model, ExpOU):
        log_s, state, rv = _run_exp_ou(model, n, steps, dt, rng, config)
    elif isinstance(model, CevPrice):
        price, state, rv = _run_cev_price(model, n, steps, dt, rng, config)
        log_s = None
    else:
        raise TypeError(f"unknown model {type(model).__name__}")

    jump_counts = jump_sum = None
    if jumps is not None and jumps.lam > 0:
        if isinstance(model, CevPrice):
            raise ValueError("jump overlay with a variance cap is not supported")
        jrng = _rng(config.seed, 1)
        jump_counts = jrng.poisson(jumps.lam * horizon, size=n)
        total = int(jump_counts.sum())
        sizes = jrng.normal(jumps.jumps.mean, jumps.jumps.std, size=total)
        edges = np.concatenate([[0], np.cumsum(jump_counts)])
        jump_sum = np.add.reduceat(sizes, edges[:-1]) if total else np.zeros(n)
        jump_sum = np.where(jump_counts > 0, jump_sum, 0.0)
        jump_sq = np.add.reduceat(sizes**2, edges[:-1]) if total else np.zeros(n)
        jump_sq = np.where(jump_counts > 0, jump_sq, 0.0)
        compensator = jumps.lam * (jumps.jumps.exp_moment() - 1.0) * horizon
        log_s = log_s + jump_sum - compensator
        rv = rv + jump_sq

    if log_s is not None:
        price = model.s0 * np.exp(log_s)
    return PathBundle(model=model, horizon=horizon, config=config,
                      terminal_price=price, terminal_state=state,
                      realized_variance=rv,
                      jump_counts=jump_counts, jump_sum=jump_sum)


def _cir_exact_step(rng, y, kappa, ybar, gamma, dt):
    dof = 4.0 * kappa * ybar / gamma**2
    ee = math.exp(-kappa * dt)
    cfac = gamma**2 * (1.0 - ee) / (4.0 * kappa)
    nonc = y * ee / cfac
    return cfac * rng.noncentral_chisquare(dof, nonc)


def _run_heston(model, n, steps, dt, rng, config):
    y = np.full(n, model.y0)
    log_s = np.zeros(n)
    rv = np.zeros(n)
    rho, srho = model.rho, math.sqrt(1.0 - model.rho**2)
    sdt = math.sqrt(dt)
    for _ in range(steps):
        if config.scheme == "exact_cir":
            zw = _normals(rng, n, config.antithetic)
            y_new = _cir_exact_step(rng, y, model.kappa, model.ybar,
                                    model.gamma, dt)
            ivar = 0.5 * (y + y_new) * dt
            int_sqrt_db = (y_new - y - model.kappa * model.ybar * dt
                           + model.kappa * ivar) / model.gamma
            log_s += -0.5 * ivar + rho * int_sqrt_db \
                + srho * np.sqrt(np.maximum(ivar, 0.0)) * zw
        else:
            zw = _normals(rng, n, config.antithetic)
            zb = _normals(rng, n, config.antithetic)
            yp = np.maximum(y, 0.0)
            drift = model.kappa * (model.ybar - yp) * dt
            diff = model.gamma * np.sqrt(yp) * sdt * zb
            y_new = y + drift + diff
            if config.scheme == "milstein":
                y_new = y_new + 0.25 * model.gamma**2 * dt * (zb * zb - 1.0)
            ivar = 0.5 * (yp + np.maximum(y_new, 0.0)) * dt
            log_s += -0.5 * yp * dt + np.sqrt(yp) * sdt * (rho * zb + srho * zw)
        rv += ivar
        y = y_new
    return log_s, y, rv


def _run_three_halves(model, n, steps, dt, rng, config):
    # simulate the reciprocal CIR state Y = 1/Z; sigma^2 = Z
    y = np.full(n, 1.0 / model.z0)
    log_s = np.zeros(n)
    rv = np.zeros(n)
    rho, srho = model.rho, math.sqrt(1.0 - model.rho**2)
    sdt = math.sqrt(dt)
    kap, ybar, gam = model.kappa, model.ybar, model.gamma
    for _ in range(steps):
        zw = _normals(rng, n, config.antithetic)
        if config.scheme == "exact_cir":
            y_new = _cir_exact_step(rng, y, kap, ybar, gam, dt)
            y_new = np.maximum(y_new, 1e-300)
            int_z = 0.5 * (1.0 / y + 1.0 / y_new) * dt
            # int (1/sqrt(Y)) dB from the state path
            int_db = (np.log(y_new / y) + (0.5 * gam**2 - kap * ybar) * int_z
                      + kap * dt) / gam
            log_s += -0.5 * int_z + rho * int_db \
                + srho * np.sqrt(np.maximum(int_z, 0.0)) * zw
        else:
            zb = _normals(rng, n, config.antithetic)
            z = 1.0 / y
            # log-space Euler on Z keeps the state positive
            log_z = np.log(z) + (kap - (kap * ybar - 0.5 * gam**2) * z) * dt \
                - gam * np.sqrt(z) * sdt * zb
            z_new = np.exp(np.minimum(log_z, 690.0))
            int_z = 0.5 * (z + z_new) * dt
            log_s += -0.5 * z * dt + np.sqrt(z) * sdt * (rho * zb + srho * zw)
            y_new = 1.0 / z_new
        rv += int_z
        y = y_new
    return log_s, 1.0 / y, rv


def _run_sabr(model, n, steps, dt, rng, config):
    y = np.full(n, model.y0)
    log_s = np.zeros(n)
    rv = np.zeros(n)
    rho, srho = model.rho, math.sqrt(1.0 - model.rho**2)
    sdt = math.sqrt(dt)
    a = model.sabr_alpha
    for _ in range(steps):
        zw = _normals(rng, n, config.antithetic)
        zb = _normals(rng, n, config.antithetic)
        log_s += -0.5 * y * y * dt + y * sdt * (srho * zw + rho * zb)
        y_new = y * np.exp(a * sdt * zb - 0.5 * a * a * dt)
        rv += 0.5 * (y * y + y_new * y_new) * dt
        y = y_new
    return log_s, y, rv


def _run_cev_vol(model, n, steps, dt, rng, config):
    y = np.full(n, model.y0)
    log_s = np.zeros(n)
    rv = np.zeros(n)
    rho, srho = model.rho, math.sqrt(1.0 - model.rho**2)
    sdt = math.sqrt(dt)
    c = model.c
    alive = np.ones(n, dtype=bool)   # absorbed once the state overflows
    for _ in range(steps):
        zw = _normals(rng, n, config.antithetic)
        zb = _normals(rng, n, config.antithetic)
        log_s_inc = -0.5 * y * y * dt + y * sdt * (srho * zw + rho * zb)
        log_y_inc = c * y * sdt * zb - 0.5 * c * c * y * y * dt
        log_s = np.where(alive, log_s + log_s_inc, log_s)
        y_new = np.where(alive, y * np.exp(np.minimum(log_y_inc, 690.0)), y)
        rv += np.where(alive, 0.5 * (y * y + y_new * y_new) * dt, 0.0)
        alive = alive & (y_new < CEV_VOL_GUARD)
        y = y_new
    return log_s, y, rv


def _run_exp_ou(model, n, steps, dt, rng, config):
    y = np.full(n, model.y0)
    log_s = np.zeros(n)
    rv = np.zeros(n)
    rho, srho = model.rho, math.sqrt(1.0 - model.rho**2)
    sdt = math.sqrt(dt)
    kap, ybar, gam = model.kappa, model.ybar, model.gamma
    ee = math.exp(-kap * dt)
    ou_sd = gam * math.sqrt((1.0 - ee * ee) / (2.0 * kap))
    for _ in range(steps):
        zw = _normals(rng, n, config.antithetic)
        zb = _normals(rng, n, config.antithetic)
        sig = np.exp(y)
        log_s += -0.5 * sig * sig * dt + sig * sdt * (srho * zw + rho * zb)
        y_new = ybar + (y - ybar) * ee + ou_sd * zb
        sig_new = np.exp(y_new)
        rv += 0.5 * (sig * sig + sig_new * sig_new) * dt
        y = y_new
    return log_s, y, rv


def _run_cev_price(model, n, steps, dt, rng, config):
    s = np.full(n, model.s0)
    rv = np.zeros(n)
    sdt = math.sqrt(dt)
    a = model.exponent
    cap = model.cap if model.cap is not None else math.inf
    active = np.ones(n, dtype=bool)
    for _ in range(steps):
        zw = _normals(rng, n, config.antithetic)
        sig2 = np.where(s > 0, s ** (2.0 * (a - 1.0)), 0.0)
        rv_inc = np.where(active, sig2 * dt, 0.0)
        hit = active & (rv + rv_inc >= cap)          # realized-variance stop
        rv_inc = np.where(hit, cap - rv, rv_inc)
        s_new = np.where(active, np.maximum(s + s**a * sdt * zw, 0.0), s)
        s_new = np.where(hit, s, s_new)              # freeze at the stop
        rv += rv_inc
        active = active & ~hit & (s_new > 0)
        s = s_new
    return s, s, rv


# ---------------------------------------------------------------------------
# per-path vol-index estimates
# ---------------------------------------------------------------------------

def _cev_vol_vix2(model: CevVol, y, tau: float):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    from .special import dawson
    nodes, weights = np.polynomial.legendre.leggauss(96)
    u = 0.5 * tau * (nodes + 1.0)
    w = 0.5 * tau * weights
    tt = u * model.c**2
    arg = 1.0 / (y[:, None] * np.sqrt(2.0 * tt[None, :]))
    m2 = np.sqrt(2.0 * y[:, None] ** 2 / tt[None, :]) * dawson(arg)
    return (m2 @ w) / tau


def estimate_vix(model: ModelSpec, bundle: PathBundle, tau: float,
                 mode: str = "transform", inner_paths: int = 256,
                 max_budget: float = 2e8) -> np.ndarray:
    """Per-path vol-index values at the bundle's horizon.

    ``transform`` evaluates each model's conditional map of the terminal
    state (exact for Heston, SABR, exp-OU, quadratic-vol, and the 3/2
    model via its reciprocal-mean formula; ``transform_approx`` selects
    the 3/2 second-order expansion).  ``nested`` re-simulates the index
    window from every terminal state and is available for every model.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    state = bundle.terminal_state
    if mode == "transform":
        if isinstance(model, Heston):
            return np.sqrt(heston_vix_transform(model, state, tau))
        if isinstance(model, Sabr):
            return np.asarray(sabr_vix(model, state, tau))
        if isinstance(model, ExpOU):
            return np.sqrt(exp_ou_vix2(model, state, tau))
        if isinstance(model, ThreeHalves):
            return np.sqrt(three_halves_vix2(model, state, tau))
        if isinstance(model, CevVol):
            return np.sqrt(_cev_vol_vix2(model, state, tau))
        raise ValueError(
            f"no closed transform for {type(model).__name__}; use nested mode"
        )
    if mode == "transform_approx":
        if isinstance(model, ThreeHalves):
            return np.sqrt(three_halves_vix2_approx(model, state, tau))
        raise ValueError("transform_approx applies to the 3/2 model only")
    if mode == "nested":
        return _nested_vix(model, bundle, tau, inner_paths, max_budget)
    raise ValueError(f"unknown mode {mode!r}")


def _nested_vix(model, bundle, tau, inner_paths, max_budget):
    n_outer = len(bundle.terminal_state)
    inner_steps = max(bundle.config.n_steps // 4, 16)
    if n_outer * inner_paths * inner_steps > max_budget:
        raise ValueError(
            f"nested-MC budget exceeded: {n_outer} x {inner_paths} x "
            f"{inner_steps} > {max_budget:g}"
        )
    rng = _rng(bundle.config.seed, 2)
    dt = tau / inner_steps
    sdt = math.sqrt(dt)
    state = np.repeat(bundle.terminal_state[:, None], inner_paths, axis=1)
    if isinstance(model, CevPrice):
        s = state.copy()
        rv = np.zeros_like(s)
        cap = model.cap if model.cap is not None else math.inf
        active = np.ones_like(s, dtype=bool)
        for _ in range(inner_steps):
            z = rng.standard_normal(s.shape)
            sig2 = np.where(s > 0, s ** (2.0 * (model.exponent - 1.0)), 0.0)
            inc = np.where(active, sig2 * dt, 0.0)
            hit = active & (rv + inc >= cap)
            inc = np.where(hit, cap - rv, inc)
            rv += inc
            s_new = np.where(active & ~hit,
                             np.maximum(s + s**model.exponent * sdt * z, 0.0), s)
            active = active & ~hit & (s_new > 0)
            s = s_new
        return np.sqrt(rv.mean(axis=1) / tau)

    rv = np.zeros_like(state)
    y = state.copy()
    if isinstance(model, ThreeHalves):
        y = 1.0 / y   # terminal_state is Z; inner engine walks Y = 1/Z
    for _ in range(inner_steps):
        z = rng.standard_normal(y.shape)
        if isinstance(model, Heston):
            yp = np.maximum(y, 0.0)
            y_new = y + model.kappa * (model.ybar - yp) * dt \
                + model.gamma * np.sqrt(yp) * sdt * z
            rv += 0.5 * (yp + np.maximum(y_new, 0.0)) * dt
        elif isinstance(model, ThreeHalves):
            yp = np.maximum(y, 1e-12)
            y_new = y + model.kappa * (model.ybar - yp) * dt \
                + model.gamma * np.sqrt(yp) * sdt * z
            y_new = np.maximum(y_new, 1e-12)
            rv += 0.5 * (1.0 / yp + 1.0 / y_new) * dt
        elif isinstance(model, Sabr):
            y_new = y * np.exp(model.sabr_alpha * sdt * z
                               - 0.5 * model.sabr_alpha**2 * dt)
            rv += 0.5 * (y * y + y_new * y_new) * dt
        elif isinstance(model, CevVol):
            inc = model.c * y * sdt * z - 0.5 * model.c**2 * y * y * dt
            y_new = y * np.exp(np.minimum(inc, 690.0))
            y_new = np.where(y_new < CEV_VOL_GUARD, y_new, y)
            rv += 0.5 * (y * y + y_new * y_new) * dt
        elif isinstance(model, ExpOU):
            ee = math.exp(-model.kappa * dt)
            sd = model.gamma * math.sqrt((1 - ee * ee) / (2 * model.kappa))
            sig = np.exp(y)
            y_new = model.ybar + (y - model.ybar) * ee + sd * z
            rv += 0.5 * (sig**2 + np.exp(y_new) ** 2) * dt
        else:
            raise ValueError(f"nested mode unsupported for {type(model).__name__}")
        y = y_new
    return np.sqrt(rv.mean(axis=1) / tau)


# ---------------------------------------------------------------------------
# empirical moment estimators with tail diagnostics
# ---------------------------------------------------------------------------

def _empirical(weights: np.ndarray, top_frac: float = 0.01,
               share_threshold: float = 0.5) -> EmpiricalEstimate:
    n = len(weights)
    finite = np.isfinite(weights)
    if not finite.all():
        return EmpiricalEstimate(value=math.inf, std_error=math.inf,
                                 top_share=1.0, flagged=True, n=n,
                                 diagnostics={"non_finite": int((~finite).sum())})
    total = weights.sum()
    mean = total / n
    se = weights.std(ddof=1) / math.sqrt(n)
    k = max(1, int(math.ceil(top_frac * n)))
    top = np.sort(weights)[-k:].sum()
    share = float(top / total) if total > 0 else 1.0
    return EmpiricalEstimate(
        value=float(mean), std_error=float(se), top_share=share,
        flagged=share > share_threshold, n=n,
        diagnostics={"top_count": k},
    )


def empirical_mgf(values: np.ndarray, xi: float) -> EmpiricalEstimate:
    """Sample mean of exp(xi * v^2) with a tail-dominance flag.

    The flag fires when the top 1% of the order statistics carries more
    than half of the sample mean: the finite-sample signature of an
    expectation that does not exist.  The threshold is a heuristic and is
    configurable through :func:`_empirical` if a study needs it.
    """
    v = np.asarray(values, dtype=float)
    if xi == 0.0:
        return EmpiricalEstimate(1.0, 0.0, 0.01, False, len(v))
    with np.errstate(over="ignore"):
        w = np.exp(xi * v * v)
    return _empirical(w)


def empirical_negative_moment(values: np.ndarray, q: float) -> EmpiricalEstimate:
    """Sample mean of v^{-q} with the same tail-dominance diagnostic."""
    if q <= 0:
        raise ValueError("q must be positive")
    v = np.asarray(values, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        w = np.where(v > 0, v ** (-q), np.inf)
    return _empirical(w)
