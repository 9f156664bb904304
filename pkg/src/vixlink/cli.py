"""Command-line interface.

Chains come in as CSV (see market_data), model parameters as flat
key-value sections in an INI-style file:

    [heston]
    kappa = 2.0
    ybar = 0.04
    gamma = 0.25
    rho = -0.7
    y0 = 0.04
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import sys

import numpy as np

from . import (
    CevPrice, CevVol, ExpOU, Heston, Sabr, SimConfig, ThreeHalves,
    arbitrage_portfolio_on_violation, beta_from_slice, build_tail_report,
    check_mgf_inequality, empirical_mgf, empirical_negative_moment,
    estimate_vix, gpd_tail, heston_vix2_mgf, implied_vol, mgf_claim_vix_strip,
    moment_boundary, moment_claim_vix_strip, parse_chain, pot_ratio,
    power_claim_call_strip, power_claim_put_strip, render_summary_table,
    simulate, summary_table, svi_density, svi_fit, three_halves_neg_moment,
    three_halves_vix2, vix_from_strip,
)
from .market_data import Kind

MODEL_TYPES = {
    "cev_price": CevPrice, "sabr": Sabr, "cev_vol": CevVol,
    "heston": Heston, "exp_ou": ExpOU, "three_halves": ThreeHalves,
}


def _load_slice(path):
    with open(path, "rb") as fh:
        return parse_chain(fh.read())


def _parse_tau(raw: str) -> float:
    if raw.endswith("d"):
        return float(raw[:-1]) / 365.0
    return float(raw)


def _load_models(path) -> dict:
    cfg = configparser.ConfigParser()
    with open(path) as fh:
        cfg.read_file(fh)
    out = {}
    for section in cfg.sections():
        if section not in MODEL_TYPES:
            raise SystemExit(f"unknown model section [{section}]")
        kwargs = {k: float(v) for k, v in cfg[section].items()}
        out[section] = MODEL_TYPES[section](**kwargs)
    return out


def _write_weights(path, strip):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["strike", "weight"])
        if strip.weights is not None:
            for k, wt in zip(strip.weights.strikes, strip.weights.weights):
                w.writerow([repr(k), repr(wt)])


def cmd_implied_vol(args):
    slc = _load_slice(args.chain)
    w = csv.writer(sys.stdout)
    w.writerow(["strike", "kind", "price", "implied_vol"])
    for q in slc.quotes:
        try:
            vol = implied_vol(q.price, slc.forward, q.strike, slc.ttm,
                              slc.discount, q.kind)
        except ValueError:
            vol = float("nan")
        w.writerow([q.strike, "C" if q.kind is Kind.CALL else "P", q.price,
                    f"{vol:.10g}"])


def cmd_vix_index(args):
    slc = _load_slice(args.chain)
    res = vix_from_strip(slc, _parse_tau(args.tau))
    print(json.dumps({"vix": res.value, "error_bound": res.error_bound,
                      "diagnostics": {k: v for k, v in res.diagnostics.items()
                                      if isinstance(v, (int, float, str))}}))


def cmd_strip(args):
    slc = _load_slice(args.chain)
    tau = _parse_tau(args.tau)
    if args.claim == "vix2mgf":
        res = mgf_claim_vix_strip(slc, args.xi)
    elif args.claim == "negpower":
        res = power_claim_put_strip(slc, args.xi, args.q, tau)
    elif args.claim == "pospower":
        res = power_claim_call_strip(slc, args.xi, args.p, tau)
    elif args.claim == "moment":
        res = moment_claim_vix_strip(slc, args.n)
    else:
        raise SystemExit(f"unknown claim {args.claim}")
    print(json.dumps({"claim": args.claim, "value": res.value,
                      "error_bound": res.error_bound,
                      "divergent": res.divergent}))
    if args.emit_weights:
        _write_weights(args.emit_weights, res)


def cmd_tails(args):
    spx_t = _load_slice(args.spx_chain)
    spx_tt = _load_slice(args.spx_next_chain)
    vix = _load_slice(args.vix_chain)
    report = build_tail_report(spx_t, spx_tt, vix, args.xi, args.p,
                               estimator=args.estimator)
    print(json.dumps(report.to_dict(), indent=2))
    if args.margin_csv:
        xis = [float(x) for x in args.sweep.split(",")] if args.sweep \
            else list(np.linspace(0.1, 1.0, 10) * args.xi)
        with open(args.margin_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["xi", "margin", "pi1", "pi2", "pi3"])
            for x in xis:
                r = check_mgf_inequality(spx_t, spx_tt, vix, x, args.p)
                w.writerow([x, r.margin, r.triple.pi1, r.triple.pi2,
                            r.triple.pi3])
    if report.inequality_margin <= 0:
        res = check_mgf_inequality(spx_t, spx_tt, vix, args.xi, args.p)
        trades = arbitrage_portfolio_on_violation(res, spx_t, spx_tt, vix)
        print(f"# VIOLATION: entry cash flow {trades.entry_cash_flow:.6g} "
              f"({len(trades.legs)} legs)", file=sys.stderr)


def cmd_svi_fit(args):
    slc = _load_slice(args.chain)
    fit = svi_fit(slc)
    p = fit.params
    print(json.dumps({"a": p.a, "b": p.b, "rho": p.rho, "m": p.m,
                      "sigma": p.sigma, "rmse": fit.rmse,
                      "right_slope": p.right_slope,
                      "slope_cap_ok": fit.slope_cap_ok}))
    if args.emit_density:
        ks = np.linspace(p.m - 10 * p.sigma, 5.0, 1501)
        dens = svi_density(p, ks)
        with open(args.emit_density, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["log_moneyness", "density"])
            for k, d in zip(ks, dens):
                w.writerow([repr(float(k)), repr(float(d))])


def cmd_gpd(args):
    tail = gpd_tail(args.beta)
    print(json.dumps({"alpha": tail.alpha, "beta_r": tail.beta_r,
                      "scale_rule": tail.scale_rule}))
    if args.pot_csv:
        ys = np.linspace(0.0, 3.0 * tail.alpha, 31)
        with open(args.pot_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["y", "gpd_survival"])
            for y in ys:
                w.writerow([float(y), float(tail.survival(y))])


def cmd_model_table(args):
    models = _load_models(args.params) if args.params else None
    rows = summary_table(models, t=args.t, T=args.T, tau=_parse_tau(args.tau))
    print(render_summary_table(rows))


def cmd_model_eval(args):
    models = _load_models(args.params)
    model = models[args.model]
    tau = _parse_tau(args.tau)
    if args.op in ("xi-tilde", "q-tilde", "p-tilde"):
        b = moment_boundary(model, args.t, args.T, tau)
        val = {"xi-tilde": b.xi_tilde, "q-tilde": b.q_tilde,
               "p-tilde": b.p_tilde}[args.op]
        print(json.dumps({"model": args.model, "op": args.op, "value": val,
                          "notes": b.notes}))
    elif args.op == "vix2-mgf":
        if not isinstance(model, Heston):
            raise SystemExit("vix2-mgf evaluation is for the heston section")
        res = heston_vix2_mgf(model, args.xi, args.t, args.T, tau)
        print(json.dumps({"value": res.value, "divergent": res.divergent}))
    elif args.op == "neg-moment":
        if not isinstance(model, ThreeHalves):
            raise SystemExit("neg-moment evaluation is for the three_halves section")
        val = three_halves_neg_moment(model, args.q, args.T)
        print(json.dumps({"value": val, "divergent": not math.isfinite(val)}))
    else:
        raise SystemExit(f"unknown op {args.op}")


def cmd_simulate(args):
    models = _load_models(args.params)
    model = models[args.model]
    config = SimConfig(n_paths=args.paths, n_steps=args.steps, seed=args.seed,
                       scheme=args.scheme, antithetic=args.antithetic)
    bundle = simulate(model, args.horizon, config)
    print(json.dumps({
        "mean_terminal_price": float(bundle.terminal_price.mean()),
        "mean_terminal_state": float(bundle.terminal_state.mean()),
        "mean_realized_variance": float(bundle.realized_variance.mean()),
    }))
    if args.emit:
        with open(args.emit, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["path", "terminal_price", "terminal_state",
                        "realized_variance"])
            for i in range(len(bundle.terminal_price)):
                w.writerow([i, repr(float(bundle.terminal_price[i])),
                            repr(float(bundle.terminal_state[i])),
                            repr(float(bundle.realized_variance[i]))])


def cmd_verify_boundary(args):
    models = _load_models(args.params)
    model = models[args.model]
    tau = _parse_tau(args.tau)
    b = moment_boundary(model, args.t, args.T, tau)
    ok = True
    if args.quantity == "xi-tilde":
        if isinstance(model, Heston):
            lo = heston_vix2_mgf(model, 0.9 * b.xi_tilde, args.t, args.T, tau)
            hi = heston_vix2_mgf(model, 1.1 * b.xi_tilde, args.t, args.T, tau)
            checks = [("finite at 0.9 * xi_tilde", not lo.divergent),
                      ("divergent at 1.1 * xi_tilde", hi.divergent)]
        elif isinstance(model, ThreeHalves):
            cfg = SimConfig(n_paths=args.paths, n_steps=64, seed=args.seed,
                            scheme="exact_cir")
            bundle = simulate(model, args.T, cfg)
            vix2 = three_halves_vix2(model, bundle.terminal_state, tau)
            lo = empirical_mgf(np.sqrt(vix2), 0.9 * b.xi_tilde)
            hi = empirical_mgf(np.sqrt(vix2), 1.1 * b.xi_tilde)
            checks = [("stable at 0.9 * xi_tilde", not lo.flagged),
                      ("flagged at 1.1 * xi_tilde", hi.flagged)]
        else:
            raise SystemExit("xi-tilde verification supports heston and three_halves")
    elif args.quantity == "q-tilde":
        cfg = SimConfig(n_paths=args.paths, n_steps=args.steps, seed=args.seed)
        bundle = simulate(model, args.T + tau - args.t, cfg)
        lo = empirical_negative_moment(bundle.terminal_price, 0.9 * b.q_tilde)
        hi = empirical_negative_moment(bundle.terminal_price, 1.1 * b.q_tilde)
        checks = [("stable at 0.9 * q_tilde", not lo.flagged),
                  ("flagged at 1.1 * q_tilde", hi.flagged)]
    else:
        raise SystemExit(f"unknown quantity {args.quantity}")
    for label, passed in checks:
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {args.model} {label}")
    raise SystemExit(0 if ok else 1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vixlink")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("implied-vol", help="echo a chain with a vol column")
    p.add_argument("--chain", required=True)
    p.set_defaults(fn=cmd_implied_vol)

    p = sub.add_parser("vix-index", help="strip-replicated volatility index")
    p.add_argument("--chain", required=True)
    p.add_argument("--tau", default="30d")
    p.set_defaults(fn=cmd_vix_index)

    p = sub.add_parser("strip", help="value a replication strip")
    p.add_argument("--claim", required=True,
                   choices=["vix2mgf", "negpower", "pospower", "moment"])
    p.add_argument("--chain", required=True)
    p.add_argument("--xi", type=float, default=0.0)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--n", type=float, default=2.0)
    p.add_argument("--tau", default="30d")
    p.add_argument("--emit-weights")
    p.set_defaults(fn=cmd_strip)

    p = sub.add_parser("tails", help="tail report and inequality margin")
    p.add_argument("--spx-chain", required=True)
    p.add_argument("--spx-next-chain", required=True)
    p.add_argument("--vix-chain", required=True)
    p.add_argument("--xi", type=float, required=True)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--estimator", default="extreme_quote",
                   choices=["extreme_quote", "regression"])
    p.add_argument("--sweep")
    p.add_argument("--margin-csv")
    p.set_defaults(fn=cmd_tails)

    p = sub.add_parser("svi-fit", help="fit the smile of one slice")
    p.add_argument("--chain", required=True)
    p.add_argument("--emit-density")
    p.set_defaults(fn=cmd_svi_fit)

    p = sub.add_parser("gpd", help="tail shape from a right slope")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--pot-csv")
    p.set_defaults(fn=cmd_gpd)

    p = sub.add_parser("model-table", help="moment-relationship table")
    p.add_argument("--params")
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--T", type=float, default=41.0 / 365.0)
    p.add_argument("--tau", default="30d")
    p.set_defaults(fn=cmd_model_table)

    p = sub.add_parser("model-eval", help="evaluate one model quantity")
    p.add_argument("--model", required=True, choices=sorted(MODEL_TYPES))
    p.add_argument("--op", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--T", type=float, default=41.0 / 365.0)
    p.add_argument("--tau", default="30d")
    p.add_argument("--xi", type=float, default=0.0)
    p.add_argument("--q", type=float, default=0.1)
    p.set_defaults(fn=cmd_model_eval)

    p = sub.add_parser("simulate", help="Monte Carlo paths")
    p.add_argument("--model", required=True, choices=sorted(MODEL_TYPES))
    p.add_argument("--params", required=True)
    p.add_argument("--paths", type=int, default=10000)
    p.add_argument("--steps", type=int, default=256)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--scheme", default="euler_log",
                   choices=["exact_cir", "euler_log", "milstein"])
    p.add_argument("--antithetic", action="store_true")
    p.add_argument("--horizon", type=float, default=41.0 / 365.0)
    p.add_argument("--emit")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("verify-boundary",
                       help="0.9x/1.1x bracket check of a moment boundary")
    p.add_argument("--model", required=True, choices=sorted(MODEL_TYPES))
    p.add_argument("--params", required=True)
    p.add_argument("--quantity", required=True, choices=["xi-tilde", "q-tilde"])
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--T", type=float, default=41.0 / 365.0)
    p.add_argument("--tau", default="30d")
    p.add_argument("--paths", type=int, default=20000)
    p.add_argument("--steps", type=int, default=256)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(fn=cmd_verify_boundary)

    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    args.fn(args)


if __name__ == "__main__":
    main()
