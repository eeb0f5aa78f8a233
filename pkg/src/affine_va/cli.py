"""Batch command-line front-end.

Subcommands:

* ``price``            -- closed-form leg prices, JSON report
* ``verify``           -- closed form vs Monte Carlo per leg, pass/fail table
* ``sweep``            -- one-parameter sweep, CSV with one row per value
* ``check-martingale`` -- martingale calibration residuals plus an MC check

Exit codes: 0 success (verify/check: all checks passed), 1 a verification
check failed, 2 configuration error, 3 domain/contract error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .contracts import load_contract
from .coordinates import load_model, stock_values
from .errors import (
    ConfigError,
    DimensionError,
    DomainError,
    UnsupportedContractError,
    UnsupportedCopulaError,
)
from .hazards import load_loadings
from .oracle import LEGS, compare, mc_leg, simulate
from .pricing import QuadratureSpec, price_db, price_gmab, price_premium_leg, price_sb, price_va

_CONFIG_ERRORS = (ConfigError, DimensionError, FileNotFoundError, IsADirectoryError, KeyError)
_DOMAIN_ERRORS = (DomainError, OverflowError, UnsupportedContractError, UnsupportedCopulaError)


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _quad_from_args(args) -> QuadratureSpec:
    return QuadratureSpec(w=args.w, lambda_max=args.lambda_max, n_nodes=args.nodes)


def _load_all(args):
    model = load_model(args.model)
    contract = load_contract(args.contract)
    loadings = load_loadings(args.loadings)
    loadings.validate_for_model(model)
    if contract.maturity < 1:
        raise ConfigError("contract maturity must be >= 1")
    return model, contract, loadings


def cmd_price(args) -> int:
    model, contract, loadings = _load_all(args)
    report = price_va(model, contract, loadings, _quad_from_args(args))
    payload = json.dumps(report.to_json_dict(), indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload + "\n")
    else:
        print(payload)
    return 0


def cmd_verify(args) -> int:
    model, contract, loadings = _load_all(args)
    quad = _quad_from_args(args)
    closed = {
        "premium": price_premium_leg(model, contract, loadings),
        "sb": price_sb(model, contract, loadings),
        "gmab": price_gmab(model, contract, loadings, quad),
        "db": price_db(model, contract, loadings, quad),
    }
    ensemble = simulate(model, contract.maturity, args.paths, args.seed)
    all_pass = True
    print(f"{'leg':<8} {'closed':>14} {'mc_mean':>14} {'stderr':>12} {'sigma':>8}  verdict")
    for leg in LEGS:
        est = mc_leg(leg, model, contract, loadings, None, ensemble, mode="g_weighted")
        verdict = compare(closed[leg], est)
        all_pass &= verdict.passed
        print(f"{leg:<8} {closed[leg]:>14.6f} {est.mean:>14.6f} {est.stderr:>12.3g} "
              f"{verdict.sigma_distance:>8.2f}  {'pass' if verdict.passed else 'FAIL'}")
    return 0 if all_pass else 1


def _sweep_values(args):
    if args.values:
        vals = [float(v) for v in args.values.split(",") if v.strip() != ""]
    elif args.range:
        try:
            lo, hi, n = args.range.split(":")
            lo, hi, n = float(lo), float(hi), int(n)
        except ValueError:
            raise ConfigError(f"bad --range {args.range!r}, expected lo:hi:n") from None
        if n < 1:
            raise ConfigError("sweep range needs at least one point")
        vals = [lo + (hi - lo) * i / max(n - 1, 1) for i in range(n)]
    else:
        vals = []
    if not vals:
        raise ConfigError("empty sweep range")
    return vals


_SWEEP_PARAMS = ("delta", "penalty_scale", "hazard_scale_m", "hazard_scale_s", "w")


def cmd_sweep(args) -> int:
    if args.param not in _SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {args.param!r}; expected one of {_SWEEP_PARAMS}")
    values = _sweep_values(args)
    model, contract, loadings = _load_all(args)
    quad = _quad_from_args(args)
    cols = ["parameter", "value", "premium_leg", "gmab", "sb", "db", "va_total"]
    rows = []
    for v in values:
        c, l, q = contract, loadings, quad
        if args.param == "delta":
            c = contract.with_delta(v)
        elif args.param == "penalty_scale":
            c = contract.with_penalty_scale(v)
        elif args.param == "hazard_scale_m":
            l = loadings.scaled(mortality_factor=v)
        elif args.param == "hazard_scale_s":
            l = loadings.scaled(surrender_factor=v)
        else:
            q = QuadratureSpec(w=v, lambda_max=quad.lambda_max, n_nodes=quad.n_nodes)
        report = price_va(model, c, l, q)
        rows.append([args.param, v, report.premium_leg, report.gmab, report.sb,
                     report.db, report.va_total])
    lines = [",".join(cols)]
    for row in rows:
        lines.append(row[0] + "," + ",".join(_fmt(v) for v in row[1:]))
    csv_text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    for j, col in enumerate(cols[2:], start=2):
        series = [row[j] for row in rows]
        nondec = all(b >= a - 1e-12 for a, b in zip(series, series[1:]))
        noninc = all(b <= a + 1e-12 for a, b in zip(series, series[1:]))
        print(f"# {col} nondecreasing: {nondec} nonincreasing: {noninc}")
    return 0


def cmd_check_martingale(args) -> int:
    model = load_model(args.model)
    ok, residual = model.martingale_residual()
    print(f"calibration residual: {residual:.3e} ({'pass' if ok else 'FAIL'})")
    ensemble = simulate(model, args.horizon, args.paths, args.seed)
    s = stock_values(model, ensemble.z_paths[..., model.d1:])
    worst = 0.0
    for t in range(args.horizon):
        ratios = s[:, t + 1] / s[:, t]
        stderr = ratios.std(ddof=1) / len(ratios) ** 0.5
        sigma = abs(ratios.mean() - 1.0) / stderr if stderr > 0 else 0.0
        worst = max(worst, sigma)
    mc_ok = worst <= 4.0
    print(f"mc one-step ratio: worst sigma distance {worst:.2f} over {args.horizon} steps "
          f"({'pass' if mc_ok else 'FAIL'})")
    return 0 if ok and mc_ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="affine-va",
                                     description="Variable-annuity valuation engine")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, contract=True):
        p.add_argument("--model", required=True, help="model JSON path")
        if contract:
            p.add_argument("--contract", required=True, help="contract JSON path")
            p.add_argument("--loadings", required=True, help="loadings JSON path")
        p.add_argument("--seed", type=int, default=12345)
        p.add_argument("--paths", type=int, default=100_000)
        p.add_argument("--out", default=None, help="output file (default stdout)")
        p.add_argument("--w", type=float, default=2.0, help="Fourier damping, > 1")
        p.add_argument("--nodes", type=int, default=400, help="quadrature nodes")
        p.add_argument("--lambda-max", type=float, default=200.0, dest="lambda_max")

    p_price = sub.add_parser("price", help="closed-form prices to JSON")
    add_common(p_price)
    p_price.set_defaults(fn=cmd_price)

    p_verify = sub.add_parser("verify", help="closed form vs Monte Carlo")
    add_common(p_verify)
    p_verify.set_defaults(fn=cmd_verify)

    p_sweep = sub.add_parser("sweep", help="parameter sweep to CSV")
    add_common(p_sweep)
    p_sweep.add_argument("--param", required=True, help="|".join(_SWEEP_PARAMS))
    p_sweep.add_argument("--values", default=None, help="comma-separated values")
    p_sweep.add_argument("--range", default=None, help="lo:hi:n inclusive range")
    p_sweep.set_defaults(fn=cmd_sweep)

    p_chk = sub.add_parser("check-martingale", help="martingale calibration checks")
    add_common(p_chk, contract=False)
    p_chk.add_argument("--horizon", type=int, default=12)
    p_chk.set_defaults(fn=cmd_check_martingale)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except _CONFIG_ERRORS as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except _DOMAIN_ERRORS as e:
        print(f"domain error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
