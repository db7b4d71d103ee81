"""Command-line entry point: ``mvhbond {price,curve,sensitivity,hedge,verify}``.

Exit codes: 0 success, 1 verification failure, 2 input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
import warnings
from typing import Sequence

import numpy as np

from mvhbond.closed_form import a_of_t, b_price
from mvhbond.mc_oracle import (
    FitError,
    default_p0_grid,
    fit_value_function,
    hedge_once,
    simulate_paths,
)
from mvhbond.model import (
    PARAM_FIELDS,
    REFERENCE_PARAMS,
    DomainError,
    ModelParams,
    NumericsConfig,
    load_params,
)
from mvhbond.output import RunManifest, csv_document, json_document, write_text
from mvhbond.pde_oracle import GridError
from mvhbond.pricing import bond_price
from mvhbond.repl_error import c_value
from mvhbond.verify import run_all

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

SWEEPABLE = ("mu1", "theta_bar", "sigma1", "rho", "kappa")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, kappa_list: bool = False) -> None:
    g = p.add_argument_group("model parameters")
    g.add_argument("--params", metavar="FILE", help="JSON parameter file (default: reference block)")
    for name in PARAM_FIELDS:
        if name == "kappa":
            continue
        g.add_argument(f"--{name}", type=float, default=None, dest=f"p_{name}")
    g.add_argument("--theta-bar", type=float, default=None, dest="p_theta_bar",
                   help="set mu2 = theta_bar * sigma2")
    if kappa_list:
        g.add_argument("--kappa", type=float, nargs="+", default=None, dest="kappa_list")
    else:
        g.add_argument("--kappa", type=float, default=None, dest="p_kappa")
    n = p.add_argument_group("numerics")
    n.add_argument("--seed", type=int, default=None)
    n.add_argument("--paths", type=int, default=None)
    n.add_argument("--steps", type=int, default=None)
    n.add_argument("--grid-nu", type=int, default=None)
    n.add_argument("--grid-ntau", type=int, default=None)
    n.add_argument("--quad-points", type=int, default=None)
    o = p.add_argument_group("output")
    o.add_argument("--json", action="store_true", help="emit JSON")
    o.add_argument("--out", metavar="FILE", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mvhbond",
                     description="Mean-variance hedging prices of Merton bonds on a non-traded firm value.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("price", help="a, b, c, c~, discount, B and yield at (t, v)")
    _common(p)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--v", type=float, required=True)

    p = sub.add_parser("curve", help="yield curves over maturities for several v and kappa")
    _common(p, kappa_list=True)
    p.add_argument("--maturities", type=float, nargs="+", default=None,
                   help="maturities T (default 0.25, 0.5, ..., 10)")
    p.add_argument("--v", type=float, nargs="+", default=[66.0, 132.0])

    p = sub.add_parser("sensitivity", help="b, c~, B, yield as one parameter varies")
    _common(p)
    p.add_argument("--param", choices=SWEEPABLE, required=True)
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--values", type=float, nargs="+")
    grp.add_argument("--range", type=float, nargs=3, metavar=("LO", "HI", "N"))
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--v", type=float, nargs="+", required=True)

    p = sub.add_parser("hedge", help="Monte-Carlo hedge at p0, or the quadratic fit over a p0 sweep")
    _common(p)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--v", type=float, required=True)
    p.add_argument("--s0", type=float, default=1.0)
    p.add_argument("--p0", default="auto", help="initial wealth, or 'auto' for b(t, v)")
    p.add_argument("--p0-grid", nargs="+", default=None,
                   help="'auto' or explicit initial wealths; runs the quadratic fit")

    p = sub.add_parser("verify", help="run every cross-check; exit 1 on failure")
    _common(p)
    p.add_argument("--skip-mc", action="store_true", help="skip the Monte-Carlo checks")
    return parser


def _resolve(args) -> tuple[ModelParams, NumericsConfig, dict]:
    base = load_params(args.params, base=REFERENCE_PARAMS) if args.params else REFERENCE_PARAMS
    overrides = {}
    for name in PARAM_FIELDS + ("theta_bar",):
        value = getattr(args, f"p_{name}", None)
        if value is not None:
            overrides[name] = value
    theta_bar = overrides.pop("theta_bar", None)
    params = base.replace(**overrides)
    if theta_bar is not None:
        params = params.replace(theta_bar=theta_bar)
        overrides["theta_bar"] = theta_bar
    num = {}
    for flag, field in (("seed", "rng_seed"), ("paths", "mc_paths"), ("steps", "mc_steps"),
                        ("grid_nu", "grid_nu"), ("grid_ntau", "grid_ntau"),
                        ("quad_points", "quad_points")):
        value = getattr(args, flag)
        if value is not None:
            num[field] = value
    return params, NumericsConfig(**num), overrides


def _manifest(args, params, num, overrides, seed=None) -> RunManifest:
    return RunManifest(command=args.command, params_file=args.params, overrides=overrides,
                       params=params.to_dict(), numerics=num.__dict__.copy(), output=args.out,
                       seed=seed)


def _emit_json(args, manifest, result) -> None:
    write_text(json_document(manifest, result), args.out)


def _text_table(pairs) -> str:
    width = max(len(k) for k, _ in pairs)
    return "".join(f"{k:<{width}}  {format(v, '.10g') if isinstance(v, float) else v}\n"
                   for k, v in pairs)


def cmd_price(args) -> int:
    params, num, overrides = _resolve(args)
    pb = bond_price(params, args.t, args.v, num)
    result = pb.to_dict()
    manifest = _manifest(args, params, num, overrides)
    if args.json or args.out:
        _emit_json(args, manifest, result)
    else:
        write_text(_text_table(list(result.items())), None)
    return EXIT_OK


def _rows_output(args, manifest, header, rows) -> None:
    if args.json:
        _emit_json(args, manifest, [dict(zip(header, r)) for r in rows])
    else:
        write_text(csv_document(manifest, header, rows), args.out)


def cmd_curve(args) -> int:
    params, num, overrides = _resolve(args)
    maturities = args.maturities or [0.25 * k for k in range(1, 41)]
    if any(m <= 0 for m in maturities):
        raise DomainError("maturities", "must be > 0")
    kappas = args.kappa_list if args.kappa_list is not None else [0.0, 10.0, 50.0, 100.0]
    v = np.asarray(args.v, dtype=float)
    header = ["T", "v", "kappa", "b", "c_tilde", "B", "yield"]
    rows = []
    for kappa in kappas:
        for T in maturities:
            q = params.replace(T=T, kappa=kappa)
            pb = bond_price(q, np.zeros_like(v), v, num)
            for j in range(v.size):
                rows.append([float(T), float(v[j]), float(kappa), float(pb.b[j]),
                             float(pb.c_tilde[j]), float(pb.B[j]), float(pb.yield_spread[j])])
    manifest = _manifest(args, params, num, {**overrides, "kappa": kappas})
    _rows_output(args, manifest, header, rows)
    return EXIT_OK


def sweep_values(args) -> list[float]:
    if args.values is not None:
        return [float(x) for x in args.values]
    lo, hi, n = args.range
    if n < 2 or n != int(n):
        raise DomainError("range", "N must be an integer >= 2")
    return np.linspace(lo, hi, int(n)).tolist()


def cmd_sensitivity(args) -> int:
    params, num, overrides = _resolve(args)
    v = np.asarray(args.v, dtype=float)
    header = [args.param, "v", "t", "b", "db_dalpha", "c_tilde", "B", "yield"]
    rows = []
    for x in sweep_values(args):
        q = params.replace(**{args.param: x})
        pb = bond_price(q, np.full_like(v, args.t), v, num)
        db_da = np.atleast_1d(b_price(q, args.t, v).db_dalpha)
        for j in range(v.size):
            rows.append([float(x), float(v[j]), float(args.t), float(pb.b[j]), float(db_da[j]),
                         float(pb.c_tilde[j]), float(pb.B[j]), float(pb.yield_spread[j])])
    _rows_output(args, _manifest(args, params, num, overrides), header, rows)
    return EXIT_OK


def cmd_hedge(args) -> int:
    params, num, overrides = _resolve(args)
    b = float(b_price(params, args.t, args.v).b)
    c = float(c_value(params, args.t, args.v, num).c)
    a = float(a_of_t(params, args.t))
    batch = simulate_paths(params, args.t, args.v, args.s0, num.mc_paths, num.mc_steps,
                           num.rng_seed, num.mc_block)
    if args.p0_grid is not None:
        if args.p0_grid == ["auto"]:
            grid = default_p0_grid(params, args.t, args.v)
        else:
            try:
                grid = np.asarray([float(x) for x in args.p0_grid])
            except ValueError:
                raise DomainError("p0-grid", "expected 'auto' or numbers") from None
        res = fit_value_function(params, args.t, args.v, args.s0, grid, batch)
    else:
        try:
            p0 = b if args.p0 == "auto" else float(args.p0)
        except ValueError:
            raise DomainError("p0", "expected 'auto' or a number") from None
        res = hedge_once(params, args.t, args.v, args.s0, p0, batch)
    out = res.to_dict()
    out["closed_form"] = {"a": a, "b": b, "c": c}
    out["z_score_vs_c"] = ((res.mean_sq_error - c) / res.std_error
                           if res.std_error > 0 else None)
    manifest = _manifest(args, params, num, overrides, seed=num.rng_seed)
    if args.json or args.out:
        _emit_json(args, manifest, out)
    else:
        pairs = [(k, v) for k, v in out.items() if not isinstance(v, (list, dict))]
        pairs += [(f"closed_form.{k}", v) for k, v in out["closed_form"].items()]
        write_text(_text_table(pairs), None)
    return EXIT_OK


def cmd_verify(args) -> int:
    params, num, overrides = _resolve(args)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        report = run_all(params, num, skip_mc=args.skip_mc)
    manifest = _manifest(args, params, num, overrides, seed=None if args.skip_mc else num.rng_seed)
    if args.json or args.out:
        _emit_json(args, manifest, report)
    else:
        lines = [f"{'PASS' if c['passed'] else 'FAIL'}{' (skipped)' if c['skipped'] else ''}  "
                 f"{c['name']}\n" for c in report["checks"]]
        lines.append(f"novikov_condition  {report['novikov_condition']}\n")
        write_text("".join(lines), None)
    return EXIT_OK if report["passed"] else EXIT_VERIFY


COMMANDS = {"price": cmd_price, "curve": cmd_curve, "sensitivity": cmd_sensitivity,
            "hedge": cmd_hedge, "verify": cmd_verify}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except DomainError as exc:
        print(f"mvhbond: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError) as exc:
        print(f"mvhbond: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (GridError, FitError, FloatingPointError, ArithmeticError) as exc:
        print(f"mvhbond: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
