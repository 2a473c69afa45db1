"""Command-line interface: ``rangevol <command> [options]``."""

from __future__ import annotations

import argparse
import datetime as dt
import sys
from contextlib import contextmanager

import numpy as np

from . import abm_range, estimators, io, mc_oracle, pricing, trading
from .config import RunConfig
from .errors import RangeVolError


@contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _config(args) -> RunConfig:
    return RunConfig.from_env(
        window=getattr(args, "window", None),
        band=getattr(args, "band", None),
        annualization=getattr(args, "annualization", None),
        seed=getattr(args, "seed", None),
        steps_per_unit=getattr(args, "steps", None),
        max_terms=getattr(args, "max_terms", None),
        yz_k=getattr(args, "yz_k", None),
        rate_convention=getattr(args, "rate_convention", None),
    )


def cmd_estimate(args) -> int:
    cfg = _config(args)
    bars = io.parse_ohlc(args.bars)
    if args.full:
        est = estimators.estimate(bars, cfg.annualization, cfg.yz_k)
        rows = [(bars[-1].date, est)]
    else:
        rows = estimators.rolling_estimate(bars, cfg.window, cfg.annualization, cfg.yz_k)
    with _output(args.out) as fh:
        for day, est in rows:
            fh.write(io.estimate_record(day, est) + "\n")
    return 0


def _params(args) -> abm_range.AbmParams:
    return abm_range.AbmParams(args.mu, args.sigma, args.t)


def cmd_expected_range(args) -> int:
    print(io.fmt(abm_range.expected_range(_params(args))))
    return 0


def cmd_density(args) -> int:
    cfg = _config(args)
    p = _params(args)
    ctl = cfg.series_control()
    with _output(args.out) as fh:
        if args.kind == "joint":
            a_lo, _ = abm_range.min_window(p)
            _, b_hi = abm_range.max_window(p)
            a_grid = np.linspace(args.lo if args.lo is not None else a_lo, 0.0, args.points + 1)[:-1]
            b_grid = np.linspace(0.0, args.hi if args.hi is not None else b_hi, args.points + 1)[1:]
            aa, bb = np.meshgrid(a_grid, b_grid, indexing="ij")
            values = abm_range.joint_density_max_min(p, aa, bb, ctl)
            fh.write("min,max,density\n")
            for a, b, v in zip(aa.ravel(), bb.ravel(), np.ravel(values)):
                fh.write(f"{io.fmt(a)},{io.fmt(b)},{io.fmt(v)}\n")
            return 0
        window = abm_range.range_window(p) if args.kind == "range" else abm_range.max_window(p)
        lo = args.lo if args.lo is not None else 0.0
        hi = args.hi if args.hi is not None else window[1]
        grid = np.linspace(lo, hi, args.points)
        if args.kind == "range":
            values = abm_range.range_density(p, grid, ctl, printed=args.printed)
        else:
            values = abm_range.half_range_density(p, grid)
        fh.write("x,density\n")
        for x, v in zip(grid, np.ravel(values)):
            fh.write(f"{io.fmt(x)},{io.fmt(v)}\n")
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args)
    sim = mc_oracle.SimConfig(n_paths=1, seed=cfg.seed, steps_per_unit=cfg.steps_per_unit, f=args.f)
    start = dt.date.fromisoformat(args.start)
    bars = mc_oracle.simulate_ohlc(args.mu_s, args.sigma, sim, args.days, s0=args.s0, start=start)
    if args.out in (None, "-"):
        sys.stdout.write("date,open,high,low,close\n")
        for b in bars:
            sys.stdout.write(f"{b.date.isoformat()},{b.open!r},{b.high!r},{b.low!r},{b.close!r}\n")
    else:
        io.write_ohlc(args.out, bars)
    return 0


def cmd_price(args) -> int:
    cfg = _config(args)
    tau = args.tau if args.tau is not None else pricing.year_fraction(args.days, cfg.annualization)
    rate = pricing.continuous_rate(args.rate, cfg.rate_convention)
    print(io.fmt(pricing.bs_call(pricing.PricingInputs(args.spot, args.strike, rate, args.vol, tau))))
    return 0


def cmd_backtest(args) -> int:
    cfg = _config(args)
    bars = io.parse_ohlc(args.bars)
    quotes = io.parse_quotes(args.quotes)
    if args.rates is not None:
        rates = io.parse_rates(args.rates)
    elif cfg.rate_source == "constant":
        rates = [(dt.date.min, cfg.constant_rate)]
    else:
        raise RangeVolError("--rates is required unless RANGEVOL_RATE_SOURCE=constant")
    result = trading.backtest(bars, quotes, rates, band=cfg.band, window=cfg.window,
                              stop_margin=args.stop_margin, annualization=cfg.annualization,
                              rate_mode=cfg.rate_convention, use_total_vol=args.total_vol)
    with _output(args.out) as fh:
        io.write_ledger(fh, result.ledger)
    return 0


def cmd_replay(args) -> int:
    records = io.parse_positions(args.positions)
    ledger = trading.replay_positions(records)
    with _output(args.out) as fh:
        io.write_ledger(fh, ledger)
    for rec, pos in zip(records, ledger.positions):
        if rec.reported_profit is not None and rec.reported_profit != pos.profit:
            print(f"note: position opened {rec.open_time:%Y-%m-%d %H:%M} strike {rec.strike}: "
                  f"recomputed {io.fmt_money(pos.profit)}, reported {io.fmt_money(rec.reported_profit)}",
                  file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rangevol", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("estimate", help="rolling volatility estimates as JSON lines")
    p.add_argument("--bars", required=True)
    p.add_argument("--window", type=int)
    p.add_argument("--full", action="store_true", help="one estimate over all bars")
    p.add_argument("--annualization", type=int)
    p.add_argument("--yz-k", type=float, dest="yz_k")
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    def abm_args(q):
        q.add_argument("--mu", type=float, required=True)
        q.add_argument("--sigma", type=float, required=True)
        q.add_argument("--t", type=float, default=1.0)

    p = sub.add_parser("expected-range", help="expected range of a drifted Brownian motion")
    abm_args(p)
    p.set_defaults(func=cmd_expected_range)

    p = sub.add_parser("density", help="density values on a grid as CSV")
    p.add_argument("kind", choices=["range", "half-range", "joint"])
    abm_args(p)
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--max-terms", type=int, dest="max_terms")
    p.add_argument("--printed", action="store_true",
                   help="range series with the unit coefficient variant (valid only at mu = 0)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("simulate", help="synthetic OHLC bars as CSV")
    p.add_argument("--mu-s", type=float, dest="mu_s", default=0.0, help="drift per day")
    p.add_argument("--sigma", type=float, required=True, help="volatility per sqrt(day)")
    p.add_argument("--f", type=float, default=0.0, help="after-hours fraction of a day")
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int, help="grid steps per day")
    p.add_argument("--s0", type=float, default=100.0)
    p.add_argument("--start", default="2000-01-03")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("price", help="Black-Scholes call price")
    p.add_argument("--spot", type=float, required=True)
    p.add_argument("--strike", type=float, required=True)
    p.add_argument("--rate", type=float, default=0.0)
    p.add_argument("--vol", type=float, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--tau", type=float, help="years to expiry")
    g.add_argument("--days", type=int, help="trading days to expiry")
    p.add_argument("--annualization", type=int)
    p.add_argument("--rate-convention", choices=["quoted", "log"], dest="rate_convention")
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("backtest", help="band trading strategy over quotes; ledger CSV")
    p.add_argument("--bars", required=True)
    p.add_argument("--quotes", required=True)
    p.add_argument("--rates")
    p.add_argument("--band", type=float)
    p.add_argument("--stop-margin", type=float, dest="stop_margin")
    p.add_argument("--window", type=int)
    p.add_argument("--annualization", type=int)
    p.add_argument("--rate-convention", choices=["quoted", "log"], dest="rate_convention")
    p.add_argument("--total-vol", action="store_true", dest="total_vol",
                   help="price with the volatility including overnight variance")
    p.add_argument("--out")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("replay", help="recompute a table of round trips; ledger CSV")
    p.add_argument("--positions", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_replay)
    return parser


def cli_dispatch(argv=None) -> int:
    """Run one command; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (RangeVolError, OSError, ValueError) as exc:
        print(f"rangevol {args.command}: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_dispatch())
