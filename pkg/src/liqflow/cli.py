"""Command line entry point: ``liqflow <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .basis import Basis, BasisKind
from .errors import DataError, DegenerateMatrixError, KronrodInfeasible, TickOrderError, WarmUpError
from .estimators import runge_demo
from .indicators import COLUMNS, Estimator, compute_frames
from .quadrature import chi2_skewness_table, gauss, kronrod, radau, skewness_gamma
from .simulator import Strategy, StrategyConfig, run_backtest
from .streaming import DEFAULT_N, DEFAULT_TAU, moment_frames
from .synth import Scenario, generate
from .tickio import read_ticks, write_ticks

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DEGENERATE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


@contextlib.contextmanager
def _out(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            yield fh


def _write_rows(path, header, rows):
    with _out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def _time_basis(name):
    b = Basis.from_name(name)
    if b.kind not in (BasisKind.SHIFTED_LEGENDRE, BasisKind.LAGUERRE):
        raise argparse.ArgumentTypeError("time basis must be shifted_legendre or laguerre")
    return b


def _order(value):
    n = int(value)
    if not 1 <= n <= 16:
        raise argparse.ArgumentTypeError("n must lie in [1, 16]")
    return n


def _positive(value):
    x = float(value)
    if not x > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return x


def _add_stream_options(p):
    p.add_argument("input", help="tick CSV with header t_ns,price,volume")
    p.add_argument("--basis", type=_time_basis, default=Basis.from_name("shifted_legendre"),
                   help="time basis: shifted_legendre (default) or laguerre")
    p.add_argument("--n", type=_order, default=DEFAULT_N, help="polynomial order (default 6)")
    p.add_argument("--tau", type=_positive, default=DEFAULT_TAU, help="timescale in seconds (default 128)")
    p.add_argument("--decimate", type=int, default=1, help="emit a frame every N ticks (default 1)")
    p.add_argument("--estimator", choices=[e.value for e in Estimator], default=Estimator.MATRIX.value,
                   help="I0 estimator (default matrix)")
    p.add_argument("--warmup-tau", type=float, default=1.0, help="history in tau units before frames are Ready")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="liqflow", description="Liquidity indicators and backtests from tick data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a seeded synthetic tick stream")
    p.add_argument("--scenario", default="ConstantRate",
                   help="ConstantRate, RegimeSwitch, TrendBurst or PriceOnly")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float, default=3600.0, help="seconds of data")
    p.add_argument("--tau", type=_positive, default=DEFAULT_TAU, help="regime length scale for RegimeSwitch")
    p.add_argument("-o", "--output", default="-")

    p = sub.add_parser("indicators", help="indicator CSV from a tick CSV")
    _add_stream_options(p)
    p.add_argument("-o", "--output", default="-")

    p = sub.add_parser("backtest", help="run a strategy over a tick CSV")
    _add_stream_options(p)
    p.add_argument("--strategy", default="LiquidityDirectional",
                   help="LiquidityDirectional, VolatilitySignal or Null")
    p.add_argument("--th", type=float, default=0.85, help="direction threshold (default 0.85)")
    p.add_argument("--unit-size", type=int, default=100)
    p.add_argument("--fill-slippage-ticks", type=float, default=1.0)
    p.add_argument("--initial-dir", type=float, default=None, help="dir assumed before the first excess")
    p.add_argument("--no-force-flat", action="store_true", help="leave the last position open")
    p.add_argument("--report", default="-", help="report JSON path (default stdout)")
    p.add_argument("--blotter", default=None, help="trade blotter CSV path")

    p = sub.add_parser("quadrature", help="quadrature table for a classical measure")
    p.add_argument("--measure", default="legendre", help="basis whose weight is the measure")
    p.add_argument("--kind", choices=["gauss", "radau", "kronrod"], default="gauss")
    p.add_argument("--points", type=int, default=3, help="Gauss/Radau points, or Gauss points being extended")
    p.add_argument("--x0", type=float, default=None, help="fixed Radau node (default: left end of support)")
    p.add_argument("-o", "--output", default="-")

    p = sub.add_parser("skewness", help="two-point quadrature skewness")
    p.add_argument("--k", type=float, nargs="+", default=[1, 2, 4, 8, 16, 32, 64, 128, 256],
                   help="chi-squared degrees of freedom to sweep")
    p.add_argument("--moments", type=float, nargs=4, metavar=("M0", "M1", "M2", "M3"),
                   help="evaluate one monomial moment set instead of the sweep")
    p.add_argument("-o", "--output", default="-")

    p = sub.add_parser("runge", help="least squares versus Radon-Nikodym on 1/(1+25x^2)")
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--points", type=int, default=301, help="samples on [-1.5, 1.5]")
    p.add_argument("-o", "--output", default="-")
    return parser


def cmd_synth(args):
    try:
        scenario = Scenario.parse(args.scenario)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    if args.duration < 0:
        raise _UsageError("duration must be non-negative")
    ticks = generate(scenario, args.duration, seed=args.seed, tau=args.tau)
    with _out(args.output) as fh:
        write_ticks(ticks, fh)


def _table(args):
    ticks = read_ticks(args.input)
    if args.decimate < 1:
        raise _UsageError("--decimate must be >= 1")
    frames = moment_frames(ticks, args.basis, args.n, args.tau, args.decimate)
    return ticks, compute_frames(frames, args.estimator, args.warmup_tau)


def cmd_indicators(args):
    _, table = _table(args)
    rows = ((*(getattr(f, c) for c in COLUMNS[:-1]), f.status.value) for f in table)
    _write_rows(args.output, COLUMNS, rows)


def cmd_backtest(args):
    try:
        strategy = Strategy.parse(args.strategy)
        config = StrategyConfig(th=args.th, unit_size=args.unit_size, fill_slippage_ticks=args.fill_slippage_ticks,
                                initial_dir=args.initial_dir, force_flat_at_end=not args.no_force_flat)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    if args.decimate < 1:
        raise _UsageError("--decimate must be >= 1")
    ticks = read_ticks(args.input)
    report = run_backtest(ticks, strategy, config, args.basis, args.n, args.tau, args.decimate,
                          args.estimator, args.warmup_tau)
    with _out(args.report) as fh:
        fh.write(report.to_json())
    if args.blotter:
        _write_rows(args.blotter, ("t_ns", "side", "price", "shares", "fee"), report.blotter_rows())


def cmd_quadrature(args):
    try:
        basis = Basis.from_name(args.measure)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    g = args.points
    if g < 1:
        raise _UsageError("--points must be >= 1")
    m = basis.measure_moments(3 * g + 2)
    if args.kind == "gauss":
        q = gauss(basis, m, g)
    elif args.kind == "radau":
        x0 = basis.support[0] if args.x0 is None else args.x0
        if not np.isfinite(x0):
            raise _UsageError("this measure has no finite left end; pass --x0")
        q = radau(basis, m, x0, g)
    else:
        q = kronrod(basis, m, g)
    _write_rows(args.output, ("node", "weight"), q.rows())


def cmd_skewness(args):
    if args.moments is not None:
        try:
            s = skewness_gamma(args.moments)
        except ValueError as exc:
            raise DegenerateMatrixError(str(exc)) from None
        _write_rows(args.output, ("gamma", "gamma_x", "x1", "x2", "w1", "w2"),
                    [(s.gamma, s.gamma_x, s.x1, s.x2, s.w1, s.w2)])
        return
    if any(k <= 0 for k in args.k):
        raise _UsageError("--k values must be positive")
    _write_rows(args.output, ("k", "gamma", "skewness", "half_skewness"), chi2_skewness_table(args.k))


def cmd_runge(args):
    if args.n < 2 or args.points < 2:
        raise _UsageError("--n and --points must be >= 2")
    t = runge_demo(args.n, np.linspace(-1.5, 1.5, args.points))
    _write_rows(args.output, ("x", "f", "a_ls", "a_rn"), t.rows())


class _UsageError(Exception):
    pass


COMMANDS = {
    "synth": cmd_synth,
    "indicators": cmd_indicators,
    "backtest": cmd_backtest,
    "quadrature": cmd_quadrature,
    "skewness": cmd_skewness,
    "runge": cmd_runge,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"liqflow {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, TickOrderError, FileNotFoundError, IsADirectoryError, UnicodeDecodeError) as exc:
        print(f"liqflow {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DegenerateMatrixError, KronrodInfeasible, WarmUpError, ArithmeticError) as exc:
        print(f"liqflow {args.command}: numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
