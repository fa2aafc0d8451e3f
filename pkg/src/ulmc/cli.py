"""Command line: ``ulmc lower|check|estimate|simulate``.

Exit codes: 0 a verdict or result was delivered, 2 input error, 3 a state
or time limit was hit, 64 usage error (bad flags or a malformed query).
"""
from __future__ import annotations

import argparse
import os
import sys
import tempfile
from fractions import Fraction

import numpy as np

from . import __version__
from .cfa import DEFAULT_NONDET_CAP, RefusedExpansion, normalize, validate
from .engine.model import TimedModel
from .engine.query import (
    EstimateMax, QuerySyntaxError, compile_expr, eval_query, parse_expr, parse_query,
)
from .engine.smc import DEFAULT_BINS, DEFAULT_SCALE, Simulator, estimate_max, to_ticks
from .engine.trace import model_hash, render_trace
from .engine.zones import Limits
from .modelfile import render_program, parse_program
from .timing import load_omega
from .ulcore import UlError

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_LIMIT = 3
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".ulmc-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read(path: str) -> str:
    with open(path) as fh:
        return fh.read()


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}") from None
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text!r}")
        return v
    return conv


def _natural(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid value {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text!r}")
    return v


def _time(text):
    try:
        v = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"invalid time {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ulmc", description="Timed model checking of programs lowered to CFA networks.")
    p.add_argument("--version", action="version", version=f"ulmc {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    lo = sub.add_parser("lower", help="lower a .sir program to a .ul network")
    lo.add_argument("input")
    lo.add_argument("--entry", action="append", required=True, help="entry function (repeatable)")
    lo.add_argument("--memsize", type=_positive(int), default=256)
    lo.add_argument("--out", "-o", required=True)

    def model_args(sp):
        sp.add_argument("model", help=".ul network")
        sp.add_argument("--omega", required=True, help=".omg timing configuration")
        sp.add_argument("--nondet-cap", type=_positive(int), default=DEFAULT_NONDET_CAP)

    ck = sub.add_parser("check", help="symbolic reachability (E<> / A[])")
    model_args(ck)
    ck.add_argument("--query", required=True)
    ck.add_argument("--max-states", type=_positive(int), default=1_000_000)
    ck.add_argument("--max-seconds", type=_positive(float), default=600.0)
    ck.add_argument("--horizon", type=_natural, default=None)
    ck.add_argument("--trace-out")

    def sim_args(sp):
        sp.add_argument("--seed", type=_natural, default=0)
        sp.add_argument("--scale", type=_positive(int), default=DEFAULT_SCALE,
                        help="simulation ticks per time unit")
        sp.add_argument("--time-unit", default="", help="label printed after times")

    es = sub.add_parser("estimate", help="maximum of an expression over simulated runs")
    model_args(es)
    sim_args(es)
    es.add_argument("--query", help="E[<=bound;runs] (max: expr); alternative to --expr/--bound/--runs")
    es.add_argument("--expr")
    es.add_argument("--bound", type=_time)
    es.add_argument("--runs", type=_positive(int))
    es.add_argument("--bins", type=_positive(int), default=DEFAULT_BINS)
    es.add_argument("--csv-out")
    es.add_argument("--plot-out", help="histogram figure (png, svg or pdf)")

    si = sub.add_parser("simulate", help="one simulated run")
    model_args(si)
    sim_args(si)
    si.add_argument("--bound", type=_time, required=True)
    si.add_argument("--trace-out")
    return p


def _load_model(args):
    model_text = _read(args.model)
    omega_text = _read(args.omega)
    net = parse_program(model_text)
    errs = validate(net)
    if errs:
        raise UlError("; ".join(str(e) for e in errs))
    net = normalize(net)
    omega = load_omega(omega_text)
    return net, omega, model_hash(model_text, omega_text)


def cmd_lower(args) -> int:
    from .frontend import build_network, parse_subset_ir

    module = parse_subset_ir(_read(args.input))
    stats = []
    net = build_network(module, args.entry, args.memsize, stats)
    write_atomic(args.out, render_program(net))
    for st, cfa in zip(stats, net.cfas):
        print(f"process {cfa.name}: {len(cfa.locations)} locations, {len(cfa.edges)} edges, "
              f"frame {st.frame} bytes")
    print(f"static {net.static_size} of {net.memsize} bytes; wrote {args.out}")
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        q = parse_query(args.query)
    except QuerySyntaxError as exc:
        raise UsageError(f"query: {exc}") from None
    if isinstance(q, EstimateMax):
        raise UsageError("check takes E<> or A[] queries; use estimate for E[...]")
    net, omega, digest = _load_model(args)
    model = TimedModel(net, omega, args.nondet_cap)
    try:
        res = eval_query(q, model, Limits(args.max_states, args.max_seconds), horizon=args.horizon)
    except QuerySyntaxError as exc:
        raise UsageError(f"query: {exc}") from None
    print(res.verdict)
    print(f"stored {res.stored} symbolic states, explored {res.explored}")
    if res.trace is not None:
        res.trace.model_hash = digest
        if args.trace_out:
            write_atomic(args.trace_out, render_trace(res.trace, net))
            print(f"trace with {len(res.trace.steps)} steps written to {args.trace_out}")
        else:
            print(f"trace with {len(res.trace.steps)} steps (use --trace-out to save it)")
    return EXIT_LIMIT if res.verdict == "LimitExceeded" else EXIT_OK


def _fmt(x: float) -> str:
    return f"{x:.6f}".rstrip("0").rstrip(".")


def cmd_estimate(args) -> int:
    try:
        if args.query:
            if args.expr or args.bound is not None or args.runs:
                raise UsageError("give either --query or --expr/--bound/--runs")
            q = parse_query(args.query)
            if not isinstance(q, EstimateMax):
                raise UsageError("estimate takes an E[<=bound;runs] (max: expr) query")
            node, bound, runs = q.expr, q.bound, q.runs
        else:
            if not (args.expr and args.bound is not None and args.runs):
                raise UsageError("estimate needs --query or all of --expr, --bound, --runs")
            node, bound, runs = parse_expr(args.expr), args.bound, args.runs
    except QuerySyntaxError as exc:
        raise UsageError(f"query: {exc}") from None
    net, omega, digest = _load_model(args)
    try:
        expr = compile_expr(node, net)
    except QuerySyntaxError as exc:
        raise UsageError(f"query: {exc}") from None
    res = estimate_max(net, omega, expr, bound, runs, args.seed, args.bins, args.scale)
    unit = f" {args.time_unit}" if args.time_unit else ""
    print(f"model {digest}")
    print(f"runs {runs} seed {args.seed} bound {bound}{unit}")
    print("end reasons " + ", ".join(f"{k}={v}" for k, v in sorted(res.end_reasons.items())))
    print(f"min {_fmt(res.min)}  max {_fmt(res.max)}  mean {_fmt(res.mean)}")
    if args.csv_out:
        write_atomic(args.csv_out, res.histogram_csv())
        print(f"histogram ({args.bins} bins) written to {args.csv_out}")
    else:
        sys.stdout.write(res.histogram_csv())
    if args.plot_out:
        from .plotting import plot_histogram

        plot_histogram(res, args.plot_out, f"{runs} runs, max of {args.expr or 'expression'}",
                       args.time_unit)
        print(f"figure written to {args.plot_out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    net, omega, digest = _load_model(args)
    sim = Simulator(net, omega, args.scale)
    trace, _ = sim.run(np.random.default_rng([args.seed, 0]), to_ticks(args.bound, args.scale))
    trace.seed = args.seed
    trace.model_hash = digest
    unit = f" {args.time_unit}" if args.time_unit else ""
    print(f"end {trace.end_reason} at time {_fmt(float(Fraction(trace.final.time, args.scale)))}{unit} "
          f"after {len(trace.steps)} steps")
    text = render_trace(trace, net)
    if args.trace_out:
        write_atomic(args.trace_out, text)
        print(f"trace written to {args.trace_out}")
    return EXIT_OK


COMMANDS = {"lower": cmd_lower, "check": cmd_check, "estimate": cmd_estimate, "simulate": cmd_simulate}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ulmc {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, UlError, ValueError, RefusedExpansion) as exc:
        print(f"ulmc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
