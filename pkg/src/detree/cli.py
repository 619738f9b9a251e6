"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data or file-format error,
3 numerical failure (degenerate or singular data).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Optional, Sequence

from .elements import Order, SplitMode
from .ensemble import format_rows, read_csv
from .errors import (
    DataFormatError,
    DegenerateDimension,
    FormatError,
    SingularCovariance,
    UnknownCase,
)
from .metrics import EstimatorSpec, format_sweep_csv, run_sweep
from .refdist import CASE_NAMES, get_case
from .stat_tests import GofStatistic, IndepStatistic
from .tree import BuildConfig, build, draw_samples
from .treeio import load, save

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _probability(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"significance level must lie in (0, 1), got {value}")
    return value


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 2 for v in values):
        raise argparse.ArgumentTypeError("sample sizes must be integers >= 2")
    return values


def _non_negative(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def _positive(text: str) -> int:
    value = _non_negative(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _add_build_flags(p: argparse.ArgumentParser):
    p.add_argument("--order", choices=[o.value for o in Order], default="linear")
    p.add_argument("--split", choices=[s.value for s in SplitMode], default="size")
    p.add_argument("--alpha-g", type=_probability, default=0.001)
    p.add_argument("--alpha-d", type=_probability, default=0.001)
    p.add_argument("--gof", choices=[g.value for g in GofStatistic], default="chi2")
    p.add_argument("--indep", choices=[i.value for i in IndepStatistic], default="chi2")
    p.add_argument("--whiten", action="store_true", help="fit in principal-axes coordinates")


def _config(args) -> BuildConfig:
    return BuildConfig.make(args.order, args.split, args.alpha_g, args.alpha_d, args.gof, args.indep)


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="detree", description="Distribution element tree density estimation.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a tree to CSV samples")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    _add_build_flags(p)

    p = sub.add_parser("query", help="evaluate a fitted density at CSV points")
    p.add_argument("--tree", required=True)
    p.add_argument("--points", required=True)

    p = sub.add_parser("sample", help="draw samples from a fitted tree")
    p.add_argument("--tree", required=True)
    p.add_argument("--count", type=_non_negative, required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("info", help="summarize a fitted tree")
    p.add_argument("--tree", required=True)

    p = sub.add_parser("benchmark", help="MISE sweep on a reference case")
    p.add_argument("--case", required=True, help="one of: " + ", ".join(CASE_NAMES))
    p.add_argument("--estimator", choices=["det", "histogram"], default="det")
    p.add_argument("--n-list", type=_int_list, default=[100, 1000, 10000])
    p.add_argument("--repeats", type=_positive, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="output CSV path, '-' for stdout")
    p.add_argument("--rotate", action="store_true", help="rotate a 2-d case by pi/4")
    p.add_argument("--timing", action="store_true",
                   help="write measured timings (otherwise 0, keeping output reproducible)")
    _add_build_flags(p)
    return parser


def _summary(tree) -> str:
    return f"n={tree.n_total} d={tree.d} m={tree.stats.m} depth={tree.stats.n_t}"


def cmd_fit(args) -> int:
    ens = read_csv(args.input)
    tree = build(ens, _config(args), whiten=args.whiten)
    save(tree, args.output)
    print(_summary(tree))
    return EXIT_OK


def cmd_query(args) -> int:
    tree = load(args.tree)
    pts = read_csv(args.points)
    if pts.d != tree.d:
        raise DataFormatError(f"points have {pts.d} columns, tree has d={tree.d}")
    dens = tree.density(pts.values)
    sys.stdout.write("".join(f"{v:.17g}\n" for v in dens))
    return EXIT_OK


def cmd_sample(args) -> int:
    tree = load(args.tree)
    if args.count == 0:
        return EXIT_OK
    sys.stdout.write(format_rows(draw_samples(tree, args.count, args.seed)))
    return EXIT_OK


def cmd_info(args) -> int:
    tree = load(args.tree)
    s = tree.stats
    print(_summary(tree) + f" node_count={s.node_count}")
    print("config=" + json.dumps(tree.config.to_dict(), sort_keys=True))
    print(f"whiten={'yes' if tree.whiten is not None else 'no'}")
    if s.max_depth_hits or s.unsplittable:
        print(f"warnings: max_depth={s.max_depth_hits} unsplittable={s.unsplittable}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    try:
        case = get_case(args.case, rotate=args.rotate)
    except (UnknownCase, ValueError) as exc:
        raise UsageError(str(exc)) from None
    spec = EstimatorSpec(args.estimator, _config(args), args.whiten)
    records = run_sweep(case, spec, args.n_list, args.repeats, args.seed)
    text = format_sweep_csv(records, timing=args.timing)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    return EXIT_OK


COMMANDS = {
    "fit": cmd_fit,
    "query": cmd_query,
    "sample": cmd_sample,
    "info": cmd_info,
    "benchmark": cmd_benchmark,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # usage errors and --help end here; report as a return code
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except UsageError as exc:
        print(f"detree: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, FormatError, OSError) as exc:
        print(f"detree: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DegenerateDimension, SingularCovariance) as exc:
        print(f"detree: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
