"""Command-line interface: ``ewenskit {sample,exact,verify,study}``.

Weight files are JSON objects with a ``"type"`` key::

    {"type": "constant", "value": 1.0}
    {"type": "multiplicative", "zeta": [1.0, 0.5, ...]}       # zeta_i, 1 beyond the list
    {"type": "macdonald", "q": 0.6, "t": 0.3}
    {"type": "product", "table": [[1.0, z11, z12], ...]}      # row i-1 holds zeta_i(0..L)
    {"type": "indicator", "coeffs": [1], "op": ">", "rhs": 0}  # sum_i coeffs[i-1] alpha_i <op> rhs
    {"type": "parity", "even": true}

Exit codes: 0 success, 1 a verification check failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from typing import Sequence

from .checks import SUITES, run_suite
from .errors import EwensKitError
from .measures import ENUMERATION_CAP, Constant, MeasureSpec, Weight, weight_from_dict
from .oracle import ewens_table, exact_expectation, exact_feller_pushforward, exact_istar_pmf, weighted_table
from .samplers import RngStream, importance_estimate
from .statistics import STATISTICS, statistic
from .study import SAMPLERS, StudyRow, draw, route, run_study


class UsageError(Exception):
    pass


def _theta(text: str) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _grid(text: str) -> list[int]:
    try:
        values = [int(float(x)) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers") from None
    if not values or any(b <= a for a, b in zip(values, values[1:])):
        raise argparse.ArgumentTypeError("n-grid must be strictly increasing")
    return values


def load_weight(path: str | None) -> Weight:
    if path is None:
        return Constant()
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read weight file {path}: {exc}") from None
    return weight_from_dict(doc)


class Table:
    """Rows with a metadata header, rendered as CSV or JSON lines."""

    def __init__(self, meta: dict, columns: Sequence[str]):
        self.meta = meta
        self.columns = list(columns)
        self.rows: list[list] = []

    def add(self, *row) -> None:
        self.rows.append(list(row))

    def render(self, fmt: str) -> str:
        buf = io.StringIO()
        if fmt == "jsonl":
            buf.write(json.dumps({"meta": self.meta}, sort_keys=True) + "\n")
            for row in self.rows:
                buf.write(json.dumps(dict(zip(self.columns, row))) + "\n")
            return buf.getvalue()
        for k, v in self.meta.items():
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        w.writerows(self.rows)
        return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# -- sample -----------------------------------------------------------------


def cmd_sample(args) -> int:
    weight = load_weight(args.weight)
    m = MeasureSpec(args.theta, weight)
    sampler = route(weight, args.n, args.sampler)
    meta = {"command": "sample", "theta": repr(args.theta), "n": args.n, "N": args.N, "seed": args.seed,
            "weight": weight.digest()}
    if args.estimate:
        f = statistic(args.estimate)
        est = importance_estimate(m, args.n, f, args.N, RngStream(args.seed), workers=args.workers)
        meta["method"] = "importance(ewens proposal)"
        table = Table(meta, ["statistic", "value", "std_error", "ess", "n_samples"])
        table.add(args.estimate, est.value, est.std_error, est.ess, est.n_samples)
        _emit(table.render(args.format), args.out)
        return 0
    if sampler == "importance":
        raise UsageError(
            f"no exact sampler for {weight.kind} weights at n={args.n} (enumeration cap {ENUMERATION_CAP}); "
            "pass --estimate STAT for importance-sampling estimates")
    meta["sampler"] = sampler
    batch = draw(m, args.n, args.N, RngStream(args.seed), sampler, args.workers)
    table = Table(meta, ["index", "partition"])
    for k, p in enumerate(batch):
        table.add(k, str(p))
    _emit(table.render(args.format), args.out)
    return 0


# -- exact ------------------------------------------------------------------


def _theta_exact(args):
    return args.theta_exact if args.rational else args.theta


def cmd_exact(args) -> int:
    weight = load_weight(args.weight)
    meta = {"command": f"exact {args.what}", "theta": repr(args.theta), "n": args.n, "weight": weight.digest()}
    if args.what in ("pmf", "pushforward"):
        if args.what == "pushforward":
            if not isinstance(weight, Constant):
                raise UsageError("pushforward is the Ewens law; --weight does not apply")
            tab = exact_feller_pushforward(_theta_exact(args), args.n, exact=args.rational)
        elif isinstance(weight, Constant):
            tab = ewens_table(_theta_exact(args), args.n, exact=args.rational)
        else:
            if args.rational:
                raise UsageError("--rational is available for the Ewens measure only")
            tab = weighted_table(MeasureSpec(args.theta, weight), args.n)
        table = Table(meta, ["partition", "probability"])
        for p, pr in tab.entries:
            table.add(str(p), str(pr) if isinstance(pr, Fraction) else float(pr))
    elif args.what == "istar":
        exhaustive, formula = exact_istar_pmf(args.theta, args.n)
        table = Table(meta, ["k", "exhaustive", "formula"])
        for k, (a, b) in enumerate(zip(exhaustive, formula), start=1):
            table.add(k, float(a), float(b))
    else:
        if not args.stat:
            raise UsageError("exact expectation needs --stat")
        f = statistic(args.stat)
        f_batch = lambda b: f(b)  # noqa: E731
        f_batch.batch = True
        value = exact_expectation(MeasureSpec(args.theta, weight), f_batch, args.n)
        table = Table(meta, ["statistic", "value"])
        table.add(args.stat, value)
    _emit(table.render(args.format), args.out)
    return 0


# -- verify -----------------------------------------------------------------


def cmd_verify(args) -> int:
    results = run_suite(args.suite, fast=args.fast)
    if args.format == "jsonl":
        text = "".join(r.to_json() + "\n" for r in results)
    else:
        text = "".join(r.line() + "\n" for r in results)
        passed = sum(r.passed for r in results)
        text += f"{args.suite}: {passed}/{len(results)} checks passed\n"
    _emit(text, args.out)
    return 0 if all(r.passed for r in results) else 1


# -- study ------------------------------------------------------------------


def cmd_study(args) -> int:
    weight = load_weight(args.weight) if args.weight else None
    rows = run_study(args.theta, args.n_grid, args.N, args.seed, weight, args.workers, args.sampler)
    meta = {"command": "study", "theta": repr(args.theta), "n_grid": ",".join(map(str, args.n_grid)),
            "N": args.N, "seed": args.seed, "weight": weight.digest() if weight else Constant().digest()}
    table = Table(meta, StudyRow.FIELDS)
    for r in rows:
        table.add(*r.as_list())
    _emit(table.render(args.format), args.out)
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ewenskit", description=__doc__.splitlines()[0],
                                     epilog=__doc__.split("\n", 2)[2], formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "jsonl"), default="csv")

    measure = argparse.ArgumentParser(add_help=False)
    measure.add_argument("--theta", type=_theta, default=Fraction(1), help="Ewens parameter (accepts a/b)")
    measure.add_argument("--weight", help="weight spec JSON file (default: constant 1, i.e. Ewens)")

    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--N", type=_positive_int, default=1000, help="number of samples")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--workers", type=_positive_int, default=1, help="threads; output does not depend on it")
    run.add_argument("--sampler", choices=SAMPLERS, help="override the routing table")

    p = sub.add_parser("sample", parents=[common, measure, run], help="draw partitions")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--estimate", metavar="STAT", choices=sorted(STATISTICS),
                   help="print an importance-sampling estimate of STAT instead of samples")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("exact", parents=[common, measure], help="exact tables by enumeration")
    p.add_argument("what", choices=("pmf", "pushforward", "istar", "expectation"))
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--rational", action="store_true", help="exact rational arithmetic (Ewens only)")
    p.add_argument("--stat", choices=sorted(STATISTICS), help="statistic for 'expectation'")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("verify", parents=[common], help="run a verification suite")
    p.add_argument("suite", choices=sorted(SUITES))
    p.add_argument("--fast", action="store_true", help="smaller sample sizes and ranges")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("study", parents=[common, measure, run], help="convergence study over an n-grid")
    p.add_argument("--n-grid", type=_grid, default=[100, 1000, 10_000])
    p.set_defaults(func=cmd_study)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if hasattr(args, "theta"):
        args.theta_exact = args.theta
        args.theta = float(args.theta)
    try:
        return args.func(args)
    except (UsageError, EwensKitError) as exc:
        print(f"ewenskit: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
