"""Command-line interface: ``haartraces <subcommand> ...``.

Exit codes: 0 success, 2 usage or configuration error, 3 a study gate
failed (or sampled matrices failed their diagnostics), 1 other errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings

import numpy as np

from . import groups
from .experiments import ConfigError, StudyConfig, run_study
from .psalgebra import (
    BelowThresholdError,
    GroupKind,
    InexactExpectationWarning,
    UnsupportedShapeError,
    haar_expectation,
    laplacian,
    parse_polynomial,
)
from .stein import wasserstein_bound

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_GATE = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _group(text):
    try:
        return GroupKind.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="haartraces", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    lap = sub.add_parser("laplacian", help="Laplacian of a power-sum monomial")
    lap.add_argument("--group", type=_group, required=True)
    lap.add_argument("--monomial", required=True)

    exp = sub.add_parser("expect", help="exact Haar expectation of a polynomial")
    exp.add_argument("--group", type=_group, required=True)
    exp.add_argument("--poly", required=True)
    exp.add_argument("--n", type=int)
    exp.add_argument("--force", action="store_true", help="evaluate below the validity threshold")

    smp = sub.add_parser("sample", help="Haar samples of trace vectors as CSV")
    smp.add_argument("--group", type=_group, required=True)
    smp.add_argument("--n", type=int, required=True)
    smp.add_argument("--count", type=int, required=True)
    smp.add_argument("--seed", type=int, required=True)
    smp.add_argument("--d", type=int, default=None, help="largest power (default 3)")
    smp.add_argument("--r", type=int, default=None, help="number of powers (default d)")
    smp.add_argument("--centered", action="store_true")
    smp.add_argument("--output", help="CSV path (default stdout)")

    bnd = sub.add_parser("bound", help="Wasserstein bound for a trace vector")
    bnd.add_argument("--group", type=_group, required=True)
    bnd.add_argument("--d", type=int, required=True)
    bnd.add_argument("--r", type=int, required=True)
    bnd.add_argument("--n", type=int, required=True)
    bnd.add_argument("--force", action="store_true")
    bnd.add_argument("--output", help="also write the JSON report here")

    st = sub.add_parser("study", help="run a study from a JSON config")
    st.add_argument("--config", required=True)
    st.add_argument("--seed", type=int, help="overrides the config seed")
    st.add_argument("--workers", type=int)
    st.add_argument("--output-json")
    st.add_argument("--output-csv")
    return parser


def cmd_laplacian(args) -> int:
    try:
        f = parse_polynomial(args.monomial, args.group)
        print(laplacian(args.group, f).render())
    except UnsupportedShapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def cmd_expect(args) -> int:
    try:
        f = parse_polynomial(args.poly, args.group)
        res = haar_expectation(args.group, f)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.n is None:
        print(res)
        return EXIT_OK
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", InexactExpectationWarning)
        try:
            value = res.at(args.n, force=args.force)
        except BelowThresholdError as exc:
            print(f"error: {exc} (use --force to evaluate anyway)", file=sys.stderr)
            return EXIT_USAGE
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    exact = not caught
    print(f"value={value} n={args.n} valid_for_n={res.validity_threshold} "
          f"exact={'true' if exact else 'false'}")
    return EXIT_OK


def cmd_sample(args) -> int:
    d = args.d if args.d is not None else 3
    r = args.r if args.r is not None else d
    if args.n < 1 or args.count < 1 or not 1 <= r <= d:
        print("error: need n >= 1, count >= 1 and 1 <= r <= d", file=sys.stderr)
        return EXIT_USAGE
    rng = np.random.default_rng(args.seed)
    mats = groups.haar_batch(args.group, args.n, args.count, rng)
    diags = [groups.group_diagnostics(m, args.group) for m in mats]
    W = groups.trace_vectors(args.group, mats, d, r, centered=args.centered)
    W = np.asarray(W, dtype=complex)
    idx = range(d - r + 1, d + 1)
    header = [f"{part}_p{j}" for j in idx for part in ("re", "im")] + ["diagnostics"]
    out = open(args.output, "w", newline="", encoding="utf-8") if args.output else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        for row, dg in zip(W, diags):
            vals = []
            for z in row:
                vals += [repr(float(z.real)), repr(float(z.imag))]
            w.writerow(vals + ["pass" if dg.passed else "fail"])
    finally:
        if args.output:
            out.close()
    ok = all(dg.passed for dg in diags)
    worst = max(dg.unitarity for dg in diags)
    print(f"group={args.group.value} n={args.n} count={args.count} seed={args.seed} "
          f"max_unitarity_dev={worst:.3g} diagnostics={'pass' if ok else 'fail'}",
          file=sys.stderr if not args.output else sys.stdout)
    return EXIT_OK if ok else EXIT_GATE


def cmd_bound(args) -> int:
    try:
        rep = wasserstein_bound(args.group, args.d, args.r, args.n, force=args.force)
    except BelowThresholdError as exc:
        print(f"error: {exc} (use --force to evaluate anyway)", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = json.dumps(rep.to_dict())
    print(text)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return EXIT_OK


def cmd_study(args) -> int:
    try:
        cfg = StudyConfig.from_json(args.config)
        cfg = cfg.with_overrides(seed=args.seed, workers=args.workers,
                                 output_json=args.output_json, output_csv=args.output_csv)
        if cfg.study != "bounds":
            cfg.require_seed()
        report = run_study(cfg)
    except ConfigError as exc:
        print(f"error: bad config field {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BelowThresholdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for line in report.summary_lines():
        print(line)
    print(f"study={report.study} cells={len(report.cells)} failed={len(report.failures)} "
          f"passed={'true' if report.passed else 'false'}")
    return EXIT_OK if report.passed else EXIT_GATE


_COMMANDS = {
    "laplacian": cmd_laplacian,
    "expect": cmd_expect,
    "sample": cmd_sample,
    "bound": cmd_bound,
    "study": cmd_study,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
