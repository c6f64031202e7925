"""Command line interface: ``multimin <subcommand>``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from importlib import resources

from multimin import harness
from multimin.objectives import lookup, registry


def _list_functions(args):
    print("function,dim,minima,lower,upper")
    for fn, known in registry():
        lo = " ".join(f"{v:g}" for v in fn.domain.lower)
        hi = " ".join(f"{v:g}" for v in fn.domain.upper)
        print(f"{fn.name},{fn.dim},{known.count},{lo},{hi}")
    return 0


def _dump_minima(args):
    fn, _ = lookup(args.function, args.dim)
    with resources.files("multimin").joinpath("data/minima.csv").open("r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        for row in reader:
            if row[0] == fn.name and int(row[1]) == fn.dim:
                writer.writerow(row)
    return 0


def _verify_oracle(args):
    report = harness.verify_oracle(args.function, args.dim, args.tol, starts=args.starts, seed=args.seed)
    print("\n".join(report.lines()))
    return 0 if report.passed else 1


def _run(args):
    fn, _ = lookup(args.function, args.dim)
    n_seq = 0 if args.algo == "lhs" else args.n_seq
    cell = harness.Cell(fn.name, fn.dim, args.algo, args.n_init, n_seq)
    config = harness.ExperimentConfig(functions=[(fn.name, fn.dim)], algorithms=[args.algo])
    record = harness.run_cell(cell, 0, args.seed, config)
    harness.write_records(args.out, [record], force=args.force, timing=args.timing)
    sys.stderr.write(harness.format_row(record, True))
    return 1 if record.failed else 0


def _grid(args):
    config = harness.ExperimentConfig.from_json(args.config) if args.config else harness.ExperimentConfig()
    if args.dry_run:
        counts = config.counts()
        for algo, n in counts["per_algorithm"].items():
            print(f"{algo}: {n} cells")
        print(f"cells: {counts['cells']}")
        print(f"replications: {counts['replications']}")
        print(f"rows: {counts['rows']}")
        return 0
    if not args.out:
        raise ValueError("--out is required unless --dry-run is given")
    summary = harness.run_grid(config, args.out, workers=args.workers, force=args.force, timing=args.timing)
    print(f"wrote {summary.rows} rows to {summary.path} ({summary.failed} failed)")
    return 0 if summary.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multimin", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list-functions", help="list benchmark functions")
    p.set_defaults(func=_list_functions)

    p = sub.add_parser("dump-minima", help="print the tabulated minima of one function as CSV")
    p.add_argument("--function", required=True)
    p.add_argument("--dim", type=int, required=True)
    p.set_defaults(func=_dump_minima)

    p = sub.add_parser("verify-oracle", help="recover the tabulated minima by descent on the true function")
    p.add_argument("--function", required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--tol", type=float, default=1e-2)
    p.add_argument("--starts", type=int, default=None, help="override the number of descent starts")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_verify_oracle)

    p = sub.add_parser("run", help="one run of one algorithm, written as a one-row CSV")
    p.add_argument("--function", required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--algo", choices=harness.ALGORITHMS, required=True)
    p.add_argument("--n-init", type=int, required=True, help="initial design size (LHS size for lhs)")
    p.add_argument("--n-seq", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.add_argument("--timing", action="store_true", help="fill the wall_seconds column")
    p.set_defaults(func=_run)

    p = sub.add_parser("grid", help="run an experiment grid")
    p.add_argument("--config", help="JSON config; defaults reproduce the full published grid")
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--force", action="store_true")
    p.add_argument("--timing", action="store_true", help="fill the wall_seconds column")
    p.add_argument("--dry-run", action="store_true", help="print cell and row counts only")
    p.set_defaults(func=_grid)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (KeyError, ValueError, FileExistsError) as exc:
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"multimin {args.command}: error: {message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
