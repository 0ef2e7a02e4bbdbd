"""Command-line interface.

Subcommands:
  run        ingest a cell table and run the configured methods per sample
  simulate   generate scenario datasets in the ingestion schema
  bench      timing study across simulated scenarios
  covariate  extract the per-sample degree-of-clustering covariate at one radius

Exits 0 on success; on failure a machine-readable JSON error summary is
printed to stderr and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from ._version import __version__
from .batch import (
    COVARIATE_COLUMNS,
    BenchConfig,
    RunConfig,
    derive_seed,
    extract_covariate,
    run_batch,
    run_benchmark,
)
from .errors import KampError
from .geometry import EdgeCorrection, Window
from .io import ColumnMap, ingest_csv, read_window_file, write_cells_csv, write_table
from .kstat import MarkQuery
from .simulate import Condition, SimScenario, simulate


def _csv_list(text, cast=str):
    return tuple(cast(part.strip()) for part in text.split(",") if part.strip())


def _apply_config_defaults(args, parser_defaults):
    """Fill argument values from --config JSON where the CLI used defaults."""
    if not getattr(args, "config", None):
        return args
    with open(args.config) as fh:
        loaded = json.load(fh)
    section = loaded.get(args.command, loaded)
    for key, value in section.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            continue
        if getattr(args, attr) == parser_defaults.get(attr):
            setattr(args, attr, value)
    return args


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="kamp",
        description="Spatial clustering statistics with analytical permutation moments",
    )
    parser.add_argument("--version", action="version", version=f"kamp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    run = sub.add_parser("run", help="ingest a cell table and run methods per sample")
    run.add_argument("--input", required=True, help="cell table path")
    run.add_argument("--windows", default=None, help="per-sample window file")
    run.add_argument("--config", default=None, help="JSON config with defaults")
    run.add_argument("--methods", default="kamp", help="comma list of methods")
    run.add_argument("--mark", default=None, help="mark for a univariate query")
    run.add_argument("--mark1", default=None, help="first mark of a bivariate query")
    run.add_argument("--mark2", default=None, help="second mark of a bivariate query")
    run.add_argument("--rmax", type=float, default=None)
    run.add_argument("--rstep", type=float, default=None)
    run.add_argument("--correction", default="translation")
    run.add_argument("--thin", type=float, default=0.5, help="kamp_lite keep probability")
    run.add_argument("--perms", type=int, default=1000)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--threads", type=int, default=1, help="parallel sample workers")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--delimiter", default=",")
    run.add_argument("--col-sample-id", default="sample_id")
    run.add_argument("--col-x", default="x")
    run.add_argument("--col-y", default="y")
    run.add_argument("--col-type", default="cell_type")

    sim = sub.add_parser("simulate", help="generate scenario datasets")
    sim.add_argument("--config", default=None, help="JSON config with defaults")
    sim.add_argument("--condition", default="hom_null")
    sim.add_argument("--lambda-n", type=float, default=2000.0)
    sim.add_argument("--abundance", type=float, default=0.1)
    sim.add_argument("--samples", type=int, default=1)
    sim.add_argument("--window", default="0,10,0,10", help="x_min,x_max,y_min,y_max")
    sim.add_argument("--cluster-count", type=int, default=25)
    sim.add_argument("--cluster-radius", type=float, default=1.25)
    sim.add_argument("--hole-count", type=int, default=5)
    sim.add_argument("--bivariate", action="store_true")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="output directory")

    bench = sub.add_parser("bench", help="method timing study on simulations")
    bench.add_argument("--config", default=None, help="JSON config with defaults")
    bench.add_argument("--lambdas", default="1000,5000,10000")
    bench.add_argument("--abundances", default="0.01,0.1,0.2")
    bench.add_argument("--replicates", type=int, default=50)
    bench.add_argument("--methods", default="kamp,kamp_lite,perm")
    bench.add_argument("--perms", type=int, default=1000)
    bench.add_argument("--thin", type=float, default=0.5)
    bench.add_argument("--condition", default="hom_null")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument(
        "--compare-kernels",
        action="store_true",
        help="also time the numba and numpy kernel backends against each other",
    )
    bench.add_argument("--out", required=True)

    cov = sub.add_parser("covariate", help="extract K-tilde covariates at one radius")
    cov.add_argument("--results", required=True, help="results.tsv from a run")
    cov.add_argument("--rstar", type=float, required=True)
    cov.add_argument("--out", required=True, help="output table path")

    subparsers.update(run=run, simulate=sim, bench=bench, covariate=cov)
    return parser, subparsers


def _query_from_args(args) -> MarkQuery:
    if args.mark1 or args.mark2:
        if not (args.mark1 and args.mark2):
            raise KampError("bivariate queries need both --mark1 and --mark2")
        if args.mark:
            raise KampError("give either --mark or --mark1/--mark2, not both")
        return MarkQuery.bivariate(args.mark1, args.mark2)
    if not args.mark:
        raise KampError("a query is required: --mark or --mark1/--mark2")
    return MarkQuery.univariate(args.mark)


def _cmd_run(args) -> int:
    table = ingest_csv(
        args.input,
        columns=ColumnMap(
            sample_id=args.col_sample_id,
            x=args.col_x,
            y=args.col_y,
            cell_type=args.col_type,
        ),
        delimiter=args.delimiter,
    )
    if args.windows:
        table.windows = read_window_file(args.windows)
    cfg = RunConfig(
        query=_query_from_args(args),
        methods=_csv_list(args.methods),
        r_max=args.rmax,
        r_step=args.rstep,
        correction=EdgeCorrection.parse(args.correction),
        thin_prob=args.thin,
        n_perms=args.perms,
        seed=args.seed,
        workers=args.threads,
    )
    output = run_batch(table, cfg, args.out)
    print(f"wrote {output.results_path} ({len(output.rows)} rows)")
    if output.failures:
        print(f"{len(output.failures)} sample/method failures (see metadata.json)")
    return 0


def _cmd_simulate(args) -> int:
    bounds = _csv_list(args.window, float)
    if len(bounds) != 4:
        raise KampError("--window needs four numbers: x_min,x_max,y_min,y_max")
    window = Window(*bounds)
    out_dir = Path(args.out)
    rows = []
    window_rows = []
    for k in range(args.samples):
        sid = f"sim{k:04d}"
        scenario = SimScenario(
            condition=Condition.parse(args.condition),
            lambda_n=args.lambda_n,
            abundance=args.abundance,
            window=window,
            cluster_count=args.cluster_count,
            cluster_radius=args.cluster_radius,
            hole_count=args.hole_count,
            bivariate=args.bivariate,
            seed=derive_seed(args.seed, "simulate", sid),
        )
        pattern = simulate(scenario)
        for x, y, mark in zip(pattern.x, pattern.y, pattern.marks):
            rows.append((sid, repr(float(x)), repr(float(y)), mark))
        window_rows.append(
            (sid, window.x_min, window.x_max, window.y_min, window.y_max)
        )
    write_cells_csv(out_dir / "cells.csv", rows)
    with (out_dir / "windows.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "x_min", "x_max", "y_min", "y_max"])
        writer.writerows(window_rows)
    print(f"wrote {out_dir / 'cells.csv'} ({len(rows)} cells, {args.samples} samples)")
    return 0


def _cmd_bench(args) -> int:
    cfg = BenchConfig(
        lambdas=_csv_list(args.lambdas, float),
        abundances=_csv_list(args.abundances, float),
        replicates=args.replicates,
        methods=_csv_list(args.methods),
        n_perms=args.perms,
        thin_prob=args.thin,
        condition=Condition.parse(args.condition),
        seed=args.seed,
        compare_kernels=args.compare_kernels,
    )
    report = run_benchmark(cfg, args.out)
    for lam, p, method, median, _ in report["summary"]:
        print(f"lambda_n={lam:g} p={p:g} {method}: median {median:.3f}s")
    return 0


def _cmd_covariate(args) -> int:
    with open(args.results, newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader)
        rows = list(reader)
    if len(header) < 9:
        raise KampError(f"{args.results} does not look like a results table")
    out_rows = extract_covariate(rows, args.rstar)
    write_table(args.out, COVARIATE_COLUMNS, out_rows)
    print(f"wrote {args.out} ({len(out_rows)} rows)")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "simulate": _cmd_simulate,
    "bench": _cmd_bench,
    "covariate": _cmd_covariate,
}


def main(argv=None) -> int:
    parser, subparsers = _build_parser()
    args = parser.parse_args(argv)
    defaults = {
        action.dest: action.default for action in subparsers[args.command]._actions
    }
    try:
        args = _apply_config_defaults(args, defaults)
        return _COMMANDS[args.command](args)
    except (KampError, OSError, json.JSONDecodeError) as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
