"""Command-line front end.

Exit codes: 0 success, 1 verification battery failure, 2 configuration
error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__
from .ecdf import CONVENTIONS, RIGHT_CONTINUOUS, read_sample
from .errors import (
    DataIngestionError,
    EnumerationTooLargeError,
    GeneratorSpecError,
    InvalidParameterError,
    QuadratureError,
)
from .generators import ConvexGenerator, LogConvexGenerator, parse_generator_spec
from .nulldist import (
    DEFAULT_B,
    K_SAMPLE,
    KINDS,
    TAU,
    TWO_SAMPLE,
    load_table,
    power_study,
    run_test,
    save_table,
    simulate_null,
)
from .statistics import WeightVector

EXIT_OK = 0
EXIT_BATTERY_FAIL = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

CACHE_ENV = "CONVEXGOF_CACHE_DIR"


def _parse_levels(text):
    try:
        levels = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise GeneratorSpecError(f"offending token in levels '{text}': not numbers") from None
    if not levels or any(not 0.0 < a < 1.0 for a in levels):
        raise InvalidParameterError(f"levels must lie in (0, 1), got '{text}'")
    return levels


def _parse_weights(text):
    if text is None:
        return None
    try:
        return WeightVector(tuple(float(t) for t in text.split(",") if t.strip()))
    except ValueError as exc:
        if isinstance(exc, InvalidParameterError):
            raise
        raise GeneratorSpecError(f"offending token in weights '{text}': not numbers") from None


def _parse_sizes(text):
    try:
        sizes = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise GeneratorSpecError(f"offending token in sizes '{text}': not integers") from None
    if not sizes:
        raise InvalidParameterError(f"no sizes given in '{text}'")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convexgof",
        description="Distribution-free two- and k-sample tests from convex generators.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, levels=True):
        p.add_argument("--B", type=int, default=DEFAULT_B, help="Monte Carlo replicates")
        p.add_argument("--seed", type=int, default=0, help="RNG seed (unsigned 64-bit)")
        if levels:
            p.add_argument("--levels", default="0.05,0.01", help="comma-separated test levels")
        p.add_argument("--workers", type=int, default=1, help="worker threads for simulation")
        p.add_argument("--format", choices=("json", "csv"), default="json", dest="output_format")
        p.add_argument("--deterministic", action="store_true",
                       help="suppress the timestamp so output is byte-reproducible")

    def add_cache(p):
        p.add_argument("--cache-dir", default=None, help="null-table cache directory")
        p.add_argument("--no-cache", action="store_true", help="bypass the null-table cache")

    def add_test_common(p):
        add_common(p)
        add_cache(p)
        p.add_argument("--convention", choices=CONVENTIONS, default=RIGHT_CONTINUOUS)
        p.add_argument("--method", choices=("simulation", "permutation"), default="simulation")

    p2 = sub.add_parser("test2", help="two-sample test with a convex generator")
    p2.add_argument("--h", "--generator", dest="generator_spec", required=True,
                    help="generator spec, e.g. power:2")
    p2.add_argument("--x", required=True, help="first sample file")
    p2.add_argument("--y", required=True, help="second sample file")
    add_test_common(p2)

    pk = sub.add_parser("testk", help="k-sample test with a convex generator")
    pk.add_argument("--h", "--generator", dest="generator_spec", required=True)
    pk.add_argument("--inputs", nargs="+", required=True, help="sample files (>= 2)")
    pk.add_argument("--weights", default=None, help="comma-separated positive weights summing to 1")
    add_test_common(pk)

    pt = sub.add_parser("tau", help="two-sample test with a log-convex generator")
    pt.add_argument("--xi", "--generator", dest="generator_spec", required=True,
                    help="generator spec, e.g. expsq:1")
    pt.add_argument("--x", required=True)
    pt.add_argument("--y", required=True)
    add_test_common(pt)

    pn = sub.add_parser("null-table", help="simulate and store a null table")
    pn.add_argument("--kind", choices=KINDS, required=True)
    pn.add_argument("--generator", dest="generator_spec", required=True)
    pn.add_argument("--sizes", required=True, help="comma-separated sample sizes")
    pn.add_argument("--weights", default=None)
    pn.add_argument("--out", default=None, help="output file (default: cache directory)")
    add_common(pn, levels=False)
    add_cache(pn)

    pp = sub.add_parser("power", help="power study against a uniform-baseline alternative")
    pp.add_argument("--kind", choices=KINDS, default=TWO_SAMPLE)
    pp.add_argument("--generator", dest="generator_spec", required=True)
    pp.add_argument("--alternative", required=True, help="shift:d | scale:s | lehmann:t")
    pp.add_argument("--sizes", required=True)
    pp.add_argument("--weights", default=None)
    pp.add_argument("--B-null", type=int, default=999, dest="B_null")
    pp.add_argument("--B-power", type=int, default=500, dest="B_power")
    pp.add_argument("--seed", type=int, default=0)
    pp.add_argument("--levels", default="0.05")
    pp.add_argument("--workers", type=int, default=1)
    pp.add_argument("--format", choices=("json", "csv"), default="json", dest="output_format")
    pp.add_argument("--deterministic", action="store_true")

    pv = sub.add_parser("verify", help="run the population-level oracle battery")
    pv.add_argument("--csv", default=None, help="also export battery results to this CSV file")
    return parser


def _generator_for(kind, spec):
    generator = parse_generator_spec(spec)
    if kind == TAU and not isinstance(generator, LogConvexGenerator):
        raise GeneratorSpecError(
            f"generator spec '{spec}' is not log-convex; tau needs e.g. expsq:alpha")
    if kind != TAU and not isinstance(generator, ConvexGenerator):
        raise GeneratorSpecError(
            f"generator spec '{spec}' is not a convex generator; use power/poly/bernstein")
    return generator


def _cache_path(args, kind, sizes, weights):
    if getattr(args, "no_cache", False):
        return None
    base = getattr(args, "cache_dir", None) or os.environ.get(CACHE_ENV)
    if base is None:
        base = Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "convexgof"
    wtxt = "-" if weights is None else ",".join(repr(w) for w in weights.weights)
    key = "|".join([kind, args.generator_spec, ",".join(map(str, sizes)), wtxt,
                    str(args.B), str(args.seed), "v1"])
    digest = hashlib.sha256(key.encode("utf-8")).hexdigest()
    return Path(base) / f"{digest}.csv"


def _table_via_cache(args, kind, generator, sizes, weights):
    path = _cache_path(args, kind, sizes, weights)
    if path is not None and path.exists():
        return load_table(path), True
    table = simulate_null(kind, generator, sizes, B=args.B, seed=args.seed,
                          weights=weights, workers=args.workers)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_table(table, path)
    return table, False


def _report_dict(args, kind, report, inputs):
    stat = report.statistic
    table = report.table
    doc = {
        "command": args.command,
        "version": __version__,
        "kind": kind,
        "generator": args.generator_spec,
        "inputs": list(inputs),
        "convention": args.convention,
        "method": report.method,
        "statistic": {
            "value": stat.value,
            "raw_functional": stat.raw_functional,
            "centering_constant": stat.centering_constant,
            "tie_count": stat.tie_count,
            "generator_name": stat.generator_name,
        },
        "p_value": report.p_value,
        "critical_values": {f"{a:g}": v for a, v in report.critical_values.items()},
        "null_table": {
            "kind": table.statistic_kind,
            "B": table.B,
            "seed": table.seed,
            "sizes": list(table.sample_sizes),
            "weights": None if table.weights is None else list(table.weights),
            "generator_name": table.generator_name,
        },
        "warnings": list(report.warnings),
    }
    if not args.deterministic:
        doc["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return doc


def _emit_report(args, doc, out):
    if args.output_format == "json":
        json.dump(doc, out, indent=2)
        out.write("\n")
        return
    import csv

    stat = doc["statistic"]
    header = ["command", "generator", "value", "raw_functional", "centering_constant",
              "tie_count", "p_value"]
    row = [doc["command"], doc["generator"], repr(stat["value"]), repr(stat["raw_functional"]),
           repr(stat["centering_constant"]), stat["tie_count"], repr(doc["p_value"])]
    for level, cv in doc["critical_values"].items():
        header.append(f"critical_value_{level}")
        row.append(repr(cv))
    header += ["B", "seed", "warnings"]
    row += [doc["null_table"]["B"], doc["null_table"]["seed"], ";".join(doc["warnings"])]
    writer = csv.writer(out)
    writer.writerow(header)
    writer.writerow(row)


def _cmd_test(args, out):
    if args.command == "test2":
        kind, paths = TWO_SAMPLE, [args.x, args.y]
        weights = None
    elif args.command == "tau":
        kind, paths = TAU, [args.x, args.y]
        weights = None
    else:
        kind, paths = K_SAMPLE, list(args.inputs)
        if len(paths) < 2:
            raise InvalidParameterError("testk requires at least two samples")
        weights = _parse_weights(args.weights)
    generator = _generator_for(kind, args.generator_spec)
    samples = [read_sample(p) for p in paths]
    levels = _parse_levels(args.levels)
    if args.method == "simulation":
        # cache hits are bit-identical to regeneration, so reports are too
        table, _ = _table_via_cache(args, kind, generator,
                                    tuple(s.n for s in samples), weights)
        report = run_test(kind, generator, samples, weights=weights, levels=levels,
                          convention=args.convention, table=table)
    else:
        report = run_test(kind, generator, samples, weights=weights, B=args.B,
                          seed=args.seed, levels=levels, convention=args.convention,
                          workers=args.workers, method="permutation")
    _emit_report(args, _report_dict(args, kind, report, paths), out)
    return EXIT_OK


def _cmd_null_table(args, out):
    kind = args.kind
    generator = _generator_for(kind, args.generator_spec)
    sizes = _parse_sizes(args.sizes)
    weights = _parse_weights(args.weights)
    table, cached = _table_via_cache(args, kind, generator, sizes, weights)
    if args.out is not None:
        save_table(table, args.out)
        location = args.out
    else:
        path = _cache_path(args, kind, sizes, weights)
        if path is None:
            raise InvalidParameterError("--no-cache requires --out to store the table")
        location = str(path)
    doc = {
        "command": "null-table",
        "version": __version__,
        "kind": kind,
        "generator": args.generator_spec,
        "sizes": list(sizes),
        "weights": None if weights is None else list(weights.weights),
        "B": table.B,
        "seed": table.seed,
        "cache_hit": cached,
        "path": location,
    }
    if not args.deterministic:
        doc["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    if args.output_format == "json":
        json.dump(doc, out, indent=2)
        out.write("\n")
    else:
        import csv

        flat = {k: ",".join(map(str, v)) if isinstance(v, list) else v
                for k, v in doc.items()}
        writer = csv.writer(out)
        writer.writerow(list(flat))
        writer.writerow([flat[k] for k in flat])
    return EXIT_OK


def _cmd_power(args, out):
    kind = args.kind
    generator = _generator_for(kind, args.generator_spec)
    sizes = _parse_sizes(args.sizes)
    weights = _parse_weights(args.weights)
    levels = _parse_levels(args.levels)
    result = power_study(kind, generator, args.alternative, sizes,
                         B_null=args.B_null, B_power=args.B_power, seed=args.seed,
                         levels=levels, weights=weights, workers=args.workers)
    doc = {
        "command": "power",
        "version": __version__,
        "kind": kind,
        "generator": args.generator_spec,
        "alternative": result.alternative,
        "sizes": list(result.sample_sizes),
        "B_null": result.B_null,
        "B_power": result.B_power,
        "seed": result.seed,
        "power": {f"{a:g}": {"estimate": est, "std_error": se}
                  for a, (est, se) in sorted(result.power.items())},
    }
    if not args.deterministic:
        doc["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    if args.output_format == "json":
        json.dump(doc, out, indent=2)
        out.write("\n")
    else:
        import csv

        writer = csv.writer(out)
        writer.writerow(["level", "power", "std_error", "alternative", "B_null", "B_power", "seed"])
        for a, (est, se) in sorted(result.power.items()):
            writer.writerow([a, repr(est), repr(se), result.alternative,
                             result.B_null, result.B_power, result.seed])
    return EXIT_OK


def _cmd_verify(args, out):
    from .oracle import battery_to_csv, run_battery

    cases = run_battery()
    failed = 0
    for case in cases:
        status = "PASS" if case.passed else "FAIL"
        if not case.passed:
            failed += 1
        out.write(f"[{status}] {case.case_id} value={case.value:.6e} tolerance={case.tolerance:g}\n")
    out.write(f"{len(cases) - failed}/{len(cases)} oracle checks passed\n")
    if args.csv is not None:
        battery_to_csv(cases, args.csv)
    return EXIT_OK if failed == 0 else EXIT_BATTERY_FAIL


def run(argv=None, out=None, err=None) -> int:
    """Parse arguments and execute; returns the process exit code."""
    out = out if out is not None else sys.stdout
    err = err if err is not None else sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed a message; map its failure to a config error
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        if args.command in ("test2", "testk", "tau"):
            return _cmd_test(args, out)
        if args.command == "null-table":
            return _cmd_null_table(args, out)
        if args.command == "power":
            return _cmd_power(args, out)
        return _cmd_verify(args, out)
    except (GeneratorSpecError, InvalidParameterError, EnumerationTooLargeError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except DataIngestionError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_DATA
    except QuadratureError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_NUMERICAL


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
