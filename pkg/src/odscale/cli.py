"""Command-line interface.

Subcommands mirror the workflow stages: ``generate`` writes a synthetic
scenario, ``estimate`` fits the scaling factor per hour, ``grid-search``
runs the exhaustive benchmark, ``compare`` produces the side-by-side
report, and ``validate-counts`` checks sensor counts after the fact.

Exit codes: 0 on success, 1 when any bundle fails, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path as FsPath

from .batch import DEFAULT_GRID_POINTS, export_counts_validation, run_batch
from .errors import NoSensors, OdscaleError
from .estimate import estimate
from .io import discover_bundles, parse_scenario, read_sensors
from .synthetic import SyntheticSpec, generate_synthetic


def _add_scenario_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--network-dir", required=True, type=FsPath,
                        help="scenario directory (segments.csv, paths.csv, ...)")
    parser.add_argument("--config", type=FsPath, default=None,
                        help="config file overriding <network-dir>/config.txt")
    parser.add_argument("--hour", default=None,
                        help="restrict to one hour label")
    parser.add_argument("--out", required=True, type=FsPath,
                        help="report output directory")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="odscale",
        description="Upscale a subsample OD matrix against ramp-to-ramp "
                    "travel times.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="fit the scaling factor per hour")
    _add_scenario_args(p_est)

    p_grid = sub.add_parser("grid-search", help="exhaustive benchmark search")
    _add_scenario_args(p_grid)
    p_grid.add_argument("--grid-points", type=int, default=DEFAULT_GRID_POINTS,
                        help="number of grid points (default %(default)s)")

    p_cmp = sub.add_parser("compare",
                           help="baseline vs benchmark vs proposed report")
    _add_scenario_args(p_cmp)
    p_cmp.add_argument("--grid-points", type=int, default=DEFAULT_GRID_POINTS,
                       help="number of grid points (default %(default)s)")

    p_gen = sub.add_parser("generate", help="write a synthetic scenario")
    p_gen.add_argument("--out", required=True, type=FsPath,
                       help="scenario output directory")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--segments", type=int, default=30)
    p_gen.add_argument("--ods", type=int, default=12)
    p_gen.add_argument("--path-len", type=int, nargs=2, default=(2, 8),
                       metavar=("MIN", "MAX"))
    p_gen.add_argument("--true-x", type=float, default=8.0)
    p_gen.add_argument("--noise", type=float, default=0.0,
                       help="multiplicative noise std as a fraction")
    p_gen.add_argument("--sensors", type=int, default=0,
                       help="number of segments with count sensors")
    p_gen.add_argument("--hour", default="h00", help="hour label")
    p_gen.add_argument("--x-lower", type=float, default=1.0)
    p_gen.add_argument("--x-upper", type=float, default=100.0)

    p_val = sub.add_parser("validate-counts",
                           help="compare sensor counts against the model")
    _add_scenario_args(p_val)
    return parser


def _cmd_batch(args: argparse.Namespace, mode: str) -> int:
    bundles = discover_bundles(args.network_dir, args.config, args.hour)
    grid_points = getattr(args, "grid_points", DEFAULT_GRID_POINTS)
    report = run_batch(bundles, mode, args.out, grid_points=grid_points)
    if not bundles:
        print("warning: no bundles to process", file=sys.stderr)
    for outcome in report.outcomes:
        if not outcome.ok:
            print(f"hour {outcome.hour}: FAILED ({outcome.error})",
                  file=sys.stderr)
            continue
        row = outcome.row
        if mode == "estimate":
            print(f"hour {outcome.hour}: x_star={row['x_star']:.6g} "
                  f"objective={row['objective_h2']:.3e} "
                  f"converged={row['converged']}")
        elif mode == "grid-search":
            print(f"hour {outcome.hour}: x_benchmark={row['x_benchmark']:.6g} "
                  f"({row['grid_points']} points)")
    if mode == "compare":
        table = FsPath(args.out) / "compare.txt"
        if table.is_file():
            print(table.read_text(encoding="utf-8"), end="")
    print(f"reports written to {args.out}")
    return 1 if report.failures else 0


def _cmd_generate(args: argparse.Namespace) -> int:
    spec = SyntheticSpec(
        segment_count=args.segments,
        od_count=args.ods,
        path_len_range=tuple(args.path_len),
        true_x=args.true_x,
        noise_std_fraction=args.noise,
        rng_seed=args.seed,
        x_lower=args.x_lower,
        x_upper=args.x_upper,
        sensor_count=args.sensors,
    )
    generate_synthetic(spec, args.out, hour=args.hour)
    print(f"wrote scenario to {args.out} (true_x={args.true_x}, "
          f"seed={args.seed})")
    return 0


def _cmd_validate_counts(args: argparse.Namespace) -> int:
    bundles = discover_bundles(args.network_dir, args.config, args.hour)
    with_sensors = [b for b in bundles if b.sensors_path is not None]
    if not with_sensors:
        print("error: no hour provides a sensors file", file=sys.stderr)
        return 1
    failed = False
    for bundle in with_sensors:
        try:
            snapshot, params, gt = parse_scenario(bundle)
            result = estimate(snapshot, params, gt, bundle.options)
            sensors = read_sensors(bundle.sensors_path)
            if not sensors:
                raise NoSensors(f"{bundle.sensors_path} lists no sensors")
            hour_out = FsPath(args.out) / "hours" / bundle.hour
            export_counts_validation(snapshot, params, result, sensors,
                                     hour_out)
            print(f"hour {bundle.hour}: x_star={result.x_star:.6g}, "
                  f"validation written to {hour_out}")
        except Exception as exc:
            print(f"hour {bundle.hour}: FAILED ({type(exc).__name__}: {exc})",
                  file=sys.stderr)
            failed = True
    return 1 if failed else 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "estimate":
            return _cmd_batch(args, "estimate")
        if args.command == "grid-search":
            return _cmd_batch(args, "grid-search")
        if args.command == "compare":
            return _cmd_batch(args, "compare")
        if args.command == "generate":
            return _cmd_generate(args)
        return _cmd_validate_counts(args)
    except OdscaleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
