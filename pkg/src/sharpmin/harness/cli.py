"""Command-line interface.

Subcommands: run (one seeded experiment), sweep (config grid x seeds),
eigen (post-hoc sharpness report from a checkpoint), compare (summary table
across run directories). Exit codes: 0 success, 1 validation, 2 numeric
failure, 3 I/O. The only environment override is SHARPMIN_OUTPUT_ROOT, which
re-roots relative output directories.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..errors import ConfigurationError, NumericError
from ..sharpness import sharpness_report
from .config import load_config
from .outputs import load_checkpoint, resolve_output_dir, write_outputs
from .run import build_objective, run
from .sweep import compare, sweep

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERIC = 2
EXIT_IO = 3


def _parse_grid_item(item: str) -> tuple[str, list]:
    if "=" not in item:
        raise ConfigurationError(f"grid spec {item!r} must look like key=v1,v2,...")
    key, _, values = item.partition("=")
    parsed = []
    for chunk in values.split(","):
        try:
            parsed.append(json.loads(chunk))
        except json.JSONDecodeError:
            parsed.append(chunk)
    return key, parsed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sharpmin",
                                     description="Sharpness-aware optimization experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one seeded run")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None,
                       help="defaults to the first seed in the config")
    p_run.add_argument("--out", required=True)

    p_sweep = sub.add_parser("sweep", help="run a config grid across seeds")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--grid", action="append", default=[],
                         help="dotted key=comma,separated,values (repeatable)")
    p_sweep.add_argument("--parallel", type=int, default=1)
    p_sweep.add_argument("--out", required=True)

    p_eigen = sub.add_parser("eigen", help="post-hoc sharpness report from a checkpoint")
    p_eigen.add_argument("--checkpoint", required=True)
    p_eigen.add_argument("--rho", type=float, required=True)
    p_eigen.add_argument("--iters", type=int, default=500)
    p_eigen.add_argument("--seed", type=int, default=0)

    p_cmp = sub.add_parser("compare", help="summary table across run directories")
    p_cmp.add_argument("--out", required=True)
    p_cmp.add_argument("run_dirs", nargs="+")
    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config)
    seed = args.seed if args.seed is not None else config.seeds[0]
    result = run(config, seed)
    paths = write_outputs(result, args.out, config)
    print(f"run seed={seed} variant={result.variant} "
          f"final_f={result.summary['final_f']:.6g} final_h={result.summary['final_h']:.6g}")
    print(f"outputs: {paths['summary'].parent}")
    if result.failed:
        print(f"numeric failure at step {result.final_step + 1}: {result.failure}",
              file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _cmd_sweep(args) -> int:
    raw = json.loads(Path(args.config).read_text())
    grid: dict[str, list] = {}
    for item in args.grid:
        key, values = _parse_grid_item(item)
        grid[key] = values
    outcome = sweep(raw, grid, parallel=args.parallel, out_dir=args.out)
    failed = sum(1 for row in outcome["rows"] if row["failed"])
    print(f"sweep finished: {len(outcome['rows'])} runs, {failed} failed")
    for key, path in outcome["paths"].items():
        print(f"{key}: {path}")
    return EXIT_NUMERIC if failed else EXIT_OK


def _cmd_eigen(args) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    if checkpoint["objective"] is None:
        raise ConfigurationError(
            f"checkpoint {args.checkpoint} carries no objective descriptor"
        )
    spec = build_objective(checkpoint["objective"])
    report = sharpness_report(spec, checkpoint["parameters"], rho=args.rho,
                              max_iters=args.iters, seed=args.seed)
    print(json.dumps(report.to_dict(), sort_keys=True, indent=2))
    return EXIT_OK


def _cmd_compare(args) -> int:
    rows = compare(args.run_dirs, out_dir=args.out)
    for row in rows:
        print(f"{row['run_dir']}: variant={row['variant']} seed={row['seed']} "
              f"final_f={row['final_f']:.6g} final_h={row['final_h']:.6g} "
              f"test_acc={row['test_accuracy']}")
    print(f"comparison written under {resolve_output_dir(args.out)}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    handlers = {"run": _cmd_run, "sweep": _cmd_sweep, "eigen": _cmd_eigen,
                "compare": _cmd_compare}
    try:
        return handlers[args.command](args)
    except ConfigurationError as err:
        print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericError as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, json.JSONDecodeError) as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
