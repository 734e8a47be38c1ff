"""Grids of runs: expansion, optional process parallelism, comparison tables.

Every run is fully isolated (own config, seed, output directory), so the
sweep's outputs are independent of the parallelism degree; rows and
aggregates are assembled in job order, never completion order.
"""

from __future__ import annotations

import csv
import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ..errors import ConfigurationError
from .config import parse_config
from .outputs import resolve_output_dir, write_outputs
from .run import run

RUN_ROW_FIELDS = (
    "job", "variant", "alpha", "rho_max", "rho_min", "lambda", "seed",
    "final_f", "final_f_p", "final_h", "dataset_gap",
    "train_accuracy", "test_accuracy", "sigma_power", "sigma_gap_proxy",
    "failed", "error",
)
AGGREGATE_METRICS = ("final_f", "final_h", "dataset_gap", "test_accuracy", "sigma_power")


def set_path(raw: dict, dotted: str, value):
    """Assign into a nested dict by dotted path, creating intermediate maps."""
    keys = dotted.split(".")
    node = raw
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigurationError(f"grid key {dotted!r}: {key!r} is not an object")
    node[keys[-1]] = value


def expand_grid(base_raw: dict, grid: dict[str, list]) -> list[tuple[dict, dict]]:
    """Cartesian product of grid values over the base config.

    Returns (combo, raw-config) pairs in deterministic order: grid keys
    sorted, values in the order given. Each raw config revalidates through
    the strict parser, so typo'd grid keys fail loudly.
    """
    if not grid:
        return [({}, json.loads(json.dumps(base_raw)))]
    keys = sorted(grid)
    for key, values in grid.items():
        if not isinstance(values, list) or not values:
            raise ConfigurationError(f"grid key {key!r}: expected a nonempty list of values")
    combos = []
    for values in itertools.product(*(grid[k] for k in keys)):
        raw = json.loads(json.dumps(base_raw))  # deep copy
        combo = dict(zip(keys, values))
        for key, value in combo.items():
            set_path(raw, key, value)
        combos.append((combo, raw))
    return combos


def _execute_job(args: tuple) -> dict:
    job, combo, raw, seed, out_dir = args
    row = {field: "" for field in RUN_ROW_FIELDS}
    row.update(job=job, seed=seed, failed=False, error="")
    try:
        config = parse_config(raw)
        result = run(config, seed)
        if out_dir is not None:
            write_outputs(result, Path(out_dir), config)
        row.update(
            variant=config.variant.value,
            alpha=config.gsam.alpha,
            rho_max=config.gsam.rho_max,
            rho_min=config.gsam.rho_min,
            **{"lambda": config.gsam.lam},
            final_f=result.summary["final_f"],
            final_f_p=result.summary["final_f_p"],
            final_h=result.summary["final_h"],
            dataset_gap=result.summary["dataset_gap"],
            train_accuracy=result.summary.get("train_accuracy", ""),
            test_accuracy=result.summary.get("test_accuracy", ""),
            sigma_power=result.sharpness.sigma_power if result.sharpness else "",
            sigma_gap_proxy=result.sharpness.sigma_gap_proxy if result.sharpness else "",
            failed=result.failed,
            error=result.failure or "",
        )
    except Exception as err:  # individual failures recorded, sweep continues
        row.update(failed=True, error=f"{type(err).__name__}: {err}")
    return row


def sweep(base_raw: dict, grid: dict[str, list], parallel: int = 1,
          out_dir: str | Path | None = None, seeds: list[int] | None = None) -> dict:
    """Run the grid x seeds product; returns rows, aggregates and paths."""
    combos = expand_grid(base_raw, grid)
    if seeds is None:
        # Light read here; each job still goes through the strict parser.
        seeds = base_raw.get("seeds")
        if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
            raise ConfigurationError("config.seeds: expected a nonempty list of ints")
    if not combos or not seeds:
        raise ConfigurationError("sweep needs at least one config and one seed")
    out_root = resolve_output_dir(out_dir) if out_dir is not None else None

    jobs = []
    job_combo = {}
    for i, (combo, raw) in enumerate(combos):
        for seed in seeds:
            job = len(jobs)
            job_dir = str(out_root / f"run{i:04d}_seed{seed}") if out_root else None
            jobs.append((job, combo, raw, seed, job_dir))
            job_combo[job] = (i, combo)

    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            rows = list(pool.map(_execute_job, jobs))
    else:
        rows = [_execute_job(job) for job in jobs]

    aggregates = _aggregate(rows, jobs, len(combos))
    paths = {}
    if out_root is not None:
        out_root.mkdir(parents=True, exist_ok=True)
        paths["runs_csv"] = _write_csv(out_root / "sweep_runs.csv", RUN_ROW_FIELDS, rows)
        agg_fields = ("combo", "grid", "variant", "alpha", "rho_max", "n_seeds") + tuple(
            f"{m}_{stat}" for m in AGGREGATE_METRICS for stat in ("mean", "median")
        )
        paths["aggregate_csv"] = _write_csv(out_root / "sweep_aggregate.csv", agg_fields, aggregates)
    return {"rows": rows, "aggregates": aggregates, "paths": paths}


def _aggregate(rows: list[dict], jobs: list[tuple], n_combos: int) -> list[dict]:
    # job order is combo-major: rows [i*per_combo, (i+1)*per_combo) share combo i
    by_combo: dict[int, list[dict]] = {}
    combo_desc = {}
    per_combo = len(rows) // n_combos
    for i in range(n_combos):
        chunk = rows[i * per_combo : (i + 1) * per_combo]
        by_combo[i] = [r for r in chunk if not r["failed"]]
        combo_desc[i] = jobs[i * per_combo][1]
    aggregates = []
    for i in range(n_combos):
        ok = by_combo[i]
        agg = {
            "combo": i,
            "grid": json.dumps(combo_desc[i], sort_keys=True),
            "variant": ok[0]["variant"] if ok else "",
            "alpha": ok[0]["alpha"] if ok else "",
            "rho_max": ok[0]["rho_max"] if ok else "",
            "n_seeds": len(ok),
        }
        for metric in AGGREGATE_METRICS:
            values = [r[metric] for r in ok if isinstance(r[metric], (int, float))]
            if values:
                ordered = sorted(values)
                mid = len(ordered) // 2
                median = ordered[mid] if len(ordered) % 2 else 0.5 * (ordered[mid - 1] + ordered[mid])
                agg[f"{metric}_mean"] = sum(values) / len(values)
                agg[f"{metric}_median"] = median
            else:
                agg[f"{metric}_mean"] = ""
                agg[f"{metric}_median"] = ""
        aggregates.append(agg)
    return aggregates


def _write_csv(path: Path, fields: tuple, rows: list[dict]) -> Path:
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fields))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fields})
    return path


def compare(run_dirs: list[str | Path], out_dir: str | Path | None = None) -> list[dict]:
    """Summary table across finished run directories."""
    rows = []
    for run_dir in run_dirs:
        summary_path = Path(run_dir) / "summary.json"
        doc = json.loads(summary_path.read_text())
        row = {
            "run_dir": str(run_dir),
            "variant": doc["variant"],
            "seed": doc["seed"],
            "failed": doc["failed"],
            "final_f": doc["summary"]["final_f"],
            "final_h": doc["summary"]["final_h"],
            "dataset_gap": doc["summary"]["dataset_gap"],
            "train_accuracy": doc["summary"].get("train_accuracy", ""),
            "test_accuracy": doc["summary"].get("test_accuracy", ""),
            "sigma_power": doc["sharpness"]["sigma_power"] if doc["sharpness"] else "",
            "fingerprint": doc["fingerprint"],
        }
        rows.append(row)
    if out_dir is not None:
        out_root = resolve_output_dir(out_dir)
        out_root.mkdir(parents=True, exist_ok=True)
        fields = tuple(rows[0]) if rows else ("run_dir",)
        _write_csv(out_root / "comparison.csv", fields, rows)
    return rows
