"""File outputs: trace/trajectory CSV, summary JSON, checkpoints.

Floats are written with repr (shortest round-trip), so identical runs produce
byte-identical files; wall-clock lives in a single summary field and is the
only nondeterministic byte in a run directory.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from ..optimizer import BaseOptimizerState
from .config import ExperimentConfig
from .run import TRACE_COLUMNS, RunResult

OUTPUT_ROOT_ENV = "SHARPMIN_OUTPUT_ROOT"

TRACE_FIELD_BY_COLUMN = {
    "t": "t", "f": "f", "f_p": "f_p", "h": "h", "cos_theta": "cos_theta",
    "grad_norm": "grad_norm", "gp_norm": "gp_norm", "gperp_norm": "gperp_norm",
    "lr": "lr", "rho": "rho", "pred_gap_dec": "predicted_gap_decrease",
}


def resolve_output_dir(out_dir: str | Path) -> Path:
    """Relative output paths may be re-rooted via SHARPMIN_OUTPUT_ROOT."""
    out_dir = Path(out_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out_dir.is_absolute():
        return Path(root) / out_dir
    return out_dir


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_outputs(result: RunResult, out_dir: str | Path,
                  config: ExperimentConfig | None = None) -> dict[str, Path]:
    out_dir = resolve_output_dir(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    trace_path = out_dir / "trace.csv"
    with trace_path.open("w") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for tr in result.traces:
            fh.write(",".join(_fmt(getattr(tr, TRACE_FIELD_BY_COLUMN[c])) for c in TRACE_COLUMNS) + "\n")
    paths["trace"] = trace_path

    summary_doc = {
        "fingerprint": result.fingerprint,
        "seed": result.seed,
        "variant": result.variant,
        "failed": result.failed,
        "failure": result.failure,
        "final_step": result.final_step,
        "summary": result.summary,
        "sharpness": result.sharpness.to_dict() if result.sharpness else None,
        "eigen_snapshots": result.eigen_snapshots,
        "wall_clock_seconds": result.wall_clock_seconds,
    }
    summary_path = out_dir / "summary.json"
    summary_path.write_text(json.dumps(summary_doc, sort_keys=True, indent=2) + "\n")
    paths["summary"] = summary_path

    if result.trajectory:
        traj_path = out_dir / "trajectory.csv"
        with traj_path.open("w") as fh:
            fh.write("t,w0,w1\n")
            for t, w0, w1 in result.trajectory:
                fh.write(f"{t},{_fmt(w0)},{_fmt(w1)}\n")
        paths["trajectory"] = traj_path

    checkpoint_doc = {
        "fingerprint": result.fingerprint,
        "seed": result.seed,
        "step": result.final_step,
        "parameters": [float(v) for v in result.final_w],
        "objective": config.objective if config else None,
        "base_optimizer_state": result.state.to_dict(),
    }
    checkpoint_path = out_dir / "checkpoint.json"
    checkpoint_path.write_text(json.dumps(checkpoint_doc, sort_keys=True, indent=2) + "\n")
    paths["checkpoint"] = checkpoint_path
    return paths


def load_checkpoint(path: str | Path) -> dict:
    path = Path(path)
    doc = json.loads(path.read_text())
    required = {"seed", "step", "parameters", "objective", "base_optimizer_state"}
    missing = required - set(doc)
    if missing:
        raise ConfigurationError(f"checkpoint {path} is missing keys {sorted(missing)}")
    doc["parameters"] = np.array(doc["parameters"], dtype=np.float64)
    doc["base_optimizer_state"] = BaseOptimizerState.from_dict(doc["base_optimizer_state"])
    return doc
