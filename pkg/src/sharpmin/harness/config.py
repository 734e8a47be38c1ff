"""Experiment configuration: strict JSON schema, defaults, fingerprinting.

Configs are plain JSON. Unknown keys are rejected at every nesting level so a
typo in "alpha" or "rho_max" fails loudly instead of silently corrupting a
sweep. ``parse_config`` applies defaults and returns a fully validated
ExperimentConfig whose canonical dict (all defaults materialized) feeds the
sha256 fingerprint: it changes iff some config field changes.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigurationError
from ..optimizer import LR_SHAPES, RHO_SHAPES, GsamConfig, LrSchedule, RhoSchedule, Variant

EIGEN_MODES = ("off", "at_end", "every_k")
OBJECTIVE_KINDS = ("quadratic", "landscape2d", "mlp")
INIT_KINDS = ("constant", "normal", "uniform_box", "fan_in")
BASE_KINDS = ("sgd_momentum", "adamw_style")
LANDSCAPE_PRESETS = ("two_scale_ridge",)


def _expect_mapping(node, context: str) -> dict:
    if not isinstance(node, dict):
        raise ConfigurationError(f"{context}: expected an object, got {type(node).__name__}")
    return node


def _check_keys(node: dict, allowed: set[str], required: set[str], context: str):
    unknown = set(node) - allowed
    if unknown:
        raise ConfigurationError(f"{context}: unknown keys {sorted(unknown)}")
    missing = required - set(node)
    if missing:
        raise ConfigurationError(f"{context}: missing required keys {sorted(missing)}")


def _number(node: dict, key: str, context: str, default=None, minimum=None, positive=False):
    if key not in node:
        return default
    value = node[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{context}.{key}: expected a number, got {value!r}")
    value = float(value)
    if positive and value <= 0:
        raise ConfigurationError(f"{context}.{key}: must be positive, got {value}")
    if minimum is not None and value < minimum:
        raise ConfigurationError(f"{context}.{key}: must be >= {minimum}, got {value}")
    return value


def _integer(node: dict, key: str, context: str, default=None, minimum=None):
    if key not in node:
        return default
    value = node[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"{context}.{key}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigurationError(f"{context}.{key}: must be >= {minimum}, got {value}")
    return value


def _parse_init(node, context: str, objective_kind: str) -> dict:
    defaults = {
        "quadratic": {"kind": "normal", "scale": 1.0},
        "landscape2d": {"kind": "uniform_box", "low": [1.8, -0.6], "high": [2.6, 0.6]},
        "mlp": {"kind": "fan_in", "scale": 1.0},
    }
    if node is None:
        return defaults[objective_kind]
    node = _expect_mapping(node, context)
    kind = node.get("kind")
    if kind not in INIT_KINDS:
        raise ConfigurationError(f"{context}.kind: must be one of {INIT_KINDS}, got {kind!r}")
    if kind == "constant":
        _check_keys(node, {"kind", "values"}, {"kind", "values"}, context)
        values = node["values"]
        if not isinstance(values, list) or not all(isinstance(v, (int, float)) for v in values):
            raise ConfigurationError(f"{context}.values: expected a list of numbers")
        return {"kind": "constant", "values": [float(v) for v in values]}
    if kind == "normal":
        _check_keys(node, {"kind", "scale"}, {"kind"}, context)
        return {"kind": "normal", "scale": _number(node, "scale", context, default=1.0, positive=True)}
    if kind == "uniform_box":
        _check_keys(node, {"kind", "low", "high"}, {"kind", "low", "high"}, context)
        low, high = node["low"], node["high"]
        for name, edge in (("low", low), ("high", high)):
            if not isinstance(edge, list) or not all(isinstance(v, (int, float)) for v in edge):
                raise ConfigurationError(f"{context}.{name}: expected a list of numbers")
        if len(low) != len(high) or any(a > b for a, b in zip(low, high)):
            raise ConfigurationError(f"{context}: low/high must align with low <= high")
        return {"kind": "uniform_box", "low": [float(v) for v in low], "high": [float(v) for v in high]}
    # fan_in (mlp only)
    if objective_kind != "mlp":
        raise ConfigurationError(f"{context}: fan_in init applies to mlp objectives only")
    _check_keys(node, {"kind", "scale"}, {"kind"}, context)
    return {"kind": "fan_in", "scale": _number(node, "scale", context, default=1.0, positive=True)}


def _parse_objective(node, context: str = "objective") -> dict:
    node = _expect_mapping(node, context)
    kind = node.get("kind")
    if kind not in OBJECTIVE_KINDS:
        raise ConfigurationError(f"{context}.kind: must be one of {OBJECTIVE_KINDS}, got {kind!r}")
    if kind == "quadratic":
        _check_keys(node, {"kind", "hessian_diag", "hessian", "init"}, {"kind"}, context)
        diag, full = node.get("hessian_diag"), node.get("hessian")
        if (diag is None) == (full is None):
            raise ConfigurationError(f"{context}: give exactly one of hessian_diag / hessian")
        out = {"kind": "quadratic"}
        if diag is not None:
            if not isinstance(diag, list) or not diag:
                raise ConfigurationError(f"{context}.hessian_diag: expected a nonempty list")
            out["hessian_diag"] = [float(v) for v in diag]
            dim = len(diag)
        else:
            if not isinstance(full, list) or not all(isinstance(row, list) for row in full):
                raise ConfigurationError(f"{context}.hessian: expected a list of rows")
            out["hessian"] = [[float(v) for v in row] for row in full]
            dim = len(full)
        out["init"] = _parse_init(node.get("init"), f"{context}.init", kind)
        if out["init"]["kind"] == "constant" and len(out["init"]["values"]) != dim:
            raise ConfigurationError(f"{context}.init.values: length must equal dim {dim}")
        return out
    if kind == "landscape2d":
        _check_keys(node, {"kind", "preset", "tilt", "wells", "init"}, {"kind"}, context)
        preset, wells = node.get("preset"), node.get("wells")
        if (preset is None) == (wells is None):
            raise ConfigurationError(f"{context}: give exactly one of preset / wells")
        out = {"kind": "landscape2d"}
        if preset is not None:
            if preset not in LANDSCAPE_PRESETS:
                raise ConfigurationError(
                    f"{context}.preset: must be one of {LANDSCAPE_PRESETS}, got {preset!r}"
                )
            out["preset"] = preset
        else:
            parsed_wells = []
            for i, well in enumerate(wells):
                well = _expect_mapping(well, f"{context}.wells[{i}]")
                _check_keys(well, {"center", "depth", "width"}, {"center", "depth", "width"},
                            f"{context}.wells[{i}]")
                center = well["center"]
                if not isinstance(center, list) or len(center) != 2:
                    raise ConfigurationError(f"{context}.wells[{i}].center: expected [x, y]")
                parsed_wells.append({
                    "center": [float(center[0]), float(center[1])],
                    "depth": _number(well, "depth", f"{context}.wells[{i}]", positive=True),
                    "width": _number(well, "width", f"{context}.wells[{i}]", positive=True),
                })
            out["wells"] = parsed_wells
            out["tilt"] = _number(node, "tilt", context, default=0.05)
        out["init"] = _parse_init(node.get("init"), f"{context}.init", kind)
        return out
    # mlp
    _check_keys(node, {"kind", "layer_sizes", "activation", "dataset", "init"},
                {"kind", "layer_sizes", "activation", "dataset"}, context)
    sizes = node["layer_sizes"]
    if not isinstance(sizes, list) or len(sizes) < 2 or not all(
        isinstance(s, int) and s >= 1 for s in sizes
    ):
        raise ConfigurationError(f"{context}.layer_sizes: expected a list of >=2 positive ints")
    if node["activation"] not in ("tanh", "relu"):
        raise ConfigurationError(f"{context}.activation: expected tanh or relu")
    ds = _expect_mapping(node["dataset"], f"{context}.dataset")
    _check_keys(ds, {"seed", "n_per_class", "d", "classes", "spread"},
                {"seed", "n_per_class", "d", "classes", "spread"}, f"{context}.dataset")
    dataset = {
        "seed": _integer(ds, "seed", f"{context}.dataset", minimum=0),
        "n_per_class": _integer(ds, "n_per_class", f"{context}.dataset", minimum=1),
        "d": _integer(ds, "d", f"{context}.dataset", minimum=1),
        "classes": _integer(ds, "classes", f"{context}.dataset", minimum=1),
        "spread": _number(ds, "spread", f"{context}.dataset", positive=True),
    }
    if sizes[0] != dataset["d"] or sizes[-1] != dataset["classes"]:
        raise ConfigurationError(
            f"{context}.layer_sizes: ends must match dataset dims "
            f"({dataset['d']} -> {dataset['classes']})"
        )
    return {
        "kind": "mlp",
        "layer_sizes": list(sizes),
        "activation": node["activation"],
        "dataset": dataset,
        "init": _parse_init(node.get("init"), f"{context}.init", kind),
    }


@dataclass(frozen=True)
class ExperimentConfig:
    objective: dict
    variant: Variant
    gsam: GsamConfig
    epsilon: float
    base_optimizer: dict
    lr_schedule: LrSchedule
    rho_schedule: RhoSchedule
    total_steps: int
    batch_size: int
    seeds: tuple[int, ...]
    log_every: int
    eigen_eval: dict
    eigen: dict
    output_dir: str

    def to_dict(self) -> dict:
        """Canonical dict with every default materialized."""
        return {
            "objective": self.objective,
            "variant": self.variant.value,
            "gsam": {
                "alpha": self.gsam.alpha,
                "rho_max": self.gsam.rho_max,
                "rho_min": self.gsam.rho_min,
                "lambda": self.gsam.lam,
                "decomp_guard": self.gsam.decomp_guard,
                "epsilon": self.epsilon,
            },
            "base_optimizer": self.base_optimizer,
            "lr_schedule": {
                "shape": self.lr_schedule.shape,
                "lr_max": self.lr_schedule.lr_max,
                "lr_min": self.lr_schedule.lr_min,
                "warmup_steps": self.lr_schedule.warmup_steps,
            },
            "rho_schedule": {
                "shape": self.rho_schedule.shape,
                "rho_0": self.rho_schedule.rho_0,
            },
            "total_steps": self.total_steps,
            "batch_size": self.batch_size,
            "seeds": list(self.seeds),
            "log_every": self.log_every,
            "eigen_eval": self.eigen_eval,
            "eigen": self.eigen,
            "output_dir": self.output_dir,
        }

    def fingerprint(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def dataset_size(self) -> int | None:
        if self.objective["kind"] != "mlp":
            return None
        ds = self.objective["dataset"]
        return ds["n_per_class"] * ds["classes"]


TOP_KEYS = {
    "objective", "variant", "gsam", "base_optimizer", "lr_schedule", "rho_schedule",
    "total_steps", "epochs", "batch_size", "seeds", "log_every", "eigen_eval",
    "eigen", "output_dir",
}


def parse_config(raw: dict) -> ExperimentConfig:
    raw = _expect_mapping(raw, "config")
    _check_keys(raw, TOP_KEYS, {"objective", "variant", "lr_schedule", "seeds"}, "config")

    objective = _parse_objective(raw["objective"])

    try:
        variant = Variant(raw["variant"])
    except ValueError:
        raise ConfigurationError(
            f"config.variant: must be one of {[v.value for v in Variant]}, got {raw['variant']!r}"
        ) from None

    gsam_node = _expect_mapping(raw.get("gsam", {}), "config.gsam")
    _check_keys(gsam_node, {"alpha", "rho_max", "rho_min", "lambda", "decomp_guard", "epsilon"},
                set(), "config.gsam")
    gsam = GsamConfig(
        alpha=_number(gsam_node, "alpha", "config.gsam", default=0.0, minimum=0.0),
        rho_max=_number(gsam_node, "rho_max", "config.gsam", default=0.0, minimum=0.0),
        rho_min=_number(gsam_node, "rho_min", "config.gsam", default=0.0, minimum=0.0),
        variant=variant,
        lam=_number(gsam_node, "lambda", "config.gsam", default=0.0, minimum=0.0),
        decomp_guard=_number(gsam_node, "decomp_guard", "config.gsam", default=1e-12, positive=True),
    )
    epsilon = _number(gsam_node, "epsilon", "config.gsam", default=1e-12, positive=True)

    base_node = _expect_mapping(raw.get("base_optimizer", {"kind": "sgd_momentum"}),
                                "config.base_optimizer")
    _check_keys(base_node, {"kind", "momentum", "beta1", "beta2", "eps", "weight_decay"},
                {"kind"}, "config.base_optimizer")
    if base_node["kind"] not in BASE_KINDS:
        raise ConfigurationError(
            f"config.base_optimizer.kind: must be one of {BASE_KINDS}, got {base_node['kind']!r}"
        )
    base_optimizer = {
        "kind": base_node["kind"],
        "momentum": _number(base_node, "momentum", "config.base_optimizer", default=0.9, minimum=0.0),
        "beta1": _number(base_node, "beta1", "config.base_optimizer", default=0.9, minimum=0.0),
        "beta2": _number(base_node, "beta2", "config.base_optimizer", default=0.999, minimum=0.0),
        "eps": _number(base_node, "eps", "config.base_optimizer", default=1e-8, positive=True),
        "weight_decay": _number(base_node, "weight_decay", "config.base_optimizer",
                                default=0.0, minimum=0.0),
    }

    batch_size = _integer(raw, "batch_size", "config", default=0, minimum=0)

    total_steps = _integer(raw, "total_steps", "config", minimum=1)
    epochs = _integer(raw, "epochs", "config", minimum=1)
    if (total_steps is None) == (epochs is None):
        raise ConfigurationError("config: give exactly one of total_steps / epochs")
    if epochs is not None:
        if objective["kind"] == "mlp" and batch_size > 0:
            n = objective["dataset"]["n_per_class"] * objective["dataset"]["classes"]
            steps_per_epoch = math.ceil(n / batch_size)
        else:
            steps_per_epoch = 1
        total_steps = epochs * steps_per_epoch

    lr_node = _expect_mapping(raw["lr_schedule"], "config.lr_schedule")
    _check_keys(lr_node, {"shape", "lr_max", "lr_min", "warmup_steps"}, {"lr_max"},
                "config.lr_schedule")
    shape = lr_node.get("shape", "constant")
    if shape not in LR_SHAPES:
        raise ConfigurationError(
            f"config.lr_schedule.shape: must be one of {LR_SHAPES}, got {shape!r}"
        )
    lr_schedule = LrSchedule(
        lr_max=_number(lr_node, "lr_max", "config.lr_schedule", positive=True),
        lr_min=_number(lr_node, "lr_min", "config.lr_schedule", default=0.0, minimum=0.0),
        warmup_steps=_integer(lr_node, "warmup_steps", "config.lr_schedule", default=0, minimum=0),
        total_steps=total_steps,
        shape=shape,
    )

    rho_node = _expect_mapping(raw.get("rho_schedule", {}), "config.rho_schedule")
    _check_keys(rho_node, {"shape", "rho_0"}, set(), "config.rho_schedule")
    rho_shape = rho_node.get("shape", "linear_with_lr")
    if rho_shape not in RHO_SHAPES:
        raise ConfigurationError(
            f"config.rho_schedule.shape: must be one of {RHO_SHAPES}, got {rho_shape!r}"
        )
    rho_schedule = RhoSchedule(
        shape=rho_shape,
        rho_min=gsam.rho_min,
        rho_max=gsam.rho_max,
        rho_0=_number(rho_node, "rho_0", "config.rho_schedule", default=0.0, minimum=0.0),
    )

    seeds = raw["seeds"]
    if not isinstance(seeds, list) or not seeds or not all(
        isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds
    ):
        raise ConfigurationError("config.seeds: expected a nonempty list of nonnegative ints")
    if len(set(seeds)) != len(seeds):
        raise ConfigurationError("config.seeds: seeds must be distinct")

    eigen_eval_raw = raw.get("eigen_eval", "off")
    if isinstance(eigen_eval_raw, dict) and eigen_eval_raw.get("mode") in ("off", "at_end"):
        eigen_eval_raw = eigen_eval_raw["mode"]  # canonical form round-trips
    elif isinstance(eigen_eval_raw, dict) and eigen_eval_raw.get("mode") == "every_k":
        eigen_eval_raw = {"every_k": eigen_eval_raw.get("k")}
    if eigen_eval_raw in ("off", "at_end"):
        eigen_eval = {"mode": eigen_eval_raw}
    elif isinstance(eigen_eval_raw, dict) and set(eigen_eval_raw) == {"every_k"}:
        k = eigen_eval_raw["every_k"]
        if not isinstance(k, int) or k < 1:
            raise ConfigurationError("config.eigen_eval.every_k: expected a positive int")
        eigen_eval = {"mode": "every_k", "k": k}
    else:
        raise ConfigurationError(
            'config.eigen_eval: expected "off", "at_end" or {"every_k": k}'
        )

    eigen_node = _expect_mapping(raw.get("eigen", {}), "config.eigen")
    _check_keys(eigen_node, {"subset_fraction", "rho", "max_iters", "tol"}, set(), "config.eigen")
    subset_fraction = _number(eigen_node, "subset_fraction", "config.eigen", default=0.1, positive=True)
    if subset_fraction > 1.0:
        raise ConfigurationError("config.eigen.subset_fraction: must be <= 1")
    eigen = {
        "subset_fraction": subset_fraction,
        "rho": _number(eigen_node, "rho", "config.eigen", default=0.01, positive=True),
        "max_iters": _integer(eigen_node, "max_iters", "config.eigen", default=500, minimum=1),
        "tol": _number(eigen_node, "tol", "config.eigen", default=1e-8, positive=True),
    }

    output_dir = raw.get("output_dir", "runs")
    if not isinstance(output_dir, str):
        raise ConfigurationError("config.output_dir: expected a string path")

    return ExperimentConfig(
        objective=objective,
        variant=variant,
        gsam=gsam,
        epsilon=epsilon,
        base_optimizer=base_optimizer,
        lr_schedule=lr_schedule,
        rho_schedule=rho_schedule,
        total_steps=total_steps,
        batch_size=batch_size,
        seeds=tuple(seeds),
        log_every=_integer(raw, "log_every", "config", default=1, minimum=1),
        eigen_eval=eigen_eval,
        eigen=eigen,
        output_dir=output_dir,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigurationError(f"cannot read config {path}: {err}") from err
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigurationError(
            f"config {path} is not valid JSON (line {err.lineno}, column {err.colno}): {err.msg}"
        ) from err
    return parse_config(raw)


def vanilla_control(config: ExperimentConfig) -> ExperimentConfig:
    """The matched-budget control: vanilla updates, no perturbation, twice the steps."""
    raw = config.to_dict()
    raw["variant"] = Variant.VANILLA.value
    raw["gsam"]["rho_max"] = 0.0
    raw["gsam"]["rho_min"] = 0.0
    raw["rho_schedule"]["rho_0"] = 0.0
    raw["total_steps"] = 2 * config.total_steps
    return parse_config(raw)
