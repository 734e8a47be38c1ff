"""Seeded end-to-end experiment runs.

A run is fully determined by (config, seed): parameter init, batch order and
power-iteration starts come from independent substreams of the seed, so every
output byte except wall-clock is reproducible and runs are isolated enough to
execute concurrently.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..datasets import Dataset, generate_blobs
from ..errors import NumericError
from ..mlp import MlpClassifier
from ..objectives import FULL_BATCH, Array, Batch, Landscape2D, Objective, Quadratic, Well, two_scale_ridge
from ..optimizer import BaseOptimizerState, observe, step
from ..rng import TAG_BATCH, TAG_INIT, TAG_POWER_ITER, substream
from ..sharpness import SharpnessReport, StepTrace, dataset_surrogate_gap, sharpness_report
from .config import ExperimentConfig

TRACE_COLUMNS = ("t", "f", "f_p", "h", "cos_theta", "grad_norm", "gp_norm",
                 "gperp_norm", "lr", "rho", "pred_gap_dec")


@dataclass
class RunResult:
    fingerprint: str
    seed: int
    variant: str
    traces: list[StepTrace]
    trajectory: list[tuple[int, float, float]]  # 2-D objectives only
    final_w: Array
    final_step: int
    state: BaseOptimizerState
    summary: dict
    sharpness: SharpnessReport | None
    eigen_snapshots: list[dict] = field(default_factory=list)
    failed: bool = False
    failure: str | None = None
    wall_clock_seconds: float = 0.0


def build_objective(descriptor: dict) -> Objective:
    kind = descriptor["kind"]
    if kind == "quadratic":
        hessian = descriptor.get("hessian_diag", descriptor.get("hessian"))
        return Quadratic(np.array(hessian, dtype=np.float64))
    if kind == "landscape2d":
        if "preset" in descriptor:
            return two_scale_ridge()
        wells = [Well(center=tuple(w["center"]), depth=w["depth"], width=w["width"])
                 for w in descriptor["wells"]]
        return Landscape2D(wells, tilt=descriptor["tilt"])
    dataset = build_dataset(descriptor, split=0)
    return MlpClassifier(descriptor["layer_sizes"], descriptor["activation"], dataset)


def build_dataset(descriptor: dict, split: int) -> Dataset:
    ds = descriptor["dataset"]
    return generate_blobs(seed=ds["seed"], n_per_class=ds["n_per_class"], d=ds["d"],
                          classes=ds["classes"], spread=ds["spread"], split=split)


def initial_parameters(spec: Objective, descriptor: dict, seed: int) -> Array:
    init = descriptor["init"]
    rng = substream(seed, TAG_INIT)
    if init["kind"] == "constant":
        return np.array(init["values"], dtype=np.float64)
    if init["kind"] == "normal":
        return rng.standard_normal(spec.dim) * init["scale"]
    if init["kind"] == "uniform_box":
        return rng.uniform(np.array(init["low"]), np.array(init["high"]))
    return spec.init_params(rng) * init["scale"]  # fan_in


def draw_batch(seed: int, t: int, n: int, batch_size: int) -> Batch:
    """Minibatch for step t, derived counter-style so it depends only on
    (seed, t), never on how many draws preceded it."""
    if batch_size <= 0 or batch_size >= n:
        return FULL_BATCH
    rng = substream(seed, TAG_BATCH, t)
    idx = rng.choice(n, size=batch_size, replace=False)
    return Batch(tuple(int(i) for i in idx))


def _eigen_batch(config: ExperimentConfig, spec: Objective, seed: int) -> Batch:
    """Deterministic data subset for Hessian eigenvalue measurements."""
    n = config.dataset_size()
    if n is None:
        return FULL_BATCH
    k = max(1, int(round(config.eigen["subset_fraction"] * n)))
    if k >= n:
        return FULL_BATCH
    rng = substream(seed, TAG_POWER_ITER, 1)
    idx = np.sort(rng.choice(n, size=k, replace=False))
    return Batch(tuple(int(i) for i in idx))


def _eigen_report(config: ExperimentConfig, spec: Objective, w: Array, seed: int) -> SharpnessReport:
    return sharpness_report(
        spec, w,
        rho=config.eigen["rho"],
        batch=_eigen_batch(config, spec, seed),
        max_iters=config.eigen["max_iters"],
        tol=config.eigen["tol"],
        seed=seed,
    )


def run(config: ExperimentConfig, seed: int,
        start_w: Array | None = None,
        start_state: BaseOptimizerState | None = None,
        start_step: int = 0) -> RunResult:
    """Execute Algorithm-1 training under the config; deterministic per (config, seed).

    The start_* arguments support checkpoint resume: the batch stream is
    keyed by the step index, so a resumed run continues the original one
    exactly.
    """
    began = time.perf_counter()
    spec = build_objective(config.objective)
    w = start_w.copy() if start_w is not None else initial_parameters(spec, config.objective, seed)
    state = start_state if start_state is not None else BaseOptimizerState(
        kind=config.base_optimizer["kind"],
        dim=spec.dim,
        momentum=config.base_optimizer["momentum"],
        beta1=config.base_optimizer["beta1"],
        beta2=config.base_optimizer["beta2"],
        eps=config.base_optimizer["eps"],
        weight_decay=config.base_optimizer["weight_decay"],
    )

    n = config.dataset_size() or 1
    is_2d = spec.dim == 2
    traces: list[StepTrace] = []
    trajectory: list[tuple[int, float, float]] = []
    eigen_snapshots: list[dict] = []
    if is_2d and start_step == 0:
        trajectory.append((0, float(w[0]), float(w[1])))

    failed = False
    failure = None
    t = start_step
    last_step_trace = None
    eigen_mode = config.eigen_eval["mode"]
    for t in range(start_step + 1, config.total_steps + 1):
        batch = draw_batch(seed, t, n, config.batch_size)
        try:
            w_next, trace = step(spec, w, state, config.gsam, config.lr_schedule,
                                 config.rho_schedule, t, batch, epsilon=config.epsilon)
        except NumericError as err:
            failed = True
            failure = str(err)
            t -= 1
            break
        w = w_next
        last_step_trace = trace
        if t == 1 or t % config.log_every == 0 or t == config.total_steps:
            traces.append(trace)
        if is_2d:
            trajectory.append((t, float(w[0]), float(w[1])))
        if eigen_mode == "every_k" and t % config.eigen_eval["k"] == 0:
            report = _eigen_report(config, spec, w, seed)
            eigen_snapshots.append({"t": t, **report.to_dict()})

    # Terminal measurement row at the reached parameters: full batch, no
    # update, labeled t+1 (the state the next step would see). Pure function
    # of (config, w, t), so a zero-step resume reproduces it exactly, and the
    # summary's final f/f_p/h literally equal the last trace row's.
    final_trace = None
    try:
        final_trace, _, _ = observe(spec, w, config.gsam, config.lr_schedule,
                                    config.rho_schedule, t + 1, FULL_BATCH,
                                    epsilon=config.epsilon)
        traces.append(final_trace)
    except NumericError:
        final_trace = last_step_trace  # last finite trace retained

    sharpness = None
    if eigen_mode in ("at_end", "every_k") and not failed:
        sharpness = _eigen_report(config, spec, w, seed)

    summary = _summarize(config, spec, w, final_trace, failed)
    result = RunResult(
        fingerprint=config.fingerprint(),
        seed=seed,
        variant=config.variant.value,
        traces=traces,
        trajectory=trajectory,
        final_w=w,
        final_step=t,
        state=state,
        summary=summary,
        sharpness=sharpness,
        eigen_snapshots=eigen_snapshots,
        failed=failed,
        failure=failure,
    )
    result.wall_clock_seconds = time.perf_counter() - began
    return result


def _summarize(config: ExperimentConfig, spec: Objective, w: Array,
               final_trace: StepTrace | None, failed: bool) -> dict:
    summary = {
        "final_f": final_trace.f if final_trace else None,
        "final_f_p": final_trace.f_p if final_trace else None,
        "final_h": final_trace.h if final_trace else None,
        "final_rho": final_trace.rho if final_trace else None,
        "failed": failed,
    }
    if failed or final_trace is None:
        summary["dataset_gap"] = None
        return summary
    rho = final_trace.rho
    if isinstance(spec, MlpClassifier):
        test_ds = build_dataset(config.objective, split=1)
        summary["dataset_gap"] = dataset_surrogate_gap(
            spec, w, rho=rho, mode="per_sample",
            batch_size=config.batch_size, epsilon=config.epsilon,
        ) if rho > 0 else 0.0
        summary["train_accuracy"] = spec.accuracy(w)
        summary["test_accuracy"] = spec.accuracy(w, test_ds)
    else:
        summary["dataset_gap"] = summary["final_h"]
    return summary
