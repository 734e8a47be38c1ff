"""Sharpness instrumentation: power iteration, dataset-level surrogate gap,
gradient-angle tracking and per-step trace records."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import Dataset
from .errors import ConfigurationError
from .mlp import MlpClassifier
from .objectives import FULL_BATCH, Array, Batch, Objective, check_vector
from .perturbation import PerturbationConfig, adversarial_point, eigvec_ball_gap, sigma_from_gap
from .rng import TAG_POWER_ITER, substream


@dataclass(frozen=True)
class PowerIterationResult:
    sigma: float  # signed Rayleigh quotient at termination
    eigenvector: Array  # unit vector
    iters_used: int
    converged: bool
    residual: float


@dataclass(frozen=True)
class SharpnessReport:
    sigma_power: float
    sigma_gap_proxy: float
    rho_used: float
    power_iters_used: int
    converged: bool
    residual: float

    def to_dict(self) -> dict:
        return {
            "sigma_power": self.sigma_power,
            "sigma_gap_proxy": self.sigma_gap_proxy,
            "rho_used": self.rho_used,
            "power_iters_used": self.power_iters_used,
            "converged": self.converged,
            "residual": self.residual,
        }


@dataclass(frozen=True)
class StepTrace:
    """Per-step record; the raw material for every figure-level check."""

    t: int
    f: float
    f_p: float
    h: float
    cos_theta: float
    grad_norm: float
    gp_norm: float
    gperp_norm: float
    lr: float
    rho: float
    predicted_gap_decrease: float


def power_iteration(
    spec: Objective,
    w: Array,
    batch: Batch = FULL_BATCH,
    max_iters: int = 500,
    tol: float = 1e-8,
    seed: int = 0,
) -> PowerIterationResult:
    """Dominant Hessian eigenvalue via v <- Hv/||Hv||, signed Rayleigh quotient.

    The start vector is drawn from (seed, power-iteration tag); convergence is
    declared when the relative Rayleigh-quotient change drops below tol. When
    max_iters is exhausted the best estimate is returned with converged=False.
    """
    if max_iters < 1:
        raise ConfigurationError(f"max_iters must be >= 1, got {max_iters}")
    if tol <= 0:
        raise ConfigurationError(f"tol must be positive, got {tol}")
    w = check_vector(w, spec.dim)

    v = None
    for attempt in range(4):
        candidate = substream(seed + attempt, TAG_POWER_ITER).standard_normal(spec.dim)
        norm = float(np.linalg.norm(candidate))
        if norm > 0.0:
            v = candidate / norm
            break
    if v is None:
        raise ConfigurationError("could not draw a nonzero start vector in 4 attempts")

    hv = spec.hessian_vector_product(w, v, batch)
    rayleigh = float(v @ hv)
    iters_used = 0
    converged = False
    residual = float("inf")
    for k in range(1, max_iters + 1):
        hv_norm = float(np.linalg.norm(hv))
        if hv_norm == 0.0:
            # v sits in the null space of H: eigenvalue 0, nothing to iterate.
            rayleigh, residual, converged, iters_used = 0.0, 0.0, True, k
            break
        v = hv / hv_norm
        hv = spec.hessian_vector_product(w, v, batch)
        new_rayleigh = float(v @ hv)
        residual = abs(new_rayleigh - rayleigh) / max(abs(new_rayleigh), 1e-300)
        rayleigh = new_rayleigh
        iters_used = k
        if residual <= tol:
            converged = True
            break
    return PowerIterationResult(sigma=rayleigh, eigenvector=v, iters_used=iters_used,
                                converged=converged, residual=residual)


def sharpness_report(
    spec: Objective,
    w: Array,
    rho: float,
    batch: Batch = FULL_BATCH,
    max_iters: int = 500,
    tol: float = 1e-8,
    seed: int = 0,
) -> SharpnessReport:
    """Both eigenvalue estimates at w: power iteration and the 2h/rho^2 proxy."""
    result = power_iteration(spec, w, batch=batch, max_iters=max_iters, tol=tol, seed=seed)
    gap = eigvec_ball_gap(spec, w, result.eigenvector, rho, batch)
    return SharpnessReport(
        sigma_power=result.sigma,
        sigma_gap_proxy=sigma_from_gap(gap.h, rho),
        rho_used=rho,
        power_iters_used=result.iters_used,
        converged=result.converged,
        residual=result.residual,
    )


PER_SAMPLE = "per_sample"
SHARED_DIRECTION = "shared_direction"


def dataset_surrogate_gap(
    spec: Objective,
    w: Array,
    rho: float,
    mode: str = PER_SAMPLE,
    batch_size: int = 0,
    dataset: Dataset | None = None,
    epsilon: float = 1e-12,
) -> float:
    """Training-set surrogate gap: mean over batches of f(w_adv) - f(w).

    per_sample derives the perturbation direction from each batch's own
    gradient (batch granularity, configurable down to batch_size=1);
    shared_direction uses one direction from the full-dataset gradient.
    Analytic objectives reduce to a single full-batch evaluation.
    """
    if mode not in (PER_SAMPLE, SHARED_DIRECTION):
        raise ConfigurationError(f"unknown mode {mode!r}")
    if rho < 0:
        raise ConfigurationError(f"rho must be nonnegative, got {rho}")
    cfg = PerturbationConfig(rho=rho, epsilon=epsilon)
    w = check_vector(w, spec.dim)

    if isinstance(spec, MlpClassifier):
        if dataset is not None:
            spec = spec.with_dataset(dataset)
        n = spec.dataset.n
        if batch_size <= 0 or batch_size >= n:
            batches = [FULL_BATCH]
            sizes = [n]
        else:
            edges = list(range(0, n, batch_size)) + [n]
            batches = [Batch(tuple(range(a, b))) for a, b in zip(edges[:-1], edges[1:])]
            sizes = [b - a for a, b in zip(edges[:-1], edges[1:])]
    else:
        batches = [FULL_BATCH]
        sizes = [1]

    if mode == SHARED_DIRECTION:
        g_full = spec.gradient(w, FULL_BATCH)
        w_adv = adversarial_point(w, g_full, cfg)

    total = 0.0
    for batch, size in zip(batches, sizes):
        if mode == PER_SAMPLE:
            g_b = spec.gradient(w, batch)
            w_adv = adversarial_point(w, g_b, cfg)
        total += size * (spec.value(w_adv, batch) - spec.value(w, batch))
    return total / sum(sizes)


def cos_angle(g: Array, g_p: Array) -> float:
    """Cosine of the angle between g and g_p, clamped to [-1, 1].

    Returns 1.0 when either vector vanishes (the direction question is
    vacuous there; avoids NaN in logs).
    """
    n1 = float(np.linalg.norm(g))
    n2 = float(np.linalg.norm(g_p))
    if n1 == 0.0 or n2 == 0.0:
        return 1.0
    return float(np.clip(float(g @ g_p) / (n1 * n2), -1.0, 1.0))


def predicted_gap_decrease(alpha: float, eta: float, gperp_norm: float) -> float:
    """First-order gap reduction of the ascent step: alpha * eta * ||g_perp||^2."""
    if alpha < 0 or eta < 0 or gperp_norm < 0:
        raise ValueError("alpha, eta and gperp_norm must be nonnegative")
    return alpha * eta * gperp_norm**2
