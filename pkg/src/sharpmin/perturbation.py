"""Adversarial perturbation, perturbed loss and the surrogate gap.

Two gap estimators exist on purpose. The ascent-direction estimator is the
training-time signal (one normalized gradient-ascent step, cheap, degenerate
at stationary points). The eigenvector-ball estimator probes the ball max
along the dominant Hessian eigenvector and is the honest sharpness measure at
(near-)stationary points, where 2h/rho^2 recovers the dominant eigenvalue.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, StationarityError
from .objectives import FULL_BATCH, Array, Batch, Objective, check_vector

ASCENT_DIRECTION = "ascent_direction"
EIGVEC_BALL = "eigvec_ball"


@dataclass(frozen=True)
class PerturbationConfig:
    rho: float
    epsilon: float = 1e-12

    def __post_init__(self):
        if self.rho < 0:
            raise ConfigurationError(f"rho must be nonnegative, got {self.rho}")
        if self.epsilon <= 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class GapEstimate:
    h: float
    f_at_w: float
    f_at_adv: float
    rho_used: float
    mode: str


def adversarial_point(w: Array, g: Array, cfg: PerturbationConfig) -> Array:
    """w + rho * g / (||g|| + epsilon); equals w exactly when g = 0."""
    w = np.asarray(w, dtype=np.float64)
    g = check_vector(g, w.shape[0], "g")
    return w + cfg.rho * g / (float(np.linalg.norm(g)) + cfg.epsilon)


def perturbed_loss(spec: Objective, w: Array, cfg: PerturbationConfig,
                   batch: Batch = FULL_BATCH) -> float:
    """One-ascent-step approximation of the max loss within the rho-ball."""
    g = spec.gradient(w, batch)
    return spec.value(adversarial_point(w, g, cfg), batch)


def surrogate_gap(spec: Objective, w: Array, cfg: PerturbationConfig,
                  batch: Batch = FULL_BATCH) -> GapEstimate:
    """h = f(w_adv) - f(w), both on the same batch (ascent-direction mode)."""
    f_w = spec.value(w, batch)
    f_adv = perturbed_loss(spec, w, cfg, batch)
    return GapEstimate(h=f_adv - f_w, f_at_w=f_w, f_at_adv=f_adv,
                       rho_used=cfg.rho, mode=ASCENT_DIRECTION)


def eigvec_ball_gap(spec: Objective, w: Array, v_hat: Array, rho: float,
                    batch: Batch = FULL_BATCH) -> GapEstimate:
    """Ball-max gap probed along +/- a unit eigenvector direction.

    Both signs are tried (the eigenvector sign is arbitrary) and the larger
    loss increase kept.
    """
    f_w = spec.value(w, batch)
    f_plus = spec.value(w + rho * v_hat, batch)
    f_minus = spec.value(w - rho * v_hat, batch)
    f_adv = max(f_plus, f_minus)
    return GapEstimate(h=f_adv - f_w, f_at_w=f_w, f_at_adv=f_adv,
                       rho_used=rho, mode=EIGVEC_BALL)


def gap_at_minimum(
    spec: Objective,
    w: Array,
    cfg: PerturbationConfig,
    power_iters: int = 500,
    batch: Batch = FULL_BATCH,
    grad_tol: float = 1e-6,
    power_tol: float = 1e-8,
    seed: int = 0,
) -> GapEstimate:
    """Ball-max gap along the dominant Hessian eigenvector at a stationary w.

    Raises StationarityError when ||grad|| > grad_tol; pass grad_tol=inf for
    instrumentation probes at non-stationary points.
    """
    if power_iters < 1:
        raise ConfigurationError(f"power_iters must be >= 1, got {power_iters}")
    w = check_vector(w, spec.dim)
    grad_norm = float(np.linalg.norm(spec.gradient(w, batch)))
    if grad_norm > grad_tol:
        raise StationarityError(grad_norm, grad_tol)
    # Imported here: sharpness imports this module for its gap machinery.
    from .sharpness import power_iteration

    result = power_iteration(spec, w, batch=batch, max_iters=power_iters,
                             tol=power_tol, seed=seed)
    return eigvec_ball_gap(spec, w, result.eigenvector, cfg.rho, batch)


def sigma_from_gap(h: float, rho: float) -> float:
    """Dominant-eigenvalue proxy 2h/rho^2 (exact on quadratics at the minimum)."""
    if rho == 0.0:
        raise ValueError("sigma_from_gap requires rho > 0")
    return 2.0 * h / rho**2
