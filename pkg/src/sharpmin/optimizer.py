"""GSAM-family update rules: gradient decomposition, surrogate gradient,
learning-rate and perturbation-radius schedules, and the base optimizers the
surrogate gradient is fed to.

One call to :func:`step` performs a full update: radius from the schedule,
ascent to the adversarial point, gradient there on the same batch,
decomposition, variant gradient, base-optimizer apply, and a StepTrace with
every measured quantity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigurationError, NumericError
from .objectives import FULL_BATCH, Array, Batch, Objective
from .perturbation import PerturbationConfig, adversarial_point
from .sharpness import StepTrace, cos_angle


class Variant(Enum):
    GSAM = "gsam"
    SAM = "sam"
    MIN_F_H = "min_f_h"
    WEIGHTED_SUM = "weighted_sum"
    VANILLA = "vanilla"


@dataclass(frozen=True)
class GsamConfig:
    alpha: float = 0.0
    rho_max: float = 0.0
    rho_min: float = 0.0
    variant: Variant = Variant.GSAM
    lam: float = 0.0  # weighted-sum coefficient
    decomp_guard: float = 1e-12

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigurationError(f"alpha must be nonnegative, got {self.alpha}")
        if self.rho_min < 0 or self.rho_min > self.rho_max:
            raise ConfigurationError(
                f"need 0 <= rho_min <= rho_max, got [{self.rho_min}, {self.rho_max}]"
            )
        if self.lam < 0:
            raise ConfigurationError(f"lambda must be nonnegative, got {self.lam}")
        if self.decomp_guard <= 0:
            raise ConfigurationError(f"decomp_guard must be positive, got {self.decomp_guard}")


LR_SHAPES = ("linear_decay", "inverse_sqrt", "constant")


@dataclass(frozen=True)
class LrSchedule:
    lr_max: float
    lr_min: float = 0.0
    warmup_steps: int = 0
    total_steps: int = 1
    shape: str = "constant"

    def __post_init__(self):
        if self.lr_max <= 0:
            raise ConfigurationError(f"lr_max must be positive, got {self.lr_max}")
        if self.lr_min < 0 or self.lr_min > self.lr_max:
            raise ConfigurationError(
                f"need 0 <= lr_min <= lr_max, got [{self.lr_min}, {self.lr_max}]"
            )
        if self.warmup_steps < 0 or self.total_steps < 1:
            raise ConfigurationError("warmup_steps must be >= 0 and total_steps >= 1")
        if self.warmup_steps >= self.total_steps:
            raise ConfigurationError("warmup_steps must be smaller than total_steps")
        if self.shape not in LR_SHAPES:
            raise ConfigurationError(f"lr shape must be one of {LR_SHAPES}, got {self.shape!r}")

    def lr_at(self, t: int) -> float:
        """Learning rate at step t (1-based). Warmup ramps linearly from 0 to
        lr_max; the declared shape then runs from lr_max down to lr_min."""
        if t < 1:
            raise ValueError(f"step index starts at 1, got {t}")
        if t <= self.warmup_steps:
            return self.lr_max * t / self.warmup_steps
        if self.shape == "constant":
            return self.lr_max
        t_eff = t - self.warmup_steps
        if self.shape == "inverse_sqrt":
            return min(self.lr_max, max(self.lr_min, self.lr_max / np.sqrt(t_eff)))
        progress = min(t_eff / (self.total_steps - self.warmup_steps), 1.0)
        lr = self.lr_min + (self.lr_max - self.lr_min) * (1.0 - progress)
        return min(self.lr_max, max(self.lr_min, lr))


RHO_SHAPES = ("linear_with_lr", "constant", "inverse_sqrt")


@dataclass(frozen=True)
class RhoSchedule:
    shape: str = "linear_with_lr"
    rho_min: float = 0.0
    rho_max: float = 0.0
    rho_0: float = 0.0  # inverse_sqrt only

    def __post_init__(self):
        if self.shape not in RHO_SHAPES:
            raise ConfigurationError(f"rho shape must be one of {RHO_SHAPES}, got {self.shape!r}")
        if self.rho_min < 0 or self.rho_min > self.rho_max:
            raise ConfigurationError(
                f"need 0 <= rho_min <= rho_max, got [{self.rho_min}, {self.rho_max}]"
            )
        if self.rho_0 < 0:
            raise ConfigurationError(f"rho_0 must be nonnegative, got {self.rho_0}")

    @staticmethod
    def from_gsam(cfg: GsamConfig, shape: str = "linear_with_lr", rho_0: float = 0.0) -> "RhoSchedule":
        return RhoSchedule(shape=shape, rho_min=cfg.rho_min, rho_max=cfg.rho_max, rho_0=rho_0)


def rho_at(schedule: RhoSchedule, lr_now: float, lr_sched: LrSchedule, t: int) -> float:
    """Perturbation radius at step t.

    linear_with_lr maps the (clamped) learning rate affinely onto
    [rho_min, rho_max]; a degenerate lr range yields rho_max. inverse_sqrt is
    the rho_0/sqrt(t) regime; constant always returns rho_max.
    """
    if schedule.shape == "constant":
        return schedule.rho_max
    if schedule.shape == "inverse_sqrt":
        if t < 1:
            raise ValueError(f"step index starts at 1, got {t}")
        return schedule.rho_0 / float(np.sqrt(t))
    lr_span = lr_sched.lr_max - lr_sched.lr_min
    if lr_span == 0.0:
        return schedule.rho_max
    lr_c = min(max(lr_now, lr_sched.lr_min), lr_sched.lr_max)
    rho = schedule.rho_min + (schedule.rho_max - schedule.rho_min) * (lr_c - lr_sched.lr_min) / lr_span
    return min(schedule.rho_max, max(schedule.rho_min, rho))


SGD_MOMENTUM = "sgd_momentum"
ADAMW_STYLE = "adamw_style"


@dataclass
class BaseOptimizerState:
    """Mutable state for the underlying first-order update rule.

    Exclusively owned by one run; apply increments step_count by exactly 1.
    Weight decay is decoupled: applied directly to w by the update, never
    folded into the (perturbed, decomposed) gradient.
    """

    kind: str
    dim: int
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step_count: int = 0
    buf: Array = field(default=None, repr=False)
    m: Array = field(default=None, repr=False)
    v: Array = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in (SGD_MOMENTUM, ADAMW_STYLE):
            raise ConfigurationError(f"unknown base optimizer kind {self.kind!r}")
        if self.dim < 1:
            raise ConfigurationError(f"dim must be positive, got {self.dim}")
        if self.weight_decay < 0:
            raise ConfigurationError(f"weight_decay must be nonnegative, got {self.weight_decay}")
        if self.buf is None:
            self.buf = np.zeros(self.dim)
        if self.m is None:
            self.m = np.zeros(self.dim)
        if self.v is None:
            self.v = np.zeros(self.dim)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dim": self.dim,
            "momentum": self.momentum,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "weight_decay": self.weight_decay,
            "step_count": self.step_count,
            "buf": self.buf.tolist(),
            "m": self.m.tolist(),
            "v": self.v.tolist(),
        }

    @staticmethod
    def from_dict(data: dict) -> "BaseOptimizerState":
        return BaseOptimizerState(
            kind=data["kind"],
            dim=data["dim"],
            momentum=data["momentum"],
            beta1=data["beta1"],
            beta2=data["beta2"],
            eps=data["eps"],
            weight_decay=data["weight_decay"],
            step_count=data["step_count"],
            buf=np.array(data["buf"], dtype=np.float64),
            m=np.array(data["m"], dtype=np.float64),
            v=np.array(data["v"], dtype=np.float64),
        )


def decompose(g: Array, g_p: Array, guard: float = 1e-12) -> tuple[Array, Array]:
    """Split g into components parallel and orthogonal to g_p.

    The guard added to <g_p, g_p> makes the degenerate g_p = 0 case return
    (0, g): the decomposition degrades to pure gap descent there.
    """
    g = np.asarray(g, dtype=np.float64)
    g_p = np.asarray(g_p, dtype=np.float64)
    if g.shape != g_p.shape:
        raise ConfigurationError(f"shape mismatch: {g.shape} vs {g_p.shape}")
    coeff = float(g @ g_p) / (float(g_p @ g_p) + guard)
    g_parallel = coeff * g_p
    g_perp = g - g_parallel
    return g_parallel, g_perp


def gsam_gradient(g: Array, g_p: Array, alpha: float, guard: float = 1e-12) -> Array:
    """Surrogate gradient g_p - alpha * g_perp fed to the base optimizer."""
    _, g_perp = decompose(g, g_p, guard)
    return g_p - alpha * g_perp


def variant_gradient(variant: Variant, g: Array, g_p: Array, alpha: float,
                     lam: float, guard: float = 1e-12) -> Array:
    """Update vector per optimizer variant (all are descent directions)."""
    if variant == Variant.GSAM:
        return gsam_gradient(g, g_p, alpha, guard)
    if variant == Variant.SAM:
        return g_p
    if variant == Variant.WEIGHTED_SUM:
        return (1.0 + lam) * g_p - lam * g
    if variant == Variant.MIN_F_H:
        # Descent on f plus a descent step along the component of g_p
        # orthogonal to g: decreases f_p while keeping f intact to first order.
        _, gp_perp = decompose(g_p, g, guard)
        return g + alpha * gp_perp
    if variant == Variant.VANILLA:
        return g
    raise ConfigurationError(f"unknown variant {variant!r}")


def apply_base(state: BaseOptimizerState, w: Array, grad: Array, lr: float) -> Array:
    """One base-optimizer update; mutates the state buffers in place."""
    w = np.asarray(w, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if w.shape != (state.dim,) or grad.shape != (state.dim,):
        raise ConfigurationError(
            f"dimension mismatch: w {w.shape}, grad {grad.shape}, state dim {state.dim}"
        )
    if state.kind == SGD_MOMENTUM:
        state.buf = state.momentum * state.buf + grad
        w_next = w - lr * state.buf - lr * state.weight_decay * w
        state.step_count += 1
        return w_next
    t = state.step_count + 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1**t)
    v_hat = state.v / (1.0 - state.beta2**t)
    w_next = w - lr * m_hat / (np.sqrt(v_hat) + state.eps) - lr * state.weight_decay * w
    state.step_count = t
    return w_next


def observe(
    spec: Objective,
    w: Array,
    cfg: GsamConfig,
    lr_sched: LrSchedule,
    rho_sched: RhoSchedule,
    t: int,
    batch: Batch = FULL_BATCH,
    epsilon: float = 1e-12,
) -> tuple[StepTrace, Array, Array]:
    """Instrument the state a step starting at w would see, without updating.

    Returns the trace plus (g, g_p) so :func:`step` can reuse the evaluations.
    Non-finite quantities raise NumericError tagged with the step index.
    """
    if t < 1:
        raise ValueError(f"step index starts at 1, got {t}")
    lr = lr_sched.lr_at(t)
    rho = rho_at(rho_sched, lr, lr_sched, t)
    pcfg = PerturbationConfig(rho=rho, epsilon=epsilon)
    try:
        f, g = spec.value_and_gradient(w, batch)
        w_adv = adversarial_point(w, g, pcfg)
        f_p, g_p = spec.value_and_gradient(w_adv, batch)
    except NumericError as err:
        raise NumericError(f"step {t}: {err}", step=t, quantity=err.quantity) from err

    _, g_perp = decompose(g, g_p, cfg.decomp_guard)
    gperp_norm = float(np.linalg.norm(g_perp))
    # Only GSAM performs the ascent step the prediction describes; recording 0
    # for the others keeps SAM traces bit-identical to GSAM(alpha=0).
    alpha_eff = cfg.alpha if cfg.variant == Variant.GSAM else 0.0
    trace = StepTrace(
        t=t,
        f=f,
        f_p=f_p,
        h=f_p - f,
        cos_theta=cos_angle(g, g_p),
        grad_norm=float(np.linalg.norm(g)),
        gp_norm=float(np.linalg.norm(g_p)),
        gperp_norm=gperp_norm,
        lr=lr,
        rho=rho,
        predicted_gap_decrease=alpha_eff * lr * gperp_norm**2,
    )
    return trace, g, g_p


def step(
    spec: Objective,
    w: Array,
    state: BaseOptimizerState,
    cfg: GsamConfig,
    lr_sched: LrSchedule,
    rho_sched: RhoSchedule,
    t: int,
    batch: Batch = FULL_BATCH,
    epsilon: float = 1e-12,
) -> tuple[Array, StepTrace]:
    """One full optimizer step (schedule, ascent, decomposition, update).

    Both gradient evaluations use the same batch; the decomposition reuses the
    gradient that produced the perturbation.
    """
    trace, g, g_p = observe(spec, w, cfg, lr_sched, rho_sched, t, batch, epsilon)
    update = variant_gradient(cfg.variant, g, g_p, cfg.alpha, cfg.lam, cfg.decomp_guard)
    w_next = apply_base(state, w, update, trace.lr)
    return w_next, trace
