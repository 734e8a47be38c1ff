"""Differentiable objectives with deterministic value/gradient/HVP evaluation.

Parameters are flat float64 vectors (the ``Array`` alias). Objectives expose
``value``, ``gradient``, ``value_and_gradient`` and ``hessian_vector_product``
over an optional minibatch; analytic objectives ignore the batch, so one code
path serves both stochastic and deterministic runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericError

Array = np.ndarray


@dataclass(frozen=True)
class Batch:
    """Sample indices into a dataset; an empty tuple means "full batch"."""

    indices: tuple[int, ...] = ()

    @property
    def is_full(self) -> bool:
        return len(self.indices) == 0


FULL_BATCH = Batch()


def check_vector(w: Array, dim: int, name: str = "w") -> Array:
    """Validate a parameter-like vector: float64, right length, all finite."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (dim,):
        raise ConfigurationError(f"{name} has shape {w.shape}, expected ({dim},)")
    if not np.all(np.isfinite(w)):
        raise NumericError(f"{name} contains non-finite entries", quantity=name)
    return w


class Objective:
    """Base class: deterministic scalar objective over a flat parameter vector."""

    dim: int

    def value(self, w: Array, batch: Batch = FULL_BATCH) -> float:
        raise NotImplementedError

    def gradient(self, w: Array, batch: Batch = FULL_BATCH) -> Array:
        raise NotImplementedError

    def value_and_gradient(self, w: Array, batch: Batch = FULL_BATCH) -> tuple[float, Array]:
        return self.value(w, batch), self.gradient(w, batch)

    def hessian_vector_product(
        self,
        w: Array,
        v: Array,
        batch: Batch = FULL_BATCH,
        fd_step: float | None = None,
    ) -> Array:
        """H(w) @ v by central finite differences of the gradient.

        The probe direction is normalized and the result rescaled by ||v||, so
        the step size is independent of the magnitude of v.
        """
        w = check_vector(w, self.dim)
        v = check_vector(v, self.dim, "v")
        v_norm = float(np.linalg.norm(v))
        if v_norm == 0.0:
            raise ValueError("hessian_vector_product requires a nonzero direction v")
        if fd_step is None:
            fd_step = 1e-5 * max(1.0, float(np.linalg.norm(w)))
        if fd_step <= 0.0:
            raise ValueError(f"fd_step must be positive, got {fd_step}")
        v_hat = v / v_norm
        g_plus = self.gradient(w + fd_step * v_hat, batch)
        g_minus = self.gradient(w - fd_step * v_hat, batch)
        return (g_plus - g_minus) / (2.0 * fd_step) * v_norm

    def _finite(self, x: float, quantity: str) -> float:
        if not np.isfinite(x):
            raise NumericError(f"{quantity} is non-finite ({x})", quantity=quantity)
        return float(x)


class Quadratic(Objective):
    """f(w) = 1/2 wᵀHw for a symmetric H (full matrix or diagonal vector)."""

    def __init__(self, hessian: Array):
        hessian = np.asarray(hessian, dtype=np.float64)
        if hessian.ndim == 1:
            if hessian.size == 0:
                raise ConfigurationError("quadratic needs at least one dimension")
            self.diag = hessian.copy()
            self.matrix = None
            self.dim = hessian.size
        elif hessian.ndim == 2:
            n, m = hessian.shape
            if n != m or n == 0:
                raise ConfigurationError(f"hessian must be square, got {hessian.shape}")
            scale = max(1.0, float(np.abs(hessian).max()))
            if float(np.abs(hessian - hessian.T).max()) > 1e-8 * scale:
                raise ConfigurationError("hessian must be symmetric")
            # Bitwise symmetrization so <Hu, v> == <u, Hv> holds exactly.
            self.matrix = (hessian + hessian.T) / 2.0
            self.diag = None
            self.dim = n
        else:
            raise ConfigurationError("hessian must be a vector (diagonal) or a square matrix")

    def _hw(self, w: Array) -> Array:
        if self.diag is not None:
            return self.diag * w
        return self.matrix @ w

    def value(self, w: Array, batch: Batch = FULL_BATCH) -> float:
        w = check_vector(w, self.dim)
        return self._finite(0.5 * float(w @ self._hw(w)), "value")

    def gradient(self, w: Array, batch: Batch = FULL_BATCH) -> Array:
        w = check_vector(w, self.dim)
        return self._hw(w)

    def hessian_vector_product(
        self,
        w: Array,
        v: Array,
        batch: Batch = FULL_BATCH,
        fd_step: float | None = None,
    ) -> Array:
        # Exact matrix path: keeps eigenvalue oracles exact.
        v = check_vector(v, self.dim, "v")
        if float(np.linalg.norm(v)) == 0.0:
            raise ValueError("hessian_vector_product requires a nonzero direction v")
        return self._hw(v)

    def hessian_matrix(self) -> Array:
        return np.diag(self.diag) if self.diag is not None else self.matrix

    def sigma_max(self) -> float:
        """Dominant (largest-|λ|) eigenvalue, signed. Closed-form oracle."""
        eigs = np.linalg.eigvalsh(self.hessian_matrix())
        return float(eigs[np.argmax(np.abs(eigs))])


@dataclass(frozen=True)
class Well:
    center: tuple[float, float]
    depth: float
    width: float


class Landscape2D(Objective):
    """Tilted 2-D surface with Gaussian wells of mixed sharpness.

    f(w) = tilt * w[0] - sum_i depth_i * exp(-||w - c_i||^2 / (2 width_i^2)).

    The tilt creates a downhill ridge; narrow wells are sharp minima, broad
    wells flat ones. Construction verifies that local descent from the well
    centers lands in at least two minima with distinct dominant curvature.
    """

    dim = 2

    def __init__(self, wells: list[Well], tilt: float = 0.05, validate: bool = True):
        if len(wells) < 2:
            raise ConfigurationError("landscape needs at least 2 wells")
        widths = {w.width for w in wells}
        if len(widths) < 2:
            raise ConfigurationError("landscape needs wells of at least 2 distinct widths")
        for well in wells:
            if well.depth <= 0 or well.width <= 0:
                raise ConfigurationError(f"well depth/width must be positive: {well}")
        self.wells = list(wells)
        self.tilt = float(tilt)
        self._centers = np.array([w.center for w in wells], dtype=np.float64)
        self._depths = np.array([w.depth for w in wells], dtype=np.float64)
        self._widths = np.array([w.width for w in wells], dtype=np.float64)
        if validate:
            self.minima = self._locate_minima()
        else:
            self.minima = []

    def _well_terms(self, w: Array) -> Array:
        diff = w[None, :] - self._centers
        r2 = np.sum(diff * diff, axis=1)
        return np.exp(-r2 / (2.0 * self._widths**2))

    def value(self, w: Array, batch: Batch = FULL_BATCH) -> float:
        w = check_vector(w, 2)
        e = self._well_terms(w)
        return self._finite(self.tilt * w[0] - float(np.sum(self._depths * e)), "value")

    def gradient(self, w: Array, batch: Batch = FULL_BATCH) -> Array:
        w = check_vector(w, 2)
        diff = w[None, :] - self._centers
        e = self._well_terms(w)
        coeff = self._depths * e / self._widths**2
        g = coeff @ diff
        g[0] += self.tilt
        return g

    def hessian_matrix(self, w: Array) -> Array:
        """Exact 2x2 Hessian (the tilt term contributes nothing)."""
        w = check_vector(w, 2)
        diff = w[None, :] - self._centers
        e = self._well_terms(w)
        h = np.zeros((2, 2))
        for d, s, e_i, dx in zip(self._depths, self._widths, e, diff):
            h += d * e_i * (np.eye(2) / s**2 - np.outer(dx, dx) / s**4)
        return h

    def descend(self, start: Array, lr: float = 0.02, max_iters: int = 20000, tol: float = 1e-12) -> Array:
        """Plain gradient descent to the nearest local minimum."""
        w = check_vector(np.array(start, dtype=np.float64), 2)
        for _ in range(max_iters):
            g = self.gradient(w)
            if float(np.linalg.norm(g)) < tol:
                break
            w = w - lr * g
        return w

    def _locate_minima(self) -> list[tuple[Array, float]]:
        found: list[tuple[Array, float]] = []
        for well in self.wells:
            w_min = self.descend(np.array(well.center))
            if float(np.linalg.norm(self.gradient(w_min))) > 1e-6:
                continue  # descent ran off the tilt instead of settling
            eigs = np.linalg.eigvalsh(self.hessian_matrix(w_min))
            if eigs.min() <= 0:
                continue  # saddle or ridge point
            sigma = float(eigs[np.argmax(np.abs(eigs))])
            if any(np.linalg.norm(w_min - m[0]) < 1e-3 for m in found):
                continue
            found.append((w_min, sigma))
        sigmas = sorted(s for _, s in found)
        distinct = len(found) >= 2 and (sigmas[-1] - sigmas[0]) > 1e-3 * abs(sigmas[-1])
        if not distinct:
            summary = [(w.round(3).tolist(), round(s, 4)) for w, s in found]
            raise ConfigurationError(
                "landscape must contain at least two local minima with distinct "
                f"dominant curvature; found {summary}"
            )
        return found


def two_scale_ridge() -> Landscape2D:
    """Default desk-scale surface: sharp wells flanking a tilted ridge that
    leads to a broad flat well. Parameters frozen; trajectory comparisons and
    endpoint-sharpness orderings are tuned against this surface."""
    wells = [
        Well(center=(1.2, 0.45), depth=0.55, width=0.16),
        Well(center=(1.0, -0.5), depth=0.55, width=0.18),
        Well(center=(0.0, 0.35), depth=0.75, width=0.38),
        Well(center=(-1.5, -0.1), depth=1.4, width=1.05),
    ]
    return Landscape2D(wells, tilt=0.05)
