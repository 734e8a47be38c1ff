"""Exception types shared across the toolkit."""


class ConfigurationError(ValueError):
    """Invalid configuration: dimension mismatch, bad bounds, unknown keys."""


class NumericError(ArithmeticError):
    """A non-finite value appeared mid-computation.

    Carries enough context (step, quantity name) to locate the divergence.
    """

    def __init__(self, message: str, step: int | None = None, quantity: str | None = None):
        super().__init__(message)
        self.step = step
        self.quantity = quantity


class StationarityError(ValueError):
    """A near-stationary point was required but the gradient is too large."""

    def __init__(self, grad_norm: float, tolerance: float):
        super().__init__(
            f"point is not stationary: ||grad|| = {grad_norm:.3e} exceeds tolerance {tolerance:.3e}"
        )
        self.grad_norm = grad_norm
        self.tolerance = tolerance
