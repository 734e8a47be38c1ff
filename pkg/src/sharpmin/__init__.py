"""Sharpness-aware minimization toolkit.

GSAM-family optimizers with full sharpness instrumentation (surrogate gap,
dominant Hessian eigenvalue, gradient-angle tracking) plus a config-driven
experiment harness for analytic landscapes and small MLP classifiers.
"""

from .datasets import Dataset, export_csv, generate_blobs, import_csv
from .errors import ConfigurationError, NumericError, StationarityError
from .mlp import MlpClassifier
from .objectives import (
    FULL_BATCH,
    Batch,
    Landscape2D,
    Objective,
    Quadratic,
    Well,
    two_scale_ridge,
)
from .optimizer import (
    BaseOptimizerState,
    GsamConfig,
    LrSchedule,
    RhoSchedule,
    Variant,
    apply_base,
    decompose,
    gsam_gradient,
    observe,
    rho_at,
    step,
    variant_gradient,
)
from .perturbation import (
    GapEstimate,
    PerturbationConfig,
    adversarial_point,
    eigvec_ball_gap,
    gap_at_minimum,
    perturbed_loss,
    sigma_from_gap,
    surrogate_gap,
)
from .sharpness import (
    PowerIterationResult,
    SharpnessReport,
    StepTrace,
    cos_angle,
    dataset_surrogate_gap,
    power_iteration,
    predicted_gap_decrease,
    sharpness_report,
)

__version__ = "0.1.0"
