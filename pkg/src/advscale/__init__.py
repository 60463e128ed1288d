"""Scaling-law toolkit for adversarial training on synthetic data.

Fits robust-loss scaling forms, derives compute-optimal allocations and
overhead trade-offs, and adjudicates label-study records into a
validity-revised benchmark.
"""

from .allocator import (
    Allocation,
    LossAccuracyMap,
    OverheadPoint,
    fit_loss_accuracy,
    frontier,
    optimal_allocation_v2,
    optimal_allocation_v3,
    overhead_curve,
    published_loss_accuracy,
)
from .envelope import EnvelopePoint, compute_envelope, fit_power_laws, monotone_filter
from .errors import (
    CoverageError,
    DataError,
    FitError,
    InfeasibleError,
    InvariantError,
    ParseError,
    ToolkitError,
    UsageError,
)
from .parametric import (
    Approach2Params,
    Approach3Params,
    FitConfig,
    FitResult,
    apply_fit_filter,
    fit_approach2,
    fit_approach3,
    huber_logspace_objective,
    load_params,
    loss_v2,
    loss_v3,
    published_params,
)
from .run_data import (
    CostModel,
    DatasetSpec,
    ModelSpec,
    Observation,
    RunRecord,
    adversarial_iteration_cost,
    adversarial_multiplier,
    load_dataset_catalog,
    load_model_catalog,
    load_runs,
    training_flops,
)
from .synthgen import SynthDesign, generate_runs
from .validity import (
    ImageMeta,
    LabelRecord,
    ValidityReport,
    classify_validity,
    partition_invalid,
    revised_benchmark,
    user_accuracy,
)

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "Approach2Params",
    "Approach3Params",
    "CostModel",
    "CoverageError",
    "DataError",
    "DatasetSpec",
    "EnvelopePoint",
    "FitConfig",
    "FitError",
    "FitResult",
    "ImageMeta",
    "InfeasibleError",
    "InvariantError",
    "LabelRecord",
    "LossAccuracyMap",
    "ModelSpec",
    "Observation",
    "OverheadPoint",
    "ParseError",
    "RunRecord",
    "SynthDesign",
    "ToolkitError",
    "UsageError",
    "ValidityReport",
    "adversarial_iteration_cost",
    "adversarial_multiplier",
    "apply_fit_filter",
    "classify_validity",
    "compute_envelope",
    "fit_approach2",
    "fit_approach3",
    "fit_loss_accuracy",
    "fit_power_laws",
    "frontier",
    "generate_runs",
    "huber_logspace_objective",
    "load_dataset_catalog",
    "load_model_catalog",
    "load_params",
    "load_runs",
    "loss_v2",
    "loss_v3",
    "monotone_filter",
    "optimal_allocation_v2",
    "optimal_allocation_v3",
    "overhead_curve",
    "partition_invalid",
    "published_loss_accuracy",
    "published_params",
    "revised_benchmark",
    "training_flops",
    "user_accuracy",
]
