from .data import Dataset, Schedule, generate_synthetic_dataset, partition_dataset
from .engine import (
    GradientVector,
    Minibatch,
    ModelParams,
    accuracy,
    apply_update,
    compute_gradient,
    compute_loss,
    finite_diff_gradient,
    init_model,
    predict,
)

__all__ = [
    "Dataset",
    "GradientVector",
    "Minibatch",
    "ModelParams",
    "Schedule",
    "accuracy",
    "apply_update",
    "compute_gradient",
    "compute_loss",
    "finite_diff_gradient",
    "generate_synthetic_dataset",
    "init_model",
    "partition_dataset",
    "predict",
]
