"""Gaze estimation with per-angle bin classification and expectation
decoding, plus the training and evaluation tooling around it."""

from .binning import (
    BinnedTarget,
    BinScheme,
    bin_target,
    decode_expectation,
    gaze360_scheme,
    mpiigaze_scheme,
)
from .datasets import (
    DatasetSpec,
    Sample,
    SyntheticConfig,
    generate_synthetic,
    load_dataset,
    prepare_training_set,
)
from .estimator import GazeEstimator
from .geometry import (
    GazeAngles,
    GazeVector,
    NormalizationParams,
    NormalizedSample,
    angles_to_vector,
    angular_error,
    normalize_sample,
    vector_to_angles,
)
from .losses import (
    LossConfig,
    LossOutput,
    combined_loss,
    combined_loss_grad,
    cross_entropy,
    mean_squared_error,
    stable_softmax,
    total_gaze_loss,
)
from .models import (
    DualHeadGazeModel,
    ModelConfig,
    build_model,
    load_checkpoint,
    predict_gaze,
    save_checkpoint,
)
from .references import lookup_reference, render_report
from .selfcheck import run_selfcheck
from .training import (
    EvalReport,
    TrainConfig,
    evaluate,
    loso_cv,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "BinScheme",
    "BinnedTarget",
    "DatasetSpec",
    "DualHeadGazeModel",
    "EvalReport",
    "GazeAngles",
    "GazeEstimator",
    "GazeVector",
    "LossConfig",
    "LossOutput",
    "ModelConfig",
    "NormalizationParams",
    "NormalizedSample",
    "Sample",
    "SyntheticConfig",
    "TrainConfig",
    "angles_to_vector",
    "angular_error",
    "bin_target",
    "build_model",
    "combined_loss",
    "combined_loss_grad",
    "cross_entropy",
    "decode_expectation",
    "evaluate",
    "gaze360_scheme",
    "generate_synthetic",
    "load_checkpoint",
    "load_dataset",
    "lookup_reference",
    "loso_cv",
    "mean_squared_error",
    "mpiigaze_scheme",
    "normalize_sample",
    "predict_gaze",
    "prepare_training_set",
    "render_report",
    "run_selfcheck",
    "save_checkpoint",
    "stable_softmax",
    "total_gaze_loss",
    "train",
    "vector_to_angles",
]
