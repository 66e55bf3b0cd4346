"""Cough / breath / voice CNN classifier."""

from .features import preprocess, to_model_input
from .inference import WindowError, classify_recording, sliding_window_predict, window_count
from .io import ModelFileError, load_model, save_model
from .metrics import ConfusionMatrix, EvalMetrics, c_statistic, evaluate, metrics
from .model import (
    CLASSES,
    CnnModel,
    ModelConfig,
    ModelConfigError,
    build_model,
    closed_form_parameter_count,
    forward,
)
from .training import TrainConfig, TrainResult, gradient_check, train

__all__ = [
    "CLASSES",
    "CnnModel",
    "ConfusionMatrix",
    "EvalMetrics",
    "ModelConfig",
    "ModelConfigError",
    "ModelFileError",
    "TrainConfig",
    "TrainResult",
    "WindowError",
    "build_model",
    "c_statistic",
    "classify_recording",
    "closed_form_parameter_count",
    "evaluate",
    "forward",
    "gradient_check",
    "load_model",
    "metrics",
    "preprocess",
    "save_model",
    "sliding_window_predict",
    "to_model_input",
    "train",
    "window_count",
]
