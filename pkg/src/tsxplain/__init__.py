"""Model-agnostic explanations for time-series classifiers."""
from .core import (
    Attribution,
    CounterfactualResult,
    LabeledDataset,
    TsxError,
    load_dataset,
    make_synthetic,
    save_dataset,
    train_test_split,
    validate_series,
    znormalize,
)
from .models import LinearSoftmaxModel, ModelHandle, knn_fit, linear_fit, stdio_model
from .nuncf import NativeGuide
from .comte import CoMTE
from .leftist import Leftist
from .tsr import TSR

__version__ = "0.1.0"

__all__ = [
    "Attribution", "CounterfactualResult", "LabeledDataset", "TsxError",
    "load_dataset", "make_synthetic", "save_dataset", "train_test_split", "validate_series", "znormalize",
    "LinearSoftmaxModel", "ModelHandle", "knn_fit", "linear_fit", "stdio_model",
    "NativeGuide", "CoMTE", "Leftist", "TSR",
]
