"""Dual-stream patch forecasting toolkit with EMA seasonal-trend decomposition."""

from .adf import AdfResult, adf_test, chunked_adf
from .autograd import Tensor, backward, no_grad
from .datasets import RawDataset, Scaler, SplitSpec, load_csv, windows
from .decompose import (
    DecomposedPair,
    EmaDecomposer,
    SmaDecomposer,
    ema_closed_form,
    ema_recursive,
    sma,
)
from .errors import (
    ConfigError,
    DataError,
    DimensionError,
    NumericalError,
    ParameterError,
    XPatchError,
)
from .estimator import XPatchForecaster
from .evaluation import EvalReport, evaluate, forecast
from .losses import LossSpec, loss_mae, loss_mse, loss_scalable, rho_arctan, rho_card
from .model import ModelConfig, PatchConfig, XPatchModel, load_checkpoint, save_checkpoint
from .schedules import (
    SchedulerSpec,
    lr_cosine_warmup,
    lr_patch_tst,
    lr_sigmoid,
    lr_standard,
)
from .training import Adam, TrainConfig, fit

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "AdfResult",
    "ConfigError",
    "DataError",
    "DecomposedPair",
    "DimensionError",
    "EmaDecomposer",
    "EvalReport",
    "LossSpec",
    "ModelConfig",
    "NumericalError",
    "ParameterError",
    "PatchConfig",
    "RawDataset",
    "Scaler",
    "SchedulerSpec",
    "SmaDecomposer",
    "SplitSpec",
    "Tensor",
    "TrainConfig",
    "XPatchError",
    "XPatchForecaster",
    "XPatchModel",
    "adf_test",
    "backward",
    "chunked_adf",
    "ema_closed_form",
    "ema_recursive",
    "evaluate",
    "fit",
    "forecast",
    "load_checkpoint",
    "load_csv",
    "loss_mae",
    "loss_mse",
    "loss_scalable",
    "lr_cosine_warmup",
    "lr_patch_tst",
    "lr_sigmoid",
    "lr_standard",
    "no_grad",
    "rho_arctan",
    "rho_card",
    "save_checkpoint",
    "sma",
    "windows",
]
