"""Scikit-learn estimator wrapper around the forecaster.

``fit`` takes a raw (time, channels) matrix, carves a chronological
train/validation split, standardizes on training rows, and trains the
network. ``predict`` maps a raw lookback window to the raw-scale
forecast.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .datasets import Scaler
from .errors import DataError
from .evaluation import forecast
from .losses import LossSpec
from .model import XPatchModel
from .schedules import SchedulerSpec
from .training import TrainConfig, fit
from .validation import as_matrix


class XPatchForecaster(BaseEstimator):
    """Channel-independent dual-stream forecaster with a fit/predict API."""

    def __init__(
        self,
        lookback: int = 96,
        horizon: int = 96,
        alpha: float = 0.3,
        patch_len: int = 16,
        stride: int = 8,
        loss: str = "arctan",
        loss_m: float = 1.0,
        scheduler: str = "sigmoid",
        lr: float = 1e-4,
        epochs: int = 100,
        batch_size: int = 32,
        patience: int = 10,
        flow: str = "dual",
        val_fraction: float = 0.2,
        seed: int = 0,
    ):
        self.lookback = lookback
        self.horizon = horizon
        self.alpha = alpha
        self.patch_len = patch_len
        self.stride = stride
        self.loss = loss
        self.loss_m = loss_m
        self.scheduler = scheduler
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.patience = patience
        self.flow = flow
        self.val_fraction = val_fraction
        self.seed = seed

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            lookback=self.lookback,
            horizon=self.horizon,
            alpha=self.alpha,
            patch_len=self.patch_len,
            stride=self.stride,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
            patience=self.patience,
            flow=self.flow,
            loss=LossSpec(kind=self.loss, m=self.loss_m),
            scheduler=SchedulerSpec(kind=self.scheduler, alpha0=self.lr),
        )

    def fit(self, X, y=None):
        X = as_matrix(X)
        cfg = self._train_config()
        min_rows = self.lookback + self.horizon
        val_rows = max(int(len(X) * self.val_fraction), min_rows)
        train_rows = len(X) - val_rows
        if train_rows < min_rows:
            raise DataError(
                f"{len(X)} rows cannot hold a train/validation split with "
                f"lookback {self.lookback} and horizon {self.horizon}"
            )
        train_view = X[:train_rows]
        val_view = X[train_rows - self.lookback :]

        self.scaler_ = Scaler().fit(train_view)
        train_scaled = self.scaler_.transform(train_view)
        val_scaled = self.scaler_.transform(val_view)

        self.model_ = XPatchModel(cfg.model_config(X.shape[1]), seed=self.seed)
        self.result_ = fit(self.model_, train_scaled, val_scaled, cfg)
        self.history_ = self.result_.history
        self.n_channels_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise NotFittedError("fit must be called before predict")
        X = as_matrix(X)
        if X.shape[1] != self.n_channels_:
            raise DataError(
                f"predict input has {X.shape[1]} channels, model was fit on "
                f"{self.n_channels_}"
            )
        return forecast(self.model_, self.scaler_, X, self.lookback, self.horizon)
