"""Test-set evaluation, per-horizon breakdowns, and raw-scale forecasting."""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .datasets import Scaler, window_count, windows
from .errors import DataError
from .model import XPatchModel

PredictFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class EvalReport:
    dataset: str
    lookback: int
    horizon: int
    mse: float
    mae: float
    per_horizon_mse: np.ndarray
    per_horizon_mae: np.ndarray
    n_windows: int
    seed: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("dataset,L,T,seed,mse,mae,n_windows\n")
        buf.write(
            f"{self.dataset},{self.lookback},{self.horizon},{self.seed},"
            f"{self.mse!r},{self.mae!r},{self.n_windows}\n"
        )
        return buf.getvalue()


def evaluate(
    model: XPatchModel | None,
    view: np.ndarray,
    lookback: int,
    horizon: int,
    batch_size: int = 64,
    dataset: str = "",
    seed: int = 0,
    predict_fn: PredictFn | None = None,
) -> EvalReport:
    """Average MSE/MAE over every window and channel, in normalized space.

    Windows stream chronologically and the trailing partial batch is kept,
    so the report is deterministic and covers the whole split. A custom
    ``predict_fn`` replaces the frozen model (stub predictors in tests).
    """
    if predict_fn is None:
        if model is None:
            raise DataError("evaluate needs a model or a predict_fn")
        predict_fn = model.predict
    total_rows = 0
    sq_sum = np.zeros(horizon)
    abs_sum = np.zeros(horizon)
    n_batches = 0
    for batch in windows(view, lookback, horizon, batch_size):
        pred = predict_fn(batch.inputs)
        diff = pred - batch.targets
        sq_sum += (diff * diff).sum(axis=0)
        abs_sum += np.abs(diff).sum(axis=0)
        total_rows += diff.shape[0]
        n_batches += 1
    if n_batches == 0:
        raise DataError("evaluation stream is empty")
    per_mse = sq_sum / total_rows
    per_mae = abs_sum / total_rows
    n_win = window_count(len(view), lookback, horizon)
    return EvalReport(
        dataset=dataset,
        lookback=lookback,
        horizon=horizon,
        mse=float(sq_sum.sum() / (total_rows * horizon)),
        mae=float(abs_sum.sum() / (total_rows * horizon)),
        per_horizon_mse=per_mse,
        per_horizon_mae=per_mae,
        n_windows=n_win,
        seed=seed,
    )


def predict_window(
    model: XPatchModel, scaler: Scaler, raw_lookback: np.ndarray
) -> np.ndarray:
    """One raw-scale forecast: scale, run the frozen model, unscale.

    ``raw_lookback`` is (L, M) in source units; the result is (T, M).
    """
    normalized = scaler.transform(raw_lookback)
    rows = normalized.T  # one window -> (M, L), matching channel flattening
    pred_rows = model.predict(rows)
    return scaler.inverse_transform(pred_rows.T)


def forecast(
    model: XPatchModel,
    scaler: Scaler,
    raw_values: np.ndarray,
    lookback: int,
    horizon: int,
) -> np.ndarray:
    """Forecast ``horizon`` raw-scale rows from the final lookback window."""
    if len(raw_values) < lookback:
        raise DataError(
            f"forecast needs at least {lookback} input rows, got {len(raw_values)}"
        )
    tail = raw_values[-lookback:]
    out = predict_window(model, scaler, tail)
    if out.shape[0] != horizon:
        raise DataError(
            f"model produced {out.shape[0]} rows, expected horizon {horizon}"
        )
    return out
