"""Adam optimization and the training loop with validation checkpointing."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .autograd import Tensor, backward
from .datasets import window_count, windows
from .errors import ConfigError, NumericalError, ParameterError
from .losses import LossSpec
from .model import FLOWS, ModelConfig, XPatchModel
from .schedules import SchedulerSpec
from .validation import check_alpha, check_positive_int

logger = logging.getLogger(__name__)


class Adam:
    """Bias-corrected Adam over a named parameter dict."""

    def __init__(
        self,
        params: dict[str, Tensor],
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.v = {name: np.zeros_like(t.data) for name, t in params.items()}
        self.t = 0

    def step(self, lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for name, tensor in self.params.items():
            g = tensor.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise NumericalError(f"non-finite gradient in parameter {name!r}")
            m = self.m[name] = b1 * self.m[name] + (1.0 - b1) * g
            v = self.v[name] = b2 * self.v[name] + (1.0 - b2) * (g * g)
            tensor.data = tensor.data - lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    """Every knob of a training run, with the published defaults."""

    lookback: int = 96
    horizon: int = 96
    alpha: float = 0.3
    patch_len: int = 16
    stride: int = 8
    batch_size: int = 32
    epochs: int = 100
    seed: int = 0
    patience: int = 10
    flow: str = "dual"
    loss: LossSpec = field(default_factory=LossSpec)
    scheduler: SchedulerSpec = field(default_factory=SchedulerSpec)

    def __post_init__(self):
        check_positive_int(self.lookback, "lookback")
        check_positive_int(self.horizon, "horizon")
        check_positive_int(self.batch_size, "batch_size")
        check_positive_int(self.epochs, "epochs")
        check_positive_int(self.patience, "patience")
        check_alpha(self.alpha, allow_one=False)
        if self.lookback % 4 != 0:
            raise ConfigError(
                f"lookback must be divisible by 4, got {self.lookback}; "
                f"nearest valid value is {max(4, round(self.lookback / 4) * 4)}"
            )
        if self.flow not in FLOWS:
            raise ConfigError(f"flow must be one of {FLOWS}, got {self.flow!r}")

    def model_config(self, n_channels: int) -> ModelConfig:
        return ModelConfig(
            lookback=self.lookback,
            horizon=self.horizon,
            n_channels=n_channels,
            patch_len=self.patch_len,
            stride=self.stride,
            alpha=self.alpha,
            flow=self.flow,
        )


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    val_mse: float
    val_mae: float


@dataclass
class FitResult:
    history: list[EpochRecord]
    best_epoch: int
    best_val_mse: float
    stopped_early: bool


HISTORY_COLUMNS = ("epoch", "lr", "train_loss", "val_mse", "val_mae")


def history_to_csv(history: list[EpochRecord]) -> str:
    buf = io.StringIO()
    buf.write(",".join(HISTORY_COLUMNS) + "\n")
    for rec in history:
        buf.write(
            f"{rec.epoch},{rec.lr!r},{rec.train_loss!r},{rec.val_mse!r},{rec.val_mae!r}\n"
        )
    return buf.getvalue()


def _validation_metrics(
    model: XPatchModel, view: np.ndarray, lookback: int, horizon: int, batch_size: int
) -> tuple[float, float]:
    sq_total = 0.0
    abs_total = 0.0
    count = 0
    for batch in windows(view, lookback, horizon, batch_size):
        pred = model.predict(batch.inputs)
        diff = pred - batch.targets
        sq_total += float(np.sum(diff * diff))
        abs_total += float(np.sum(np.abs(diff)))
        count += diff.size
    return sq_total / count, abs_total / count


def fit(
    model: XPatchModel,
    train_view: np.ndarray,
    val_view: np.ndarray,
    cfg: TrainConfig,
) -> FitResult:
    """Train with per-epoch scheduling, keeping the best-validation weights.

    Stops after ``cfg.patience`` consecutive epochs without a validation
    MSE improvement. On a non-finite loss the best weights seen so far are
    restored before the abort is raised.
    """
    loss_fn = cfg.loss.build(cfg.horizon)
    optimizer = Adam(model.params.tensors)
    n_train = window_count(len(train_view), cfg.lookback, cfg.horizon)
    if n_train < 1:
        raise ParameterError(
            f"training view supports no windows at lookback {cfg.lookback} "
            f"and horizon {cfg.horizon}"
        )

    history: list[EpochRecord] = []
    best_snapshot = model.params.copy_data()
    best_val = np.inf
    best_epoch = 0
    stale = 0
    stopped_early = False

    for epoch in range(1, cfg.epochs + 1):
        lr = cfg.scheduler.rate(epoch)
        batch_losses = []
        shuffle_seed = cfg.seed * 1_000_003 + epoch
        for step, batch in enumerate(
            windows(
                train_view,
                cfg.lookback,
                cfg.horizon,
                cfg.batch_size,
                shuffle_seed=shuffle_seed,
                drop_last=True,
            )
        ):
            model.params.zero_grads()
            pred = model.forward(batch.inputs, training=True)
            loss = loss_fn(pred, Tensor(batch.targets))
            value = loss.item()
            if not np.isfinite(value):
                model.params.load_data(best_snapshot)
                raise NumericalError(
                    f"non-finite training loss at epoch {epoch}, step {step}; "
                    f"best checkpoint (epoch {best_epoch}) retained"
                )
            backward(loss)
            optimizer.step(lr)
            batch_losses.append(value)

        train_loss = float(np.mean(batch_losses)) if batch_losses else np.nan
        val_mse, val_mae = _validation_metrics(
            model, val_view, cfg.lookback, cfg.horizon, cfg.batch_size
        )
        history.append(EpochRecord(epoch, lr, train_loss, val_mse, val_mae))
        logger.info(
            "epoch %d lr %.3e train %.6f val_mse %.6f val_mae %.6f",
            epoch, lr, train_loss, val_mse, val_mae,
        )

        if val_mse < best_val:
            best_val = val_mse
            best_epoch = epoch
            best_snapshot = model.params.copy_data()
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                stopped_early = True
                break

    model.params.load_data(best_snapshot)
    return FitResult(
        history=history,
        best_epoch=best_epoch,
        best_val_mse=float(best_val),
        stopped_early=stopped_early,
    )
