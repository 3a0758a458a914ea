"""Training losses: MSE and the horizon-weighted MAE family.

The weighted family scales each forecast step's absolute error by a
positive non-increasing coefficient of the 1-based step index. The
arctangent coefficient decays far more slowly than the inverse-square-root
one (about 0.216 versus 0.037 at step 720), which keeps distant steps
relevant while still damping their variance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .autograd import Tensor, absolute, tmean
from .errors import ConfigError, DimensionError

LOSS_KINDS = ("mse", "mae", "card", "arctan", "scalable")


def rho_card(i, m: float = 0.5) -> np.ndarray:
    """Inverse power decay i**(-m); the published variant uses m = 1/2."""
    return np.asarray(i, dtype=np.float64) ** (-m)


def rho_arctan(i, m: float = 1.0) -> np.ndarray:
    """Arctangent decay -m*(arctan(i) - pi/4) + 1; equals 1 exactly at i=1."""
    i = np.asarray(i, dtype=np.float64)
    return -m * (np.arctan(i) - np.pi / 4.0) + 1.0


def _check_shapes(pred: Tensor, target: Tensor) -> None:
    if pred.shape != target.shape:
        raise DimensionError(
            f"prediction shape {pred.shape} does not match target shape {target.shape}"
        )


def loss_mse(pred: Tensor, target: Tensor) -> Tensor:
    _check_shapes(pred, target)
    diff = pred - target
    return tmean(diff * diff)


def loss_scalable(pred: Tensor, target: Tensor, rho: np.ndarray) -> Tensor:
    """(1/T) * sum_i rho(i) * mean_rows |pred[:, i] - target[:, i]|."""
    _check_shapes(pred, target)
    horizon = pred.shape[-1]
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != (horizon,):
        raise DimensionError(
            f"rho has shape {rho.shape}, expected ({horizon},) for this horizon"
        )
    if np.any(rho <= 0.0):
        raise ConfigError("scaling coefficients must be positive")
    per_step = absolute(pred - target).mean(axis=0)
    return (per_step * Tensor(rho)).sum() / float(horizon)


def loss_mae(pred: Tensor, target: Tensor) -> Tensor:
    return loss_scalable(pred, target, np.ones(pred.shape[-1]))


@dataclass(frozen=True)
class LossSpec:
    """Declarative loss choice; ``build`` turns it into a callable.

    ``m`` is the arctangent scaling parameter (1 keeps the published
    coefficient; 0 degenerates to plain MAE). ``rho`` supplies a custom
    coefficient function for kind="scalable".
    """

    kind: str = "arctan"
    m: float = 1.0
    rho: Callable[[np.ndarray], np.ndarray] | None = None

    def coefficients(self, horizon: int) -> np.ndarray | None:
        steps = np.arange(1, horizon + 1, dtype=np.float64)
        if self.kind in ("mse",):
            return None
        if self.kind == "mae":
            return np.ones(horizon)
        if self.kind == "card":
            return rho_card(steps)
        if self.kind == "arctan":
            if self.m == 0.0:
                return np.ones(horizon)
            return rho_arctan(steps, self.m)
        if self.kind == "scalable":
            if self.rho is None:
                raise ConfigError("kind='scalable' requires a rho function")
            return np.asarray(self.rho(steps), dtype=np.float64)
        raise ConfigError(f"loss kind must be one of {LOSS_KINDS}, got {self.kind!r}")

    def build(self, horizon: int) -> Callable[[Tensor, Tensor], Tensor]:
        if self.kind == "mse":
            return loss_mse
        coeff = self.coefficients(horizon)
        if np.any(coeff <= 0.0):
            raise ConfigError("scaling coefficients must be positive")
        if np.any(np.diff(coeff) > 0.0):
            raise ConfigError("scaling coefficients must be non-increasing")

        def fn(pred: Tensor, target: Tensor) -> Tensor:
            return loss_scalable(pred, target, coeff)

        return fn
