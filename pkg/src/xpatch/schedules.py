"""Learning-rate schedules over 1-based epoch indices.

The three schedules carried over from earlier forecasting work are
implemented as their conventional closed forms; the sigmoid schedule is
the difference of two logistic curves, which is exactly zero at epoch 0,
warms up smoothly, and decays slowly afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, ParameterError

SCHEDULE_KINDS = ("standard", "patch_tst", "cosine_warmup", "sigmoid")


def lr_standard(epoch: int, alpha0: float) -> float:
    """Halving decay alpha0 * 0.5**(epoch-1)."""
    if epoch < 1:
        raise ParameterError(f"epoch must be >= 1, got {epoch}")
    return alpha0 * 0.5 ** (epoch - 1)


def lr_patch_tst(epoch: int, alpha0: float) -> float:
    """Flat for two epochs, then alpha0 * 0.9**(epoch-3)."""
    if epoch < 1:
        raise ParameterError(f"epoch must be >= 1, got {epoch}")
    if epoch < 3:
        return alpha0
    return alpha0 * 0.9 ** (epoch - 3)


def lr_cosine_warmup(epoch: int, alpha0: float, warmup: int, total: int = 100) -> float:
    """Linear ramp alpha0*t/w, then one half cosine down to zero at ``total``."""
    if epoch < 0:
        raise ParameterError(f"epoch must be >= 0, got {epoch}")
    if warmup < 1 or total <= warmup:
        raise ParameterError(f"need 1 <= warmup < total, got {warmup}, {total}")
    if epoch < warmup:
        return alpha0 * epoch / warmup
    if epoch >= total:
        return 0.0
    return 0.5 * alpha0 * (1.0 + math.cos(math.pi * (epoch - warmup) / (total - warmup)))


def lr_sigmoid(
    epoch: float,
    alpha0: float,
    k: float = 0.5,
    s: float = 10.0,
    w: float = 10.0,
) -> float:
    """Difference of two logistic curves; exactly zero at epoch 0."""
    if k <= 0.0:
        raise ParameterError(f"logistic growth rate k must be > 0, got {k}")
    if s <= 1.0:
        raise ParameterError(f"smoothing rate s must be > 1, got {s}")
    if w < 1.0:
        raise ParameterError(f"warm-up coefficient w must be >= 1, got {w}")
    rising = alpha0 / (1.0 + math.exp(-k * (epoch - w)))
    falling = alpha0 / (1.0 + math.exp(-(k / s) * (epoch - s * w)))
    return rising - falling


@dataclass(frozen=True)
class SchedulerSpec:
    """Declarative schedule choice with the published default constants."""

    kind: str = "sigmoid"
    alpha0: float = 1e-4
    k: float = 0.5
    s: float = 10.0
    w: float = 10.0
    total_epochs: int = 100

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ConfigError(
                f"scheduler kind must be one of {SCHEDULE_KINDS}, got {self.kind!r}"
            )
        if self.alpha0 <= 0.0:
            raise ConfigError(f"alpha0 must be positive, got {self.alpha0}")

    def rate(self, epoch: int) -> float:
        if self.kind == "standard":
            lr = lr_standard(epoch, self.alpha0)
        elif self.kind == "patch_tst":
            lr = lr_patch_tst(epoch, self.alpha0)
        elif self.kind == "cosine_warmup":
            lr = lr_cosine_warmup(epoch, self.alpha0, int(self.w), self.total_epochs)
        else:
            lr = lr_sigmoid(epoch, self.alpha0, self.k, self.s, self.w)
        if lr < 0.0:
            raise ConfigError(f"schedule emitted a negative rate {lr} at epoch {epoch}")
        return lr
