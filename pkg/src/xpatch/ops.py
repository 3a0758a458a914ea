"""Network layers on top of the autograd core.

All layers follow deep-learning conventions: convolution is
cross-correlation without padding, normalization uses population variance
with eps inside the square root, GELU is the exact erf form.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

from .autograd import Array, Tensor, record
from .errors import ConfigError, DimensionError, ParameterError

logger = logging.getLogger(__name__)

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Affine map ``x @ w + b`` over the trailing axis of ``x``."""
    if w.ndim != 2 or x.shape[-1] != w.shape[0]:
        raise DimensionError(
            f"linear: input shape {x.shape} does not match weight shape {w.shape}"
        )
    out = x @ w
    if b is not None:
        if b.shape != (w.shape[1],):
            raise DimensionError(
                f"linear: bias shape {b.shape} does not match weight shape {w.shape}"
            )
        out = out + b
    return out


def _window_starts(n: int, kernel: int, stride: int) -> int:
    return (n - kernel) // stride + 1


def avg_pool1d(x: Tensor, kernel: int, stride: int) -> Tensor:
    """Unweighted moving mean over the last axis; the tail remainder is dropped."""
    n = x.shape[-1]
    if kernel < 1 or stride < 1:
        raise ParameterError(f"kernel and stride must be >= 1, got {kernel}, {stride}")
    if kernel > n:
        raise DimensionError(f"pool kernel {kernel} exceeds axis length {n}")
    n_out = _window_starts(n, kernel, stride)
    windows = sliding_window_view(x.data, kernel, axis=-1)[..., ::stride, :]
    out = windows.mean(axis=-1)

    def vjp(g: Array) -> Array:
        dx = np.zeros_like(x.data)
        share = g / kernel
        span = stride * (n_out - 1) + 1
        for tap in range(kernel):
            dx[..., tap : tap + span : stride] += share
        return dx

    return record(out, (x,), (vjp,))


def unfold_last(x: Tensor, window: int, step: int) -> Tensor:
    """Slide a window over the last axis, producing (...,[n_windows], window)."""
    n = x.shape[-1]
    if window > n:
        raise DimensionError(f"window {window} exceeds axis length {n}")
    n_out = _window_starts(n, window, step)
    out = sliding_window_view(x.data, window, axis=-1)[..., ::step, :].copy()

    def vjp(g: Array) -> Array:
        dx = np.zeros_like(x.data)
        span = step * (n_out - 1) + 1
        for tap in range(window):
            dx[..., tap : tap + span : step] += g[..., :, tap]
        return dx

    return record(out, (x,), (vjp,))


def replicate_last(x: Tensor, times: int) -> Tensor:
    """Extend the last axis by repeating its final value ``times`` times."""
    if times < 1:
        raise ParameterError(f"times must be >= 1, got {times}")
    n = x.shape[-1]
    out = np.concatenate([x.data, np.repeat(x.data[..., -1:], times, axis=-1)], axis=-1)

    def vjp(g: Array) -> Array:
        dx = g[..., :n].copy()
        dx[..., -1] += g[..., n:].sum(axis=-1)
        return dx

    return record(out, (x,), (vjp,))


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Zero-mean unit-variance over the last axis, then affine."""
    n = x.shape[-1]
    if gamma.shape != (n,) or beta.shape != (n,):
        raise DimensionError(
            f"layer_norm: affine shapes {gamma.shape}/{beta.shape} do not match "
            f"feature width {n}"
        )
    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = xhat * gamma.data + beta.data

    def vjp_x(g: Array) -> Array:
        dxhat = g * gamma.data
        term = dxhat.sum(axis=-1, keepdims=True)
        proj = (dxhat * xhat).sum(axis=-1, keepdims=True)
        return inv_std / n * (n * dxhat - term - xhat * proj)

    def vjp_gamma(g: Array) -> Array:
        return (g * xhat).reshape(-1, n).sum(axis=0)

    def vjp_beta(g: Array) -> Array:
        return g.reshape(-1, n).sum(axis=0)

    return record(out, (x, gamma, beta), (vjp_x, vjp_gamma, vjp_beta))


@dataclass
class BatchNormState:
    """Per-channel running statistics with the number of batches seen."""

    channels: int
    momentum: float = 0.1
    running_mean: np.ndarray = field(init=False)
    running_var: np.ndarray = field(init=False)
    batches_seen: int = field(default=0, init=False)

    def __post_init__(self):
        self.running_mean = np.zeros(self.channels)
        self.running_var = np.ones(self.channels)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    state: BatchNormState,
    training: bool,
    eps: float = 1e-5,
) -> Tensor:
    """Normalize (B, C, n) per channel over batch and spatial axes."""
    if x.ndim != 3:
        raise DimensionError(f"batch_norm expects (B, C, n), got {x.shape}")
    channels = x.shape[1]
    if state.channels != channels or gamma.shape != (channels,):
        raise DimensionError(
            f"batch_norm: channel count {channels} does not match state/affine "
            f"({state.channels}, {gamma.shape})"
        )

    if training:
        mean = x.data.mean(axis=(0, 2))
        var = x.data.var(axis=(0, 2))
        m = state.momentum
        state.running_mean = (1.0 - m) * state.running_mean + m * mean
        state.running_var = (1.0 - m) * state.running_var + m * var
        state.batches_seen += 1
    else:
        if state.batches_seen == 0:
            logger.warning(
                "batch_norm evaluated before any training batch; "
                "using initialized statistics (mean 0, var 1)"
            )
        mean = state.running_mean
        var = state.running_var

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean[None, :, None]) * inv_std[None, :, None]
    out = xhat * gamma.data[None, :, None] + beta.data[None, :, None]

    count = x.shape[0] * x.shape[2]

    def vjp_x(g: Array) -> Array:
        dxhat = g * gamma.data[None, :, None]
        if not training:
            return dxhat * inv_std[None, :, None]
        term = dxhat.sum(axis=(0, 2))[None, :, None]
        proj = (dxhat * xhat).sum(axis=(0, 2))[None, :, None]
        return inv_std[None, :, None] / count * (count * dxhat - term - xhat * proj)

    def vjp_gamma(g: Array) -> Array:
        return (g * xhat).sum(axis=(0, 2))

    def vjp_beta(g: Array) -> Array:
        return g.sum(axis=(0, 2))

    return record(out, (x, gamma, beta), (vjp_x, vjp_gamma, vjp_beta))


def gelu(x: Tensor) -> Tensor:
    """Exact GELU x * Phi(x) with the standard normal CDF (erf form)."""
    cdf = 0.5 * (1.0 + erf(x.data / _SQRT2))
    out = x.data * cdf

    def vjp(g: Array) -> Array:
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
        return g * (cdf + x.data * pdf)

    return record(out, (x,), (vjp,))


def grouped_conv1d(
    x: Tensor,
    w: Tensor,
    b: Tensor,
    stride: int,
    groups: int,
) -> Tensor:
    """Grouped cross-correlation over (B, C, n) without padding.

    Covers both the depthwise (groups = C, kernel = stride) and the
    pointwise (groups = 1, kernel = 1) configurations.
    """
    if x.ndim != 3 or w.ndim != 3:
        raise DimensionError(
            f"grouped_conv1d expects x (B, C, n) and w (C_out, C/g, k), "
            f"got {x.shape} and {w.shape}"
        )
    batch, channels, n = x.shape
    c_out, c_in_group, kernel = w.shape
    if channels % groups != 0 or c_out % groups != 0:
        raise ConfigError(
            f"channel counts ({channels} in, {c_out} out) must be divisible "
            f"by groups ({groups})"
        )
    if c_in_group != channels // groups:
        raise DimensionError(
            f"weight expects {c_in_group} channels per group but input provides "
            f"{channels // groups}"
        )
    if b.shape != (c_out,):
        raise DimensionError(f"bias shape {b.shape} does not match C_out {c_out}")
    if kernel > n:
        raise DimensionError(f"kernel {kernel} exceeds spatial length {n}")
    if stride < 1:
        raise ParameterError(f"stride must be >= 1, got {stride}")

    out_group = c_out // groups
    n_out = _window_starts(n, kernel, stride)
    # windows: (B, g, C/g, n_out, k); weights: (g, out/g, C/g, k)
    windows = sliding_window_view(x.data, kernel, axis=-1)[..., ::stride, :]
    windows = windows.reshape(batch, groups, c_in_group, n_out, kernel)
    wg = w.data.reshape(groups, out_group, c_in_group, kernel)
    out = np.einsum("bgcok,gdck->bgdo", windows, wg, optimize=True)
    out = out.reshape(batch, c_out, n_out) + b.data[None, :, None]

    def vjp_x(g: Array) -> Array:
        gg = g.reshape(batch, groups, out_group, n_out)
        dx = np.zeros_like(x.data)
        dxg = dx.reshape(batch, groups, c_in_group, n)
        span = stride * (n_out - 1) + 1
        for tap in range(kernel):
            contrib = np.einsum("gdc,bgdo->bgco", wg[..., tap], gg, optimize=True)
            dxg[..., tap : tap + span : stride] += contrib
        return dx

    def vjp_w(g: Array) -> Array:
        gg = g.reshape(batch, groups, out_group, n_out)
        dw = np.einsum("bgcok,bgdo->gdck", windows, gg, optimize=True)
        return dw.reshape(c_out, c_in_group, kernel)

    def vjp_b(g: Array) -> Array:
        return g.sum(axis=(0, 2))

    return record(out, (x, w, b), (vjp_x, vjp_w, vjp_b))
