"""Seasonal-trend decomposition by exponential and simple moving averages.

The exponential path exists twice on purpose: a recursive definition used
as the test oracle and a closed-form weight-vector formulation used in
production (fully vectorizable, one matrix product per series).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ParameterError
from .validation import as_matrix, as_series, check_alpha, check_odd_kernel


@dataclass(frozen=True)
class DecomposedPair:
    """Trend/seasonal split of a series.

    ``seasonal`` is defined as ``input - trend``, so ``input - trend ==
    seasonal`` holds bitwise. The additive direction ``trend + seasonal``
    recovers the input to within one rounding of the trend magnitude
    (exact bitwise addition is not representable in IEEE-754 when an
    input value is much smaller than its trend value).
    """

    trend: np.ndarray
    seasonal: np.ndarray
    alpha_or_kernel: float

    def __post_init__(self):
        if self.trend.shape != self.seasonal.shape:
            raise ParameterError(
                f"trend and seasonal must share a shape, got "
                f"{self.trend.shape} and {self.seasonal.shape}"
            )


@dataclass(frozen=True)
class EmaWeights:
    """Geometric coefficient vector for one smoothing step of length t+1.

    ``weights[0]`` carries the boundary term (1-alpha)^t from seeding the
    recursion with the first observation; every later entry j holds
    (1-alpha)^(t-j) * alpha. Prefix weights telescope to exactly 1.
    """

    alpha: float
    weights: np.ndarray


def ema_weights(alpha: float, length: int) -> EmaWeights:
    """Weight vector for the smoothed value at index ``length - 1``."""
    check_alpha(alpha)
    if length < 1:
        raise ParameterError(f"length must be >= 1, got {length}")
    t = length - 1
    r = 1.0 - alpha
    w = np.empty(length)
    w[0] = r**t
    if t >= 1:
        w[1:] = alpha * r ** np.arange(t - 1, -1, -1)
    return EmaWeights(alpha=alpha, weights=w)


@lru_cache(maxsize=8)
def ema_weight_matrix(length: int, alpha: float) -> np.ndarray:
    """Lower-triangular (L, L) matrix W with trend = W @ x for any series x.

    Row t is the length-(t+1) weight vector padded with zeros. Entries
    whose geometric factor underflows to zero are harmless: they would
    contribute nothing at 64-bit precision anyway.
    """
    check_alpha(alpha)
    r = 1.0 - alpha
    idx = np.arange(length)
    exponents = idx[:, None] - idx[None, :]
    with np.errstate(under="ignore"):
        powers = np.where(exponents >= 0, r ** np.maximum(exponents, 0), 0.0)
    w = alpha * powers
    w[:, 0] = powers[:, 0]
    w.flags.writeable = False  # cached and shared between callers
    return w


def ema_recursive(x, alpha: float) -> DecomposedPair:
    """Reference recursion: trend[0] = x[0], then the exponential update."""
    x = as_series(x)
    check_alpha(alpha)
    trend = np.empty_like(x)
    trend[0] = x[0]
    r = 1.0 - alpha
    for i in range(1, len(x)):
        trend[i] = alpha * x[i] + r * trend[i - 1]
    return DecomposedPair(trend=trend, seasonal=x - trend, alpha_or_kernel=alpha)


def ema_closed_form(x, alpha: float) -> DecomposedPair:
    """Vectorized smoothing through the geometric weight matrix."""
    x = as_series(x)
    check_alpha(alpha)
    trend = ema_weight_matrix(len(x), alpha) @ x
    return DecomposedPair(trend=trend, seasonal=x - trend, alpha_or_kernel=alpha)


def sma(x, kernel: int) -> DecomposedPair:
    """Centered moving mean with edge replication, output length preserved.

    The first and last values are repeated (kernel-1)/2 times before the
    stride-1 moving mean, so an odd kernel is required for the padding to
    be symmetric.
    """
    x = as_series(x)
    check_odd_kernel(kernel)
    half = (kernel - 1) // 2
    padded = np.concatenate([np.full(half, x[0]), x, np.full(half, x[-1])])
    windows = np.lib.stride_tricks.sliding_window_view(padded, kernel)
    trend = windows.mean(axis=-1)
    return DecomposedPair(trend=trend, seasonal=x - trend, alpha_or_kernel=kernel)


def decompose_rows(rows: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form EMA split of a (rows, length) batch; returns (trend, seasonal)."""
    w = ema_weight_matrix(rows.shape[-1], alpha)
    trend = rows @ w.T
    return trend, rows - trend


class EmaDecomposer(TransformerMixin, BaseEstimator):
    """Stateless exponential decomposition with a scikit-learn face.

    ``transform`` returns the component selected at construction time so
    the object drops into pipelines; ``decompose`` returns both parts.
    """

    def __init__(self, alpha: float = 0.3, component: str = "trend"):
        self.alpha = alpha
        self.component = component

    def fit(self, X, y=None):
        check_alpha(self.alpha)
        if self.component not in ("trend", "seasonal"):
            raise ParameterError(
                f"component must be 'trend' or 'seasonal', got {self.component!r}"
            )
        return self

    def transform(self, X) -> np.ndarray:
        self.fit(X)
        trend, seasonal = self.decompose(X)
        return trend if self.component == "trend" else seasonal

    def decompose(self, X) -> tuple[np.ndarray, np.ndarray]:
        X = as_matrix(X)
        trend, seasonal = decompose_rows(X.T, self.alpha)
        return trend.T, seasonal.T


class SmaDecomposer(TransformerMixin, BaseEstimator):
    """Moving-average decomposition with the same interface as EmaDecomposer."""

    def __init__(self, kernel: int = 25, component: str = "trend"):
        self.kernel = kernel
        self.component = component

    def fit(self, X, y=None):
        check_odd_kernel(self.kernel)
        if self.component not in ("trend", "seasonal"):
            raise ParameterError(
                f"component must be 'trend' or 'seasonal', got {self.component!r}"
            )
        return self

    def transform(self, X) -> np.ndarray:
        self.fit(X)
        trend, seasonal = self.decompose(X)
        return trend if self.component == "trend" else seasonal

    def decompose(self, X) -> tuple[np.ndarray, np.ndarray]:
        X = as_matrix(X)
        parts = [sma(X[:, j], self.kernel) for j in range(X.shape[1])]
        trend = np.stack([p.trend for p in parts], axis=1)
        return trend, X - trend
