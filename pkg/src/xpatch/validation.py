"""Input validation helpers used by the estimators and the functional API."""

from __future__ import annotations

import numpy as np

from .errors import DataError, DimensionError, ParameterError


def as_series(x, name: str = "x") -> np.ndarray:
    """Coerce to a 1-D float64 array of length >= 1."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ParameterError(f"{name} must not be empty")
    return arr


def as_matrix(x, name: str = "X") -> np.ndarray:
    """Coerce to a 2-D float64 array (rows = time, columns = channels)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise DataError(f"{name} must not be empty")
    return arr


def check_alpha(alpha: float, allow_one: bool = True) -> float:
    hi = "(0, 1]" if allow_one else "(0, 1)"
    upper_ok = alpha <= 1.0 if allow_one else alpha < 1.0
    if not (0.0 < alpha and upper_ok):
        raise ParameterError(f"smoothing factor alpha must be in {hi}, got {alpha}")
    return float(alpha)


def check_positive_int(value: int, name: str) -> int:
    if not isinstance(value, (int, np.integer)) or value <= 0:
        raise ParameterError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_odd_kernel(kernel: int) -> int:
    check_positive_int(kernel, "kernel")
    if kernel % 2 == 0:
        raise ParameterError(
            f"moving-average kernel must be odd so replication padding is "
            f"symmetric, got {kernel}"
        )
    return int(kernel)
