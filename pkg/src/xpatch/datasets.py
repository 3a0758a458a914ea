"""CSV ingestion, canonical benchmark splits, scaling, and window batching.

Named presets reproduce the community protocol for the nine benchmark
sets: the four ETT files use fixed calendar borders, everything else is a
0.7/0.1/0.2 ratio split. Validation and test views are given the final
``lookback`` rows of the preceding split as context so their first
windows exist.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import DataError, DimensionError, ParameterError
from .validation import as_matrix, check_positive_int

HOUR_MONTH = 30 * 24
MINUTE_MONTH = 30 * 24 * 4


@dataclass(frozen=True)
class RawDataset:
    name: str
    values: np.ndarray  # (n_rows, M)
    column_names: tuple[str, ...]
    frequency: str = ""
    dates: tuple[str, ...] | None = None

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SplitSpec:
    """Raw row counts per split, before lookback context is prepended."""

    train_len: int
    val_len: int
    test_len: int

    def __post_init__(self):
        for name in ("train_len", "val_len", "test_len"):
            check_positive_int(getattr(self, name), name)

    @property
    def total(self) -> int:
        return self.train_len + self.val_len + self.test_len


@dataclass(frozen=True)
class DatasetPreset:
    """Protocol bindings for one named benchmark dataset."""

    name: str
    n_channels: int
    frequency: str
    split_rule: str  # "ett_hour" | "ett_minute" | "ratio"
    default_lookback: int
    horizons: tuple[int, ...]
    published_sizes: tuple[int, int, int]  # verbatim benchmark-table triplet


PRESETS: dict[str, DatasetPreset] = {
    "etth1": DatasetPreset("etth1", 7, "h", "ett_hour", 96, (96, 192, 336, 720), (8545, 2881, 2881)),
    "etth2": DatasetPreset("etth2", 7, "h", "ett_hour", 96, (96, 192, 336, 720), (8545, 2881, 2881)),
    "ettm1": DatasetPreset("ettm1", 7, "15min", "ett_minute", 96, (96, 192, 336, 720), (34465, 11521, 11521)),
    "ettm2": DatasetPreset("ettm2", 7, "15min", "ett_minute", 96, (96, 192, 336, 720), (34465, 11521, 11521)),
    "weather": DatasetPreset("weather", 21, "10min", "ratio", 96, (96, 192, 336, 720), (36792, 5271, 10540)),
    "traffic": DatasetPreset("traffic", 862, "h", "ratio", 96, (96, 192, 336, 720), (12185, 1757, 3509)),
    "electricity": DatasetPreset("electricity", 321, "h", "ratio", 96, (96, 192, 336, 720), (18317, 2633, 5261)),
    "exchange": DatasetPreset("exchange", 8, "d", "ratio", 96, (96, 192, 336, 720), (5120, 665, 1422)),
    "solar": DatasetPreset("solar", 137, "10min", "ratio", 96, (96, 192, 336, 720), (36792, 5271, 10540)),
    "ili": DatasetPreset("ili", 7, "w", "ratio", 36, (24, 36, 48, 60), (617, 74, 170)),
}

# Dataset file names as published by their upstream sources.
PRESET_FILES = {
    "etth1": "ETTh1.csv",
    "etth2": "ETTh2.csv",
    "ettm1": "ETTm1.csv",
    "ettm2": "ETTm2.csv",
    "weather": "weather.csv",
    "traffic": "traffic.csv",
    "electricity": "electricity.csv",
    "exchange": "exchange_rate.csv",
    "solar": "solar_AL.csv",
    "ili": "national_illness.csv",
}


def load_csv(path, date_column_present: bool = True, name: str = "") -> RawDataset:
    """Read a feature matrix from a headered CSV.

    The first column is treated as a date label when its header is
    ``date`` (kept for reports, dropped from the matrix). Any cell that
    fails to parse as a float rejects the file with its row and column.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"input file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        has_date = date_column_present and bool(header) and header[0].strip().lower() == "date"
        columns = tuple(h.strip() for h in (header[1:] if has_date else header))
        if not columns:
            raise DataError(f"{path}: no feature columns in header")
        rows: list[list[float]] = []
        dates: list[str] = []
        for line_no, raw in enumerate(reader, start=2):
            if not raw:
                continue
            cells = raw[1:] if has_date else raw
            if has_date:
                dates.append(raw[0])
            if len(cells) != len(columns):
                raise DataError(
                    f"{path}: row {line_no} has {len(cells)} cells, expected {len(columns)}"
                )
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                bad = next(i for i, c in enumerate(cells) if not _parses(c))
                raise DataError(
                    f"{path}: row {line_no}, column {columns[bad]!r}: "
                    f"cannot parse {cells[bad]!r} as a number"
                ) from None
    if not rows:
        raise DataError(f"{path}: header only, no data rows")
    values = np.asarray(rows, dtype=np.float64)
    return RawDataset(
        name=name or path.stem,
        values=values,
        column_names=columns,
        dates=tuple(dates) if has_date else None,
    )


def _parses(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def split_spec_for(preset: DatasetPreset, n_rows: int) -> SplitSpec:
    """Raw row counts per split under the preset's protocol rule."""
    if preset.split_rule == "ett_hour":
        spec = SplitSpec(12 * HOUR_MONTH, 4 * HOUR_MONTH, 4 * HOUR_MONTH)
    elif preset.split_rule == "ett_minute":
        spec = SplitSpec(12 * MINUTE_MONTH, 4 * MINUTE_MONTH, 4 * MINUTE_MONTH)
    else:
        train = int(n_rows * 0.7)
        test = int(n_rows * 0.2)
        spec = SplitSpec(train, n_rows - train - test, test)
    if spec.total > n_rows:
        raise DataError(
            f"{preset.name}: split needs {spec.total} rows but file has {n_rows}"
        )
    return spec


def ratio_split_spec(n_rows: int, train: float = 0.7, test: float = 0.2) -> SplitSpec:
    n_train = int(n_rows * train)
    n_test = int(n_rows * test)
    return SplitSpec(n_train, n_rows - n_train - n_test, n_test)


@dataclass(frozen=True)
class SplitViews:
    """Per-split value matrices; val/test carry ``lookback`` context rows."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    lookback: int


def split(ds: RawDataset, spec: SplitSpec, lookback: int) -> SplitViews:
    check_positive_int(lookback, "lookback")
    if spec.total > ds.n_rows:
        raise DataError(
            f"split needs {spec.total} rows but dataset {ds.name!r} has {ds.n_rows}"
        )
    if lookback > spec.train_len or lookback > spec.val_len + spec.train_len:
        raise DataError(f"lookback {lookback} exceeds the preceding split")
    t_end = spec.train_len
    v_end = t_end + spec.val_len
    s_end = v_end + spec.test_len
    return SplitViews(
        train=ds.values[:t_end],
        val=ds.values[t_end - lookback : v_end],
        test=ds.values[v_end - lookback : s_end],
        lookback=lookback,
    )


def window_count(view_len: int, lookback: int, horizon: int) -> int:
    return view_len - lookback - horizon + 1


class Scaler:
    """Per-column z-score with population variance, fit on train rows only."""

    def __init__(self):
        self.mean: np.ndarray | None = None
        self.std: np.ndarray | None = None

    def fit(self, values, column_names: tuple[str, ...] | None = None) -> "Scaler":
        values = as_matrix(values, "train view")
        self.mean = values.mean(axis=0)
        self.std = values.std(axis=0)
        dead = np.flatnonzero(self.std <= 0.0)
        if dead.size:
            names = (
                ", ".join(column_names[i] for i in dead)
                if column_names
                else ", ".join(str(i) for i in dead)
            )
            raise DataError(f"zero-variance column(s) cannot be standardized: {names}")
        return self

    def transform(self, values: np.ndarray) -> np.ndarray:
        self._check_fitted()
        return (values - self.mean) / self.std

    def inverse_transform(self, values: np.ndarray) -> np.ndarray:
        self._check_fitted()
        return values * self.std + self.mean

    def _check_fitted(self):
        if self.mean is None:
            raise ParameterError("scaler must be fit before use")


@dataclass(frozen=True)
class WindowBatch:
    """One channel-flattened batch: row b*M + m holds window b, channel m."""

    inputs: np.ndarray  # (B*M, L)
    targets: np.ndarray  # (B*M, T)
    batch_channels: int


def flatten_channels(windows: np.ndarray) -> np.ndarray:
    """(B, M, n) -> (B*M, n) keeping each window's channels contiguous."""
    b, m, n = windows.shape
    return windows.reshape(b * m, n)


def unflatten_channels(rows: np.ndarray, n_channels: int) -> np.ndarray:
    """(B*M, n) -> (B, M, n); inverse of flatten_channels."""
    r, n = rows.shape
    if r % n_channels:
        raise DimensionError(
            f"{r} rows cannot be grouped into blocks of {n_channels} channels"
        )
    return rows.reshape(r // n_channels, n_channels, n)


def windows(
    view: np.ndarray,
    lookback: int,
    horizon: int,
    batch_size: int,
    shuffle_seed: int | None = None,
    drop_last: bool = False,
) -> Iterator[WindowBatch]:
    """Yield channel-flattened (lookback, horizon) window batches.

    Every valid start index produces one window; a seed shuffles window
    order (training), otherwise windows stream chronologically.
    """
    view = as_matrix(view, "view")
    n_rows, n_channels = view.shape
    count = window_count(n_rows, lookback, horizon)
    if count < 1:
        raise DataError(
            f"view of {n_rows} rows is too short; need at least "
            f"{lookback + horizon} rows for lookback {lookback} and horizon {horizon}"
        )
    order = np.arange(count)
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(count)
    for lo in range(0, count, batch_size):
        idx = order[lo : lo + batch_size]
        if drop_last and len(idx) < batch_size:
            return
        inputs = np.stack([view[i : i + lookback].T for i in idx])
        targets = np.stack([view[i + lookback : i + lookback + horizon].T for i in idx])
        yield WindowBatch(
            inputs=flatten_channels(inputs),
            targets=flatten_channels(targets),
            batch_channels=n_channels,
        )


def make_sine_dataset(
    n_rows: int,
    n_channels: int = 3,
    noise: float = 0.05,
    seed: int = 0,
    name: str = "synthetic-sine",
) -> RawDataset:
    """Multi-channel sine mixture with drift; learnable by construction."""
    rng = np.random.default_rng(seed)
    t = np.arange(n_rows, dtype=np.float64)
    cols = []
    for c in range(n_channels):
        period = 24.0 * (1.0 + 0.5 * c)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        drift = rng.uniform(-0.5, 0.5) * t / n_rows
        cols.append(
            np.sin(2.0 * np.pi * t / period + phase)
            + 0.3 * np.sin(2.0 * np.pi * t / (period * 7.0))
            + drift
            + noise * rng.standard_normal(n_rows)
        )
    values = np.stack(cols, axis=1)
    names = tuple(f"ch{c}" for c in range(n_channels))
    return RawDataset(name=name, values=values, column_names=names)
