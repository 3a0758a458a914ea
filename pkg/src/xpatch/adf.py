"""Augmented Dickey-Fuller unit-root testing for raw and decomposed series.

The regression is the constant-only variant: difference the series,
regress on an intercept, the lagged level, and ``p`` lagged differences,
and read the t-statistic of the lagged-level coefficient. Approximate
p-values and finite-sample critical values come from MacKinnon's
published response surfaces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .decompose import decompose_rows
from .errors import NumericalError, ParameterError
from .validation import as_matrix, as_series, check_alpha, check_positive_int

# MacKinnon (1994) p-value response surface, constant-only case, one unit
# root. Phi(poly(tau)) approximates the p-value between the tabulated
# bounds; outside them the p-value saturates at 0 or 1.
_TAU_STAR = -1.61
_TAU_MIN = -18.83
_TAU_MAX = 2.74
_SMALL_P = (2.1659, 1.4412, 0.038269)  # tau <= _TAU_STAR
_LARGE_P = (1.7339, 0.93202, -0.12745, -0.010368)

# MacKinnon (2010) finite-sample critical values, constant-only case:
# crit = b0 + b1/n + b2/n^2 + b3/n^3 at the 1% / 5% / 10% levels.
_CRIT_SURFACE = {
    0.01: (-3.43035, -6.5393, -16.786, -79.433),
    0.05: (-2.86154, -2.8903, -4.234, -40.04),
    0.10: (-2.56677, -1.5384, -2.809, 0.0),
}


def mackinnon_pvalue(t_stat: float) -> float:
    if t_stat > _TAU_MAX:
        return 1.0
    if t_stat < _TAU_MIN:
        return 0.0
    coeffs = _SMALL_P if t_stat <= _TAU_STAR else _LARGE_P
    poly = sum(c * t_stat**i for i, c in enumerate(coeffs))
    return float(norm.cdf(poly))


def mackinnon_critical_value(level: float, nobs: int) -> float:
    if level not in _CRIT_SURFACE:
        raise ParameterError(f"level must be one of {sorted(_CRIT_SURFACE)}, got {level}")
    b = _CRIT_SURFACE[level]
    return b[0] + b[1] / nobs + b[2] / nobs**2 + b[3] / nobs**3


def default_lag_order(n: int) -> int:
    """Schwert's rule floor(12 * (n/100)^(1/4))."""
    return int(np.floor(12.0 * (n / 100.0) ** 0.25))


def _p_bucket(p: float) -> str:
    if p < 0.01:
        return "<0.01"
    if p < 0.05:
        return "<0.05"
    if p < 0.10:
        return "<0.10"
    return ">=0.10"


@dataclass(frozen=True)
class AdfResult:
    t_stat: float
    p_value: float
    p_bucket: str
    lags_used: int
    n: int  # observations entering the regression
    stationary_at_5pct: bool


def adf_test(x, max_lags: int | None = None) -> AdfResult:
    """Unit-root test on one series; rejection (low p) means stationary."""
    x = as_series(x)
    lags = default_lag_order(len(x)) if max_lags is None else int(max_lags)
    if lags < 0:
        raise ParameterError(f"max_lags must be >= 0, got {max_lags}")
    if len(x) < 20 + lags:
        raise ParameterError(
            f"series of length {len(x)} is too short for {lags} lags "
            f"(need at least {20 + lags})"
        )

    dy = np.diff(x)
    nobs = len(dy) - lags
    response = dy[lags:]
    columns = [np.ones(nobs), x[lags:-1]]
    for i in range(1, lags + 1):
        columns.append(dy[lags - i : len(dy) - i])
    design = np.column_stack(columns)

    beta, _, rank, _ = np.linalg.lstsq(design, response, rcond=None)
    fitted = design @ beta
    rss = float(np.sum((response - fitted) ** 2))
    dof = nobs - design.shape[1]
    if dof <= 0:
        raise ParameterError(f"not enough observations ({nobs}) for {lags} lags")

    if rank < design.shape[1]:
        relative_rss = rss / max(float(np.sum(response**2)), 1e-300)
        if relative_rss < 1e-12 and abs(beta[1]) < 1e-8:
            # Deterministic series (e.g. an exact linear trend): the
            # regression fits perfectly, the level coefficient carries no
            # evidence, and the verdict defaults to non-stationary.
            p = mackinnon_pvalue(0.0)
            return AdfResult(
                t_stat=0.0,
                p_value=p,
                p_bucket=_p_bucket(p),
                lags_used=lags,
                n=nobs,
                stationary_at_5pct=False,
            )
        cond = float(np.linalg.cond(design))
        raise NumericalError(
            f"ADF regression matrix is near-singular (condition {cond:.3e})"
        )

    sigma2 = rss / dof
    xtx_inv = np.linalg.pinv(design.T @ design)
    se = float(np.sqrt(sigma2 * xtx_inv[1, 1]))
    if not np.isfinite(se) or se == 0.0:
        raise NumericalError("ADF level coefficient has no usable standard error")
    t_stat = float(beta[1] / se)
    p = mackinnon_pvalue(t_stat)
    crit5 = mackinnon_critical_value(0.05, nobs)
    return AdfResult(
        t_stat=t_stat,
        p_value=p,
        p_bucket=_p_bucket(p),
        lags_used=lags,
        n=nobs,
        stationary_at_5pct=bool(t_stat < crit5),
    )


@dataclass(frozen=True)
class ChunkRow:
    chunk_index: int
    channel: int
    component: str  # raw | trend | seasonal
    t_stat: float
    p_value: float
    p_bucket: str
    stationary: bool


@dataclass(frozen=True)
class ChunkedAdfTable:
    rows: list[ChunkRow]
    chunk_len: int
    alpha: float

    def mean_p(self, component: str) -> float:
        ps = [r.p_value for r in self.rows if r.component == component]
        if not ps:
            raise ParameterError(f"no rows for component {component!r}")
        return float(np.mean(ps))

    def stationary_count(self, component: str) -> int:
        return sum(r.stationary for r in self.rows if r.component == component)

    def total_chunks(self, component: str = "raw") -> int:
        return sum(1 for r in self.rows if r.component == component)

    def to_csv(self) -> str:
        lines = ["chunk_index,channel,component,t_stat,p_bucket,stationary"]
        for r in self.rows:
            lines.append(
                f"{r.chunk_index},{r.channel},{r.component},"
                f"{r.t_stat:.6f},{r.p_bucket},{int(r.stationary)}"
            )
        return "\n".join(lines) + "\n"


def chunked_adf(
    values,
    chunk_len: int = 720,
    alpha: float = 0.3,
    max_lags: int | None = None,
    channels: list[int] | None = None,
) -> ChunkedAdfTable:
    """Per-chunk ADF of raw series and their smoothed/residual components.

    The value matrix is cut into floor(n/chunk_len) non-overlapping chunks
    per channel; each chunk is tested raw and after exponential
    decomposition.
    """
    values = as_matrix(values)
    check_positive_int(chunk_len, "chunk_len")
    check_alpha(alpha, allow_one=False)
    n_chunks = values.shape[0] // chunk_len
    if n_chunks < 1:
        raise ParameterError(
            f"need at least {chunk_len} rows for one chunk, got {values.shape[0]}"
        )
    use_channels = channels if channels is not None else list(range(values.shape[1]))
    rows: list[ChunkRow] = []
    for ci in range(n_chunks):
        block = values[ci * chunk_len : (ci + 1) * chunk_len]
        for ch in use_channels:
            series = block[:, ch]
            trend, seasonal = decompose_rows(series[None, :], alpha)
            for component, data in (
                ("raw", series),
                ("trend", trend[0]),
                ("seasonal", seasonal[0]),
            ):
                res = adf_test(data, max_lags=max_lags)
                rows.append(
                    ChunkRow(
                        chunk_index=ci,
                        channel=ch,
                        component=component,
                        t_stat=res.t_stat,
                        p_value=res.p_value,
                        p_bucket=res.p_bucket,
                        stationary=res.stationary_at_5pct,
                    )
                )
    return ChunkedAdfTable(rows=rows, chunk_len=chunk_len, alpha=alpha)
