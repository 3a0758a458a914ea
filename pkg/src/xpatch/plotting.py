"""Dependency-free SVG line charts for forecasts and decompositions.

Output is deterministic text: fixed-precision coordinates, a fixed
palette, and no timestamps, so renderings can be pinned byte-for-byte in
golden-file tests.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ParameterError

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

WIDTH, HEIGHT = 860.0, 420.0
MARGIN_LEFT, MARGIN_RIGHT = 64.0, 16.0
MARGIN_TOP, MARGIN_BOTTOM = 28.0, 36.0


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def line_chart(
    series: dict[str, np.ndarray],
    path,
    title: str = "",
    lookback: int | None = None,
) -> Path:
    """Write a standalone SVG comparing equal-length series.

    ``lookback`` shades the first that many points as historical context.
    """
    if not series:
        raise ParameterError("at least one series is required")
    arrays = {name: np.asarray(vals, dtype=np.float64) for name, vals in series.items()}
    lengths = {arr.shape[0] for arr in arrays.values()}
    if len(lengths) != 1:
        raise ParameterError(f"series lengths differ: {sorted(lengths)}")
    n = lengths.pop()
    if n == 0:
        raise ParameterError("series must not be empty")

    lo = min(float(arr.min()) for arr in arrays.values())
    hi = max(float(arr.max()) for arr in arrays.values())
    if hi == lo:
        hi, lo = hi + 1.0, lo - 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def sx(i: float) -> float:
        return MARGIN_LEFT + (plot_w * i / max(n - 1, 1))

    def sy(v: float) -> float:
        return MARGIN_TOP + plot_h * (1.0 - (v - lo) / (hi - lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0f}" '
        f'height="{HEIGHT:.0f}" viewBox="0 0 {WIDTH:.0f} {HEIGHT:.0f}">',
        f'<rect width="{WIDTH:.0f}" height="{HEIGHT:.0f}" fill="white"/>',
    ]
    if lookback is not None and 0 < lookback <= n:
        parts.append(
            f'<rect x="{_fmt(MARGIN_LEFT)}" y="{_fmt(MARGIN_TOP)}" '
            f'width="{_fmt(sx(lookback - 1) - MARGIN_LEFT)}" height="{_fmt(plot_h)}" '
            f'fill="#eceff4"/>'
        )
    parts.append(
        f'<line x1="{_fmt(MARGIN_LEFT)}" y1="{_fmt(MARGIN_TOP + plot_h)}" '
        f'x2="{_fmt(MARGIN_LEFT + plot_w)}" y2="{_fmt(MARGIN_TOP + plot_h)}" '
        f'stroke="#444" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{_fmt(MARGIN_LEFT)}" y1="{_fmt(MARGIN_TOP)}" '
        f'x2="{_fmt(MARGIN_LEFT)}" y2="{_fmt(MARGIN_TOP + plot_h)}" '
        f'stroke="#444" stroke-width="1"/>'
    )
    parts.append(
        f'<text x="{_fmt(MARGIN_LEFT - 6)}" y="{_fmt(sy(hi) + 4)}" '
        f'text-anchor="end" font-size="11" font-family="monospace">{hi:.3g}</text>'
    )
    parts.append(
        f'<text x="{_fmt(MARGIN_LEFT - 6)}" y="{_fmt(sy(lo) + 4)}" '
        f'text-anchor="end" font-size="11" font-family="monospace">{lo:.3g}</text>'
    )
    if title:
        parts.append(
            f'<text x="{_fmt(WIDTH / 2)}" y="18" text-anchor="middle" '
            f'font-size="13" font-family="monospace">{title}</text>'
        )
    for idx, (name, arr) in enumerate(arrays.items()):
        color = PALETTE[idx % len(PALETTE)]
        points = " ".join(f"{_fmt(sx(i))},{_fmt(sy(v))}" for i, v in enumerate(arr))
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'points="{points}"/>'
        )
        parts.append(
            f'<text x="{_fmt(MARGIN_LEFT + 8 + 130 * idx)}" y="{_fmt(HEIGHT - 10)}" '
            f'font-size="11" font-family="monospace" fill="{color}">{name}</text>'
        )
    parts.append("</svg>")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts) + "\n")
    return path
