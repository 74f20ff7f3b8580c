"""Plain SVG output: 2-D scatter plots and metric curves."""

from __future__ import annotations

from typing import Dict, List, Optional, Sequence

import numpy as np

SIZE = 640
AXIS_RANGE = 1.1
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


class PlotError(ValueError):
    pass


def _px(v: float) -> str:
    return f"{v:.2f}"


def _header(width: int, height: int) -> List[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]


def scatter_svg(points: np.ndarray, labels: Optional[Sequence[int]] = None) -> str:
    """640x640 scatter over [-1.1, 1.1]^2, one colour per label."""
    points = np.asarray(points, dtype=np.float64)
    if points.size == 0:
        points = points.reshape(0, 2)
    if points.ndim != 2 or points.shape[1] != 2:
        raise PlotError(f"scatter needs 2-D points, got shape {points.shape}; "
                        "use `sample --project` to project onto two axes")
    if labels is None:
        labels = np.zeros(len(points), dtype=int)
    labels = np.asarray(labels, dtype=int)

    def to_px(x, y):
        sx = (x + AXIS_RANGE) / (2 * AXIS_RANGE) * SIZE
        sy = (AXIS_RANGE - y) / (2 * AXIS_RANGE) * SIZE
        return sx, sy

    out = _header(SIZE, SIZE)
    cx, cy = to_px(0.0, 0.0)
    out.append(f'<line x1="0" y1="{_px(cy)}" x2="{SIZE}" y2="{_px(cy)}" stroke="#bbbbbb"/>')
    out.append(f'<line x1="{_px(cx)}" y1="0" x2="{_px(cx)}" y2="{SIZE}" stroke="#bbbbbb"/>')
    for (x, y), lab in zip(points, labels):
        sx, sy = to_px(x, y)
        colour = PALETTE[lab % len(PALETTE)]
        out.append(f'<circle cx="{_px(sx)}" cy="{_px(sy)}" r="2" fill="{colour}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_scatter(points: np.ndarray, labels, path) -> None:
    text = scatter_svg(points, labels)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def curves_svg(series: Dict[str, Sequence[float]], x: Sequence[float],
               width: int = 800, height: int = 480) -> str:
    """One polyline per series, each min-max scaled into the plot box."""
    pad = 40
    out = _header(width, height)
    x = np.asarray(x, dtype=np.float64)
    x_lo, x_hi = (x.min(), x.max()) if len(x) else (0.0, 1.0)
    x_span = (x_hi - x_lo) or 1.0
    for i, (name, values) in enumerate(series.items()):
        values = np.asarray(values, dtype=np.float64)
        lo, hi = (values.min(), values.max()) if len(values) else (0.0, 1.0)
        span = (hi - lo) or 1.0
        pts = " ".join(
            f"{_px(pad + (xi - x_lo) / x_span * (width - 2 * pad))},"
            f"{_px(height - pad - (v - lo) / span * (height - 2 * pad))}"
            for xi, v in zip(x, values))
        colour = PALETTE[i % len(PALETTE)]
        out.append(f'<polyline data-metric="{name}" fill="none" stroke="{colour}" points="{pts}"/>')
        out.append(f'<text x="{pad + 10}" y="{20 + 14 * i}" font-size="12" fill="{colour}">'
                   f'{name} [{lo:.4g}, {hi:.4g}]</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
