"""Minimal self-contained SVG emission for loss curves and 2-D scatter
or decision plots.  No plotting library: the outputs are small, diffable
text files."""

from __future__ import annotations

import numpy as np

from .errors import UnsupportedDimension

# Base colors per class; three-class tasks interpolate these through the
# predicted probabilities, more classes cycle the palette.
PALETTE = np.array(
    [
        [0.85, 0.20, 0.20],
        [0.20, 0.70, 0.25],
        [0.20, 0.35, 0.85],
        [0.85, 0.65, 0.15],
        [0.55, 0.25, 0.75],
        [0.15, 0.70, 0.70],
        [0.90, 0.45, 0.60],
        [0.45, 0.45, 0.45],
        [0.55, 0.40, 0.20],
        [0.10, 0.30, 0.45],
    ]
)


def class_colors(k: int) -> np.ndarray:
    reps = int(np.ceil(k / len(PALETTE)))
    return np.tile(PALETTE, (reps, 1))[:k]


def probs_to_rgb(probs: np.ndarray) -> np.ndarray:
    """Blend class colors by probability weight, rows summing to one."""
    colors = class_colors(probs.shape[1])
    return np.clip(probs @ colors, 0.0, 1.0)


def _hex(rgb) -> str:
    r, g, b = (int(round(255 * float(c))) for c in rgb)
    return f"#{r:02x}{g:02x}{b:02x}"


def _hex_quantized(rgb) -> str:
    """Short 4-bit-per-channel hex; plateaus compress well under
    run-length merging."""
    r, g, b = (int(round(15 * float(c))) for c in rgb)
    return f"#{r:x}{g:x}{b:x}"


def loss_curve_svg(losses, width: int = 640, height: int = 400) -> str:
    """Polyline of per-epoch losses with simple axes and labels."""
    ys = np.asarray(list(losses), dtype=float)
    if ys.size == 0:
        raise ValueError("no losses to plot")
    margin = 50
    w, h = width - 2 * margin, height - 2 * margin
    lo, hi = float(ys.min()), float(ys.max())
    span = hi - lo if hi > lo else 1.0
    xs = np.linspace(0, w, ys.size)
    pts = " ".join(
        f"{margin + x:.2f},{margin + h - (y - lo) / span * h:.2f}"
        for x, y in zip(xs, ys)
    )
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<polyline points="{pts}" fill="none" stroke="#20508c" stroke-width="1.5"/>',
        f'<line x1="{margin}" y1="{margin + h}" x2="{margin + w}" y2="{margin + h}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{margin + h}" stroke="black"/>',
        f'<text x="{margin}" y="{margin - 10}" font-size="12">loss {lo:.6g} .. {hi:.6g}</text>',
        f'<text x="{margin + w - 60}" y="{margin + h + 30}" font-size="12">epoch {ys.size - 1}</text>',
        "</svg>",
    ]
    return "\n".join(parts)


def decision_plot_svg(
    predict_proba_fn,
    points: np.ndarray,
    point_probs: np.ndarray,
    grid: int = 120,
    width: int = 600,
    height: int = 600,
) -> str:
    """Background shaded by predicted probabilities on a grid, boundary
    cells darkened where the arg-max class changes, sample points on top.

    Only two-dimensional features can be drawn.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise UnsupportedDimension(
            f"scatter plot needs 2-D features, got dimension {pts.shape[1] if pts.ndim == 2 else '?'}"
        )
    pad = 0.5
    x0, x1 = pts[:, 0].min() - pad, pts[:, 0].max() + pad
    y0, y1 = pts[:, 1].min() - pad, pts[:, 1].max() + pad
    gx = np.linspace(x0, x1, grid)
    gy = np.linspace(y0, y1, grid)
    xx, yy = np.meshgrid(gx, gy)
    grid_pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
    probs = predict_proba_fn(grid_pts)
    rgb = probs_to_rgb(probs).reshape(grid, grid, 3)
    labels = probs.argmax(axis=1).reshape(grid, grid)
    boundary = np.zeros((grid, grid), dtype=bool)
    boundary[:, 1:] |= labels[:, 1:] != labels[:, :-1]
    boundary[1:, :] |= labels[1:, :] != labels[:-1, :]

    cw = width / grid
    ch = height / grid

    def sx(v):
        return (v - x0) / (x1 - x0) * width

    def sy(v):
        return height - (v - y0) / (y1 - y0) * height

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">'
    ]
    # One rect per horizontal run of equal (quantized) color.
    for iy in range(grid):
        py = height - (iy + 1) * ch
        ix = 0
        while ix < grid:
            color = (
                "#202020" if boundary[iy, ix] else _hex_quantized(rgb[iy, ix] * 0.5 + 0.5)
            )
            run = ix + 1
            while run < grid:
                nxt = (
                    "#202020"
                    if boundary[iy, run]
                    else _hex_quantized(rgb[iy, run] * 0.5 + 0.5)
                )
                if nxt != color:
                    break
                run += 1
            parts.append(
                f'<rect x="{ix * cw:.2f}" y="{py:.2f}" width="{(run - ix) * cw + 0.5:.2f}" '
                f'height="{ch + 0.5:.2f}" fill="{color}"/>'
            )
            ix = run
    point_rgb = probs_to_rgb(np.asarray(point_probs, dtype=float))
    for p, c in zip(pts, point_rgb):
        parts.append(
            f'<circle cx="{sx(p[0]):.2f}" cy="{sy(p[1]):.2f}" r="2.5" '
            f'fill="{_hex(c)}" stroke="black" stroke-width="0.3"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def scatter_svg(points: np.ndarray, point_probs: np.ndarray, width: int = 600, height: int = 600) -> str:
    """Scatter of 2-D points colored by probability blend."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise UnsupportedDimension(
            f"scatter plot needs 2-D features, got dimension {pts.shape[1] if pts.ndim == 2 else '?'}"
        )
    pad = 0.5
    x0, x1 = pts[:, 0].min() - pad, pts[:, 0].max() + pad
    y0, y1 = pts[:, 1].min() - pad, pts[:, 1].max() + pad

    def sx(v):
        return (v - x0) / (x1 - x0) * width

    def sy(v):
        return height - (v - y0) / (y1 - y0) * height

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    point_rgb = probs_to_rgb(np.asarray(point_probs, dtype=float))
    for p, c in zip(pts, point_rgb):
        parts.append(
            f'<circle cx="{sx(p[0]):.2f}" cy="{sy(p[1]):.2f}" r="3" '
            f'fill="{_hex(c)}" stroke="black" stroke-width="0.3"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
