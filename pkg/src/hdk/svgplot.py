"""Hand-rolled SVG plots: floor plan on the left, depth profile on the right.

String templating keeps the output byte-deterministic; no plotting
dependency is worth that trade for two small diagnostic panels.
"""

from __future__ import annotations

import math

import numpy as np

PANEL = 360.0
MARGIN = 30.0


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def _polyline(xs, ys) -> str:
    return " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))


def render_summary(
    floor_xz: np.ndarray,
    thetas: np.ndarray,
    depths: np.ndarray,
    config_hash: str = "",
) -> str:
    """SVG with the floor polygon and the depth-vs-longitude curve."""
    width = 2 * PANEL + 3 * MARGIN
    height = PANEL + 2 * MARGIN
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" '
        f'height="{height:g}" viewBox="0 0 {width:g} {height:g}">',
    ]
    if config_hash:
        parts.append(f"<!-- config_hash: {config_hash} -->")
    parts.append(f'<rect width="{width:g}" height="{height:g}" fill="white"/>')

    # floor plan: fit the polygon into the left panel, camera marked
    span = float(np.max(np.abs(floor_xz))) or 1.0
    scale = (PANEL / 2 - 10) / span
    cx = MARGIN + PANEL / 2
    cy = MARGIN + PANEL / 2
    px = cx + floor_xz[:, 0] * scale
    py = cy - floor_xz[:, 1] * scale
    closed_x = np.append(px, px[0])
    closed_y = np.append(py, py[0])
    parts.append(
        f'<polyline points="{_polyline(closed_x, closed_y)}" fill="none" '
        'stroke="black" stroke-width="1.5"/>'
    )
    parts.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="3" fill="red"/>')
    parts.append(
        f'<text x="{_fmt(MARGIN)}" y="{_fmt(MARGIN - 10)}" font-size="12">'
        "floor plan (x right, z up)</text>"
    )

    # depth profile over longitude
    left = 2 * MARGIN + PANEL
    dmax = float(np.max(depths))
    gx = left + (thetas + math.pi) / (2 * math.pi) * PANEL
    gy = MARGIN + PANEL - depths / dmax * (PANEL - 20)
    parts.append(
        f'<rect x="{_fmt(left)}" y="{_fmt(MARGIN)}" width="{PANEL:g}" '
        f'height="{PANEL:g}" fill="none" stroke="gray" stroke-width="0.5"/>'
    )
    parts.append(
        f'<polyline points="{_polyline(gx, gy)}" fill="none" '
        'stroke="steelblue" stroke-width="1"/>'
    )
    parts.append(
        f'<text x="{_fmt(left)}" y="{_fmt(MARGIN - 10)}" font-size="12">'
        f"horizon depth vs longitude (max {dmax:.3f} m)</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
