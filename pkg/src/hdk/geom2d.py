"""Small 2-D polygon helpers on the horizontal (x, z) plane.

Polygons are (N, 2) float arrays of corners in traversal order, camera
at the origin.  These routines back annotation validation and visible-
boundary sampling; they are deliberately plain numpy.
"""

from __future__ import annotations

import numpy as np

from .errors import GeometryError


def signed_area(corners: np.ndarray) -> float:
    """Shoelace signed area; sign encodes the traversal direction."""
    x = corners[:, 0]
    z = corners[:, 1]
    return 0.5 * float(np.sum(x * np.roll(z, -1) - np.roll(x, -1) * z))


def cross2(ax, az, bx, bz):
    """2-D cross product a x b on (x, z) coordinates."""
    return ax * bz - az * bx


def point_strictly_inside(corners: np.ndarray, px: float, pz: float, margin: float = 0.0) -> bool:
    """Crossing-number test; points on (or within ``margin`` of) an edge fail."""
    a = corners
    b = np.roll(corners, -1, axis=0)
    # distance from the point to each edge segment
    ex, ez = b[:, 0] - a[:, 0], b[:, 1] - a[:, 1]
    wx, wz = px - a[:, 0], pz - a[:, 1]
    seg_len2 = ex * ex + ez * ez
    t = np.clip((wx * ex + wz * ez) / np.where(seg_len2 == 0, 1.0, seg_len2), 0.0, 1.0)
    dx, dz = wx - t * ex, wz - t * ez
    if np.min(dx * dx + dz * dz) <= margin * margin:
        return False
    inside = False
    for (ax, az), (bx, bz) in zip(a, b):
        if (az > pz) != (bz > pz):
            xs = ax + (pz - az) * (bx - ax) / (bz - az)
            if px < xs:
                inside = not inside
    return inside


def _proper_cross(p1, p2, p3, p4) -> bool:
    """True if open segments p1p2 and p3p4 properly intersect."""
    d1 = cross2(p2[0] - p1[0], p2[1] - p1[1], p3[0] - p1[0], p3[1] - p1[1])
    d2 = cross2(p2[0] - p1[0], p2[1] - p1[1], p4[0] - p1[0], p4[1] - p1[1])
    d3 = cross2(p4[0] - p3[0], p4[1] - p3[1], p1[0] - p3[0], p1[1] - p3[1])
    d4 = cross2(p4[0] - p3[0], p4[1] - p3[1], p2[0] - p3[0], p2[1] - p3[1])
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def is_simple_polygon(corners: np.ndarray) -> bool:
    """O(N^2) check that no two non-adjacent edges cross or touch."""
    n = len(corners)
    if n < 3:
        return False
    if np.min(np.hypot(*(np.roll(corners, -1, axis=0) - corners).T)) == 0.0:
        return False
    edges = [(corners[i], corners[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            adjacent = j == i + 1 or (i == 0 and j == n - 1)
            if adjacent:
                continue
            if _proper_cross(*edges[i], *edges[j]):
                return False
            # touching (collinear overlap or T-contact) also disqualifies
            for p in edges[j]:
                if _on_segment(edges[i][0], edges[i][1], p):
                    return False
            for p in edges[i]:
                if _on_segment(edges[j][0], edges[j][1], p):
                    return False
    return True


def _on_segment(a, b, p, eps: float = 1e-12) -> bool:
    cr = cross2(b[0] - a[0], b[1] - a[1], p[0] - a[0], p[1] - a[1])
    if abs(cr) > eps:
        return False
    dot = (p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])
    return -eps <= dot <= (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2 + eps


def cast_depths(corners: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """Visible horizontal depth of a polygon along each longitude.

    Casts a ray from the origin along every ``theta`` (direction
    ``(sin theta, cos theta)``) and returns the distance to the nearest
    boundary crossing.  This is what an ideal per-column annotator
    would measure, occlusion included.
    """
    a = corners
    b = np.roll(corners, -1, axis=0)
    ux = np.sin(thetas)[:, None]
    uz = np.cos(thetas)[:, None]
    ex = (b[:, 0] - a[:, 0])[None, :]
    ez = (b[:, 1] - a[:, 1])[None, :]
    ax = a[None, :, 0]
    az = a[None, :, 1]

    denom = cross2(ux, uz, ex, ez)
    safe = np.where(np.abs(denom) < 1e-15, np.nan, denom)
    t = cross2(ax, az, ex, ez) / safe          # distance along the ray
    s = cross2(ax, az, ux, uz) / safe          # position along the edge
    valid = (t > 1e-12) & (s >= 0.0) & (s <= 1.0) & np.isfinite(t)
    t = np.where(valid, t, np.inf)
    depths = np.min(t, axis=1)
    if not np.all(np.isfinite(depths)):
        j = int(np.argmax(~np.isfinite(depths)))
        raise GeometryError(
            f"polygon does not enclose the origin at longitude {thetas[j]:.6f}"
        )
    return depths
