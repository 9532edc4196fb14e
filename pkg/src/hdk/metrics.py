"""Layout comparison metrics: 2-D and 3-D IoU with corner-count buckets.

Polygon clipping is delegated to shapely (GEOS); the 3-D figure treats
each room as a prism whose floor planes coincide, so vertical overlap
is the smaller of the two height spans.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from shapely.geometry import Polygon

from .errors import GeometryError
from .layout import LayoutAnnotation

BUCKETS = ("4", "6", "8", "10+")


@dataclass(frozen=True)
class IoUReport:
    """Intersection-over-union of one predicted layout against one truth."""

    iou_2d: float
    iou_3d: float
    corner_count_bucket: str


@dataclass(frozen=True)
class EvalTable:
    """Mean IoU per ground-truth corner-count bucket, plus overall."""

    counts: dict
    mean_iou_2d: dict
    mean_iou_3d: dict

    def to_json(self) -> dict:
        rows = {}
        for key in ("overall",) + BUCKETS:
            rows[key] = {
                "count": self.counts.get(key, 0),
                "iou_2d": self.mean_iou_2d.get(key),
                "iou_3d": self.mean_iou_3d.get(key),
            }
        return rows

    def format_text(self) -> str:
        """Aligned columns, one bucket per column as in the usual tables."""
        headers = ["", "overall"] + [f"{b} corners" for b in BUCKETS]
        rows = [
            ["count"] + [str(self.counts.get(k, 0)) for k in ("overall",) + BUCKETS],
            ["2D IoU"] + [_cell(self.mean_iou_2d.get(k)) for k in ("overall",) + BUCKETS],
            ["3D IoU"] + [_cell(self.mean_iou_3d.get(k)) for k in ("overall",) + BUCKETS],
        ]
        widths = [
            max(len(headers[c]), *(len(r[c]) for r in rows))
            for c in range(len(headers))
        ]
        lines = ["  ".join(h.rjust(w) for h, w in zip(headers, widths))]
        for row in rows:
            lines.append("  ".join(v.rjust(w) for v, w in zip(row, widths)))
        return "\n".join(lines)


def _cell(value) -> str:
    return "-" if value is None else f"{value:.4f}"


def _polygon(corners: np.ndarray) -> Polygon:
    poly = Polygon(corners)
    if not poly.is_valid:
        raise GeometryError("polygon is self-intersecting or otherwise invalid")
    if poly.area < 1e-12:
        raise GeometryError("polygon area is degenerate")
    return poly


def polygon_intersection_area(a: np.ndarray, b: np.ndarray) -> float:
    """Exact area of the intersection of two simple polygons."""
    return float(_polygon(a).intersection(_polygon(b)).area)


def corner_bucket(n: int) -> str:
    if n <= 4:
        return "4"
    if n <= 6:
        return "6"
    if n <= 8:
        return "8"
    return "10+"


def layout_iou(pred: LayoutAnnotation, gt: LayoutAnnotation) -> IoUReport:
    """2-D floor IoU and floor-aligned prism IoU of two annotations."""
    pa = _polygon(pred.corners_xz)
    ga = _polygon(gt.corners_xz)
    inter = float(pa.intersection(ga).area)
    union = pa.area + ga.area - inter
    iou_2d = inter / union

    span_p = pred.camera_height * (1.0 + pred.ceiling_ratio)
    span_g = gt.camera_height * (1.0 + gt.ceiling_ratio)
    v_inter = inter * min(span_p, span_g)
    v_union = pa.area * span_p + ga.area * span_g - v_inter
    return IoUReport(
        iou_2d=iou_2d,
        iou_3d=v_inter / v_union,
        corner_count_bucket=corner_bucket(len(gt)),
    )


def bucket_by_corners(reports: list[IoUReport]) -> EvalTable:
    """Aggregate per-sample reports into bucket means."""
    counts: dict = {}
    sums_2d: dict = {}
    sums_3d: dict = {}
    for report in reports:
        for key in ("overall", report.corner_count_bucket):
            counts[key] = counts.get(key, 0) + 1
            sums_2d[key] = sums_2d.get(key, 0.0) + report.iou_2d
            sums_3d[key] = sums_3d.get(key, 0.0) + report.iou_3d
    means_2d = {k: sums_2d[k] / counts[k] for k in counts}
    means_3d = {k: sums_3d[k] / counts[k] for k in counts}
    return EvalTable(counts=counts, mean_iou_2d=means_2d, mean_iou_3d=means_3d)
