"""hdk: horizon-depth geometry toolkit for 360-degree Manhattan room layouts.

Converts corner annotations of equirectangular panoramas into per-column
horizon depth, renders that depth differentiably from boundary latitudes,
and fits/evaluates layouts against reference depth profiles.
"""

from .errors import (
    DomainError,
    FitFailureError,
    FormatError,
    GeometryError,
    HdkError,
    OpenLayoutError,
    SnapFailureError,
    StaleTraceError,
)
from .fit import (
    FitConfig,
    FitResult,
    estimate_ceiling_ratio,
    fit_layout,
    manhattan_snap,
)
from .layout import (
    DEFAULT_CAMERA_HEIGHT,
    BoundaryPair,
    BoundaryPointSet,
    LayoutAnnotation,
    ManhattanReport,
    WallPlane,
    annotation_to_boundaries,
    boundary_pair_from_json,
    boundary_pair_to_json,
    densify_boundaries,
    lift_to_plane,
    recover_wall_planes,
    validate_manhattan,
)
from .metrics import (
    EvalTable,
    IoUReport,
    bucket_by_corners,
    layout_iou,
    polygon_intersection_area,
)
from .render import (
    DepthJacobian,
    HorizonDepthMap,
    LossGradient,
    RenderTrace,
    candidate_depth,
    l1_loss,
    loss_gradient,
    render,
    render_jacobian,
    render_pair,
)
from .sphere import (
    RayFan,
    SphericalPoint,
    cartesian_to_spherical,
    make_ray_fan,
    pixel_to_spherical,
    spherical_to_cartesian,
    unit_vectors,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryPair",
    "BoundaryPointSet",
    "DEFAULT_CAMERA_HEIGHT",
    "DepthJacobian",
    "DomainError",
    "EvalTable",
    "FitConfig",
    "FitFailureError",
    "FitResult",
    "FormatError",
    "GeometryError",
    "HdkError",
    "HorizonDepthMap",
    "IoUReport",
    "LayoutAnnotation",
    "LossGradient",
    "ManhattanReport",
    "OpenLayoutError",
    "RayFan",
    "RenderTrace",
    "SnapFailureError",
    "SphericalPoint",
    "StaleTraceError",
    "WallPlane",
    "annotation_to_boundaries",
    "boundary_pair_from_json",
    "boundary_pair_to_json",
    "bucket_by_corners",
    "candidate_depth",
    "cartesian_to_spherical",
    "densify_boundaries",
    "estimate_ceiling_ratio",
    "fit_layout",
    "l1_loss",
    "layout_iou",
    "lift_to_plane",
    "loss_gradient",
    "make_ray_fan",
    "manhattan_snap",
    "pixel_to_spherical",
    "polygon_intersection_area",
    "recover_wall_planes",
    "render",
    "render_jacobian",
    "render_pair",
    "spherical_to_cartesian",
    "unit_vectors",
    "validate_manhattan",
    "__version__",
]
