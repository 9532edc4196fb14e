"""Room-layout types and the boundary/plane constructions built on them.

A room is annotated as a floor polygon on the horizontal plane with the
camera at the origin.  From the camera's point of view the same room is
a pair of boundary curves (floor and ceiling) on the panorama sphere;
the ops here convert between the two views and recover the vertical
wall planes that the depth renderer consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geom2d
from .errors import DomainError, FormatError, GeometryError
from .sphere import SphericalPoint, unit_vectors

DEFAULT_CAMERA_HEIGHT = 1.6

FLOOR = "floor"
CEILING = "ceiling"

Y_HAT = np.array([0.0, 1.0, 0.0])

# Latitudes closer to the horizon than this cannot be lifted onto a
# horizontal plane without blowing up.
MIN_LIFT_LATITUDE = 1e-9


@dataclass(frozen=True)
class BoundaryPointSet:
    """Boundary samples of one surface, ordered by ascending longitude.

    Floor latitudes are positive (the floor lies toward +y), ceiling
    latitudes negative.  At least 3 points are admitted; whether they
    describe a plausible Manhattan room is a separate validation step.
    """

    surface: str
    thetas: np.ndarray
    phis: np.ndarray

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=float)
        phis = np.asarray(self.phis, dtype=float)
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "phis", phis)
        if self.surface not in (FLOOR, CEILING):
            raise DomainError(f"unknown surface {self.surface!r}")
        if thetas.ndim != 1 or thetas.shape != phis.shape:
            raise DomainError("thetas and phis must be matching 1-D arrays")
        if len(thetas) < 3:
            raise DomainError(f"need at least 3 boundary points, got {len(thetas)}")
        if not (np.all(np.isfinite(thetas)) and np.all(np.isfinite(phis))):
            raise DomainError("boundary angles must be finite")
        if np.any(thetas < -math.pi) or np.any(thetas >= math.pi):
            raise DomainError("longitudes must lie in [-pi, pi)")
        if np.any(np.diff(thetas) <= 0):
            raise DomainError("longitudes must be strictly ascending")
        if np.any(np.abs(phis) >= math.pi / 2):
            raise DomainError("latitudes must lie strictly inside (-pi/2, pi/2)")
        if self.surface == FLOOR and np.any(phis <= 0):
            raise DomainError("floor latitudes must be positive")
        if self.surface == CEILING and np.any(phis >= 0):
            raise DomainError("ceiling latitudes must be negative")
        thetas.setflags(write=False)
        phis.setflags(write=False)

    def __len__(self) -> int:
        return len(self.thetas)

    @property
    def points(self) -> tuple[SphericalPoint, ...]:
        return tuple(SphericalPoint(t, p) for t, p in zip(self.thetas, self.phis))


@dataclass(frozen=True)
class BoundaryPair:
    """Floor and ceiling boundaries sampled at identical longitudes."""

    floor: BoundaryPointSet
    ceiling: BoundaryPointSet

    def __post_init__(self):
        if self.floor.surface != FLOOR or self.ceiling.surface != CEILING:
            raise DomainError("pair must hold a floor set and a ceiling set")
        if len(self.floor) != len(self.ceiling):
            raise DomainError("floor and ceiling must have the same point count")
        if not np.array_equal(self.floor.thetas, self.ceiling.thetas):
            raise DomainError("floor and ceiling longitudes must match exactly")

    def __len__(self) -> int:
        return len(self.floor)


@dataclass(frozen=True)
class WallPlane:
    """A vertical wall plane with its longitude span.

    The plane satisfies ``dot(normal, p) + offset = 0``.  The span
    [theta_lo, theta_hi) is half-open; for the wall crossing the seam
    theta_hi exceeds +pi and comparisons wrap accordingly.
    """

    normal: np.ndarray
    offset: float
    theta_lo: float
    theta_hi: float

    def __post_init__(self):
        normal = np.asarray(self.normal, dtype=float)
        object.__setattr__(self, "normal", normal)
        if abs(normal[1]) > 1e-12:
            raise GeometryError("wall normals must be horizontal")
        if not self.theta_hi > self.theta_lo:
            raise GeometryError("wall span must have positive width")
        normal.setflags(write=False)

    def contains_longitude(self, theta: float) -> bool:
        return (theta - self.theta_lo) % (2 * math.pi) < self.theta_hi - self.theta_lo


@dataclass(frozen=True)
class ManhattanReport:
    """Per-wall deviation of an annotation from the coordinate axes."""

    deviations: np.ndarray
    max_deviation: float
    tolerance: float
    passed: bool


@dataclass(frozen=True)
class LayoutAnnotation:
    """A room as a floor polygon around the camera.

    Corners are (x, z) floor coordinates in meters with the camera at
    the origin; the stored winding follows ascending longitude as seen
    from the camera (negative shoelace area on (x, z)).  ``ceiling_ratio``
    is ceiling height over camera height.
    """

    corners_xz: np.ndarray
    camera_height: float = DEFAULT_CAMERA_HEIGHT
    ceiling_ratio: float = 1.0

    def __post_init__(self):
        corners = np.asarray(self.corners_xz, dtype=float)
        if corners.ndim != 2 or corners.shape[1] != 2 or len(corners) < 4:
            raise DomainError("corners_xz must be an (N, 2) array with N >= 4")
        if not np.all(np.isfinite(corners)):
            raise DomainError("corners must be finite")
        if not (self.camera_height > 0 and math.isfinite(self.camera_height)):
            raise DomainError(f"camera_height must be positive, got {self.camera_height}")
        if not (self.ceiling_ratio > 0 and math.isfinite(self.ceiling_ratio)):
            raise DomainError(f"ceiling_ratio must be positive, got {self.ceiling_ratio}")
        if not geom2d.is_simple_polygon(corners):
            raise DomainError("corner polygon must be simple")
        if not geom2d.point_strictly_inside(corners, 0.0, 0.0, margin=1e-12):
            raise DomainError("camera (origin) must be strictly inside the polygon")
        if geom2d.signed_area(corners) > 0:
            corners = corners[::-1].copy()
        object.__setattr__(self, "corners_xz", corners)
        corners.setflags(write=False)

    def __len__(self) -> int:
        return len(self.corners_xz)

    @classmethod
    def from_json(cls, payload: dict) -> "LayoutAnnotation":
        """Build from a parsed JSON object (corner or pixel schema)."""
        if not isinstance(payload, dict):
            raise FormatError("annotation payload must be a JSON object")
        height = payload.get("camera_height", DEFAULT_CAMERA_HEIGHT)
        ratio = payload.get("ceiling_ratio", 1.0)
        if not isinstance(height, (int, float)) or not isinstance(ratio, (int, float)):
            raise FormatError("camera_height and ceiling_ratio must be numbers")
        if "corners_xz" in payload:
            corners = _corner_array(payload["corners_xz"], "corners_xz")
        elif "corners_pixels" in payload:
            corners = _corners_from_pixels(payload, float(height))
        else:
            raise FormatError("annotation needs either corners_xz or corners_pixels")
        return cls(corners, float(height), float(ratio))

    def to_json(self) -> dict:
        return {
            "corners_xz": [[float(x), float(z)] for x, z in self.corners_xz],
            "camera_height": float(self.camera_height),
            "ceiling_ratio": float(self.ceiling_ratio),
        }


def _corner_array(raw, name: str) -> np.ndarray:
    try:
        corners = np.asarray(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{name} must be a list of 2-value rows") from exc
    if corners.ndim != 2 or corners.shape[1] != 2:
        raise FormatError(f"{name} must be a list of 2-value rows")
    return corners


def _corners_from_pixels(payload: dict, camera_height: float) -> np.ndarray:
    from .sphere import pixel_to_spherical

    for key in ("image_width", "image_height"):
        if key not in payload:
            raise FormatError(f"pixel annotations require {key}")
    width, height = payload["image_width"], payload["image_height"]
    pixels = _corner_array(payload["corners_pixels"], "corners_pixels")
    corners = np.empty_like(pixels)
    for i, (px, py) in enumerate(pixels):
        q = pixel_to_spherical(float(px), float(py), int(width), int(height))
        if q.phi <= 0:
            raise DomainError(
                f"pixel corner {i} has latitude {q.phi:.6f}; floor corners need phi > 0"
            )
        rho = camera_height / math.tan(q.phi)
        corners[i] = (rho * math.sin(q.theta), rho * math.cos(q.theta))
    return corners


def boundary_pair_to_json(
    pair: BoundaryPair,
    camera_height: float | None = None,
    ceiling_ratio: float | None = None,
) -> dict:
    """JSON object for a boundary pair: shared longitudes, two latitude rows."""
    out = {
        "thetas": [float(t) for t in pair.floor.thetas],
        "floor_phis": [float(p) for p in pair.floor.phis],
        "ceiling_phis": [float(p) for p in pair.ceiling.phis],
    }
    if camera_height is not None:
        out["camera_height"] = float(camera_height)
    if ceiling_ratio is not None:
        out["ceiling_ratio"] = float(ceiling_ratio)
    return out


def boundary_pair_from_json(payload: dict) -> tuple[BoundaryPair, float, float]:
    """Parse a boundary-pair object; returns (pair, camera_height, ratio).

    ``camera_height`` defaults to 1.6 m and ``ceiling_ratio`` to 1.0
    when the file omits them.
    """
    if not isinstance(payload, dict):
        raise FormatError("boundary payload must be a JSON object")
    arrays = {}
    for key in ("thetas", "floor_phis", "ceiling_phis"):
        raw = payload.get(key)
        if not isinstance(raw, list):
            raise FormatError(f"boundary payload needs a list under {key!r}")
        try:
            arrays[key] = np.asarray(raw, dtype=float)
        except (TypeError, ValueError) as exc:
            raise FormatError(f"{key} must hold numbers") from exc
    height = payload.get("camera_height", DEFAULT_CAMERA_HEIGHT)
    ratio = payload.get("ceiling_ratio", 1.0)
    for name, value in (("camera_height", height), ("ceiling_ratio", ratio)):
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise FormatError(f"{name} must be a number")
    pair = BoundaryPair(
        floor=BoundaryPointSet(FLOOR, arrays["thetas"], arrays["floor_phis"]),
        ceiling=BoundaryPointSet(
            CEILING, arrays["thetas"].copy(), arrays["ceiling_phis"]
        ),
    )
    return pair, float(height), float(ratio)


def annotation_to_boundaries(a: LayoutAnnotation) -> BoundaryPair:
    """Project annotation corners onto the sphere as a boundary pair.

    Each corner (x, z) yields one floor point (the direction of
    (x, camera_height, z)) and one ceiling point at the same longitude;
    the output is sorted by ascending longitude.
    """
    x = a.corners_xz[:, 0]
    z = a.corners_xz[:, 1]
    thetas = np.arctan2(x, z)
    thetas[thetas == math.pi] = -math.pi

    order = np.argsort(thetas, kind="stable")
    thetas = thetas[order]
    xs, zs = x[order], z[order]

    gaps = np.diff(thetas)
    wrap_gap = thetas[0] + 2 * math.pi - thetas[-1]
    if np.any(gaps < 1e-12) or wrap_gap < 1e-12:
        raise DomainError("two corners share a longitude; boundary is degenerate")

    # Work in camera-height units: u, v depend only on the room's shape, so
    # uniform rescaling of corners and camera height cannot perturb the
    # latitudes as long as the scaled inputs are exactly representable.
    u = xs / a.camera_height
    v = zs / a.camera_height
    r = a.ceiling_ratio
    floor_phis = np.arcsin(1.0 / np.sqrt(u * u + 1.0 + v * v))
    ceil_phis = -np.arcsin(r / np.sqrt(u * u + r * r + v * v))
    return BoundaryPair(
        floor=BoundaryPointSet(FLOOR, thetas, floor_phis),
        ceiling=BoundaryPointSet(CEILING, thetas.copy(), ceil_phis),
    )


def densify_boundaries(a: LayoutAnnotation, count: int) -> BoundaryPair:
    """Sample the visible boundary at ``count`` equiangular longitudes.

    Unlike :func:`annotation_to_boundaries`, which keeps one point per
    corner, this casts a ray per longitude against the floor polygon and
    keeps the nearest crossing, so rooms whose far walls are partially
    occluded still produce a faithful per-longitude depth profile.
    """
    if count < 4:
        raise DomainError(f"need at least 4 samples, got {count}")
    thetas = -math.pi + 2 * math.pi * np.arange(count) / count
    rho = geom2d.cast_depths(a.corners_xz, thetas)
    floor_phis = np.arctan2(a.camera_height, rho)
    ceil_phis = -np.arctan2(a.camera_height * a.ceiling_ratio, rho)
    return BoundaryPair(
        floor=BoundaryPointSet(FLOOR, thetas, floor_phis),
        ceiling=BoundaryPointSet(CEILING, thetas.copy(), ceil_phis),
    )


def lift_to_plane(
    points: BoundaryPointSet,
    camera_height: float = DEFAULT_CAMERA_HEIGHT,
    ceiling_ratio: float = 1.0,
) -> np.ndarray:
    """Lift boundary directions onto their horizontal plane.

    Floor points land on y = +camera_height, ceiling points on
    y = -camera_height * ceiling_ratio.  Returns an (N, 3) array.
    """
    if camera_height <= 0 or ceiling_ratio <= 0:
        raise DomainError("camera_height and ceiling_ratio must be positive")
    units = unit_vectors(points.thetas, points.phis)
    py = units[:, 1]
    if np.any(np.abs(py) < MIN_LIFT_LATITUDE):
        raise GeometryError("boundary point too close to the horizon to lift")
    if points.surface == FLOOR:
        scale = camera_height / py
    else:
        scale = -camera_height * ceiling_ratio / py
    return units * scale[:, None]


def recover_wall_planes(lifted: np.ndarray, thetas: np.ndarray) -> list[WallPlane]:
    """Vertical wall planes between consecutive lifted boundary points.

    Wall i joins point i to point i+1 and spans [theta_i, theta_i+1);
    the final wall wraps from the last point back to the first across
    the longitude seam.
    """
    lifted = np.asarray(lifted, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    n = len(lifted)
    if n < 3 or len(thetas) != n:
        raise DomainError("need matching lifted points and longitudes, N >= 3")
    nxt = np.roll(lifted, -1, axis=0)
    edges = nxt - lifted
    if np.any(np.hypot(edges[:, 0], edges[:, 2]) < 1e-9):
        raise GeometryError("consecutive boundary points coincide; wall is degenerate")
    normals = np.column_stack([edges[:, 2], np.zeros(n), -edges[:, 0]])
    offsets = -np.einsum("ij,ij->i", normals, lifted)
    walls = []
    for i in range(n):
        hi = thetas[(i + 1) % n] if i + 1 < n else thetas[0] + 2 * math.pi
        walls.append(WallPlane(normals[i], float(offsets[i]), float(thetas[i]), float(hi)))
    return walls


def validate_manhattan(a: LayoutAnnotation, tol: float) -> ManhattanReport:
    """Check every wall segment against the two coordinate axes.

    ``tol`` is the allowed angular deviation in radians from the nearer
    of the x/z directions.
    """
    edges = np.roll(a.corners_xz, -1, axis=0) - a.corners_xz
    angles = np.arctan2(edges[:, 0], edges[:, 1])
    deviations = np.abs((angles + math.pi / 4) % (math.pi / 2) - math.pi / 4)
    max_dev = float(np.max(deviations))
    return ManhattanReport(
        deviations=deviations,
        max_deviation=max_dev,
        tolerance=float(tol),
        passed=bool(max_dev <= tol),
    )
