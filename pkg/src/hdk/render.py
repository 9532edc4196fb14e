"""Horizon-depth rendering of wall planes, with analytic derivatives.

Every zero-latitude ray is intersected with each wall plane; candidates
behind the camera, outside the wall's longitude span, or parallel to
the wall are discarded, and the nearest survivor wins (nearer walls
occlude farther ones).  Because the winning depth is an explicit
function of the generating boundary angles, its Jacobian is available
in closed form, holding each ray's active wall fixed.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix

from .errors import (
    DomainError,
    FormatError,
    GeometryError,
    OpenLayoutError,
    StaleTraceError,
)
from .layout import BoundaryPair, WallPlane, lift_to_plane
from .sphere import RayFan, make_ray_fan

# Candidates whose |ray . normal| falls below this are treated as
# parallel; depth ties within it resolve to the lower wall index.
PARALLEL_EPS = 1e-12
TIE_EPS = 1e-12


@dataclass(frozen=True)
class HorizonDepthMap:
    """Per-ray horizontal distances to the nearest wall."""

    fan: RayFan
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (self.fan.count,):
            raise DomainError("depth count must match the ray fan")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise DomainError("depths must be positive and finite")
        values.setflags(write=False)

    def to_json(self) -> dict:
        return {"m": self.fan.count, "values": [float(v) for v in self.values]}

    @classmethod
    def from_json(cls, payload: dict) -> "HorizonDepthMap":
        if not isinstance(payload, dict):
            raise FormatError("depth payload must be a JSON object")
        m = payload.get("m")
        values = payload.get("values")
        if not isinstance(m, int) or isinstance(m, bool):
            raise FormatError("depth payload needs an integer 'm'")
        if not isinstance(values, list) or len(values) != m:
            raise FormatError(f"depth payload needs exactly m={m} values")
        try:
            arr = np.asarray(values, dtype=float)
        except (TypeError, ValueError) as exc:
            raise FormatError("depth values must be numbers") from exc
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise FormatError("depth values must be positive and finite")
        return cls(make_ray_fan(m), arr)


@dataclass(frozen=True)
class RenderTrace:
    """Which wall produced each rendered depth, for later derivatives."""

    active_wall: np.ndarray
    candidate_count: np.ndarray
    active_depth: np.ndarray
    input_key: str

    def __post_init__(self):
        for name in ("active_wall", "candidate_count", "active_depth"):
            getattr(self, name).setflags(write=False)


@dataclass(frozen=True)
class DepthJacobian:
    """Sparse M x 2N derivative of rendered depths.

    Column i is d(depth)/d(phi_i); column N + i is d(depth)/d(theta_i).
    Each row has at most four non-zeros (the two corners generating the
    ray's active wall).
    """

    matrix: csr_matrix
    n_points: int

    @property
    def d_phi(self) -> csr_matrix:
        return self.matrix[:, : self.n_points]

    @property
    def d_theta(self) -> csr_matrix:
        return self.matrix[:, self.n_points :]


@dataclass(frozen=True)
class LossGradient:
    """L1-loss gradient over boundary angles, one block per surface."""

    floor_phi: np.ndarray
    ceiling_phi: np.ndarray
    floor_theta: np.ndarray | None = None
    ceiling_theta: np.ndarray | None = None


def pair_input_key(
    pair: BoundaryPair, camera_height: float, ceiling_ratio: float, fan: RayFan
) -> str:
    """Hash identifying one (pair, camera, fan) render configuration."""
    digest = hashlib.blake2b(digest_size=16)
    for arr in (pair.floor.thetas, pair.floor.phis, pair.ceiling.phis):
        digest.update(np.ascontiguousarray(arr).tobytes())
    digest.update(np.float64(camera_height).tobytes())
    digest.update(np.float64(ceiling_ratio).tobytes())
    digest.update(fan.count.to_bytes(8, "little"))
    return digest.hexdigest()


def candidate_depth(ray_direction: np.ndarray, wall: WallPlane) -> float | None:
    """Depth of one ray against one wall, or None when filtered out.

    A candidate survives if the ray is not parallel to the plane, the
    hit lies at non-negative depth, and the ray's longitude falls in
    the wall's half-open span.
    """
    u = np.asarray(ray_direction, dtype=float)
    dot = float(u @ wall.normal)
    if abs(dot) < PARALLEL_EPS:
        return None
    d = -wall.offset / dot
    if d < 0:
        return None
    theta = math.atan2(u[0], u[2])
    if not wall.contains_longitude(theta):
        return None
    return d


def _wall_arrays(lifted: np.ndarray, thetas: np.ndarray):
    """Wall-plane normals/offsets/spans as flat arrays (hot path)."""
    nxt = np.roll(lifted, -1, axis=0)
    edges = nxt - lifted
    if np.any(np.hypot(edges[:, 0], edges[:, 2]) < 1e-9):
        raise GeometryError("consecutive boundary points coincide; wall is degenerate")
    normals = np.column_stack([edges[:, 2], np.zeros(len(lifted)), -edges[:, 0]])
    offsets = -np.einsum("ij,ij->i", normals, lifted)
    spans_lo = thetas
    spans_hi = np.roll(thetas, -1)
    spans_hi[-1] = thetas[0] + 2.0 * math.pi
    return normals, offsets, spans_lo, spans_hi


# Cap on rays*walls entries materialized at once; larger problems are
# processed in ray blocks (each ray's result is independent, so the
# split cannot change any value).
_BLOCK_ENTRIES = 1 << 22


def _render_arrays(
    normals: np.ndarray,
    offsets: np.ndarray,
    spans_lo: np.ndarray,
    spans_hi: np.ndarray,
    fan: RayFan,
    input_key: str,
):
    m, n_walls = fan.count, len(offsets)
    widths = (spans_hi - spans_lo)[None, :]
    values = np.empty(m)
    active = np.empty(m, dtype=np.int64)
    counts = np.empty(m, dtype=np.int64)
    block = max(1, _BLOCK_ENTRIES // max(1, n_walls))
    for start in range(0, m, block):
        stop = min(m, start + block)
        rays = fan.directions[start:stop]
        # elementwise instead of matmul: keeps results independent of
        # BLAS blocking, so renders are bit-stable across environments
        dots = (
            rays[:, 0:1] * normals[None, :, 0]
            + rays[:, 1:2] * normals[None, :, 1]
            + rays[:, 2:3] * normals[None, :, 2]
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            depth = -offsets[None, :] / dots
        in_span = (
            (fan.thetas[start:stop, None] - spans_lo[None, :]) % (2.0 * math.pi)
        ) < widths
        valid = in_span & (np.abs(dots) >= PARALLEL_EPS) & (depth >= 0.0)
        candidates = np.where(valid, depth, np.inf)
        counts[start:stop] = valid.sum(axis=1)
        best = np.min(candidates, axis=1)
        chosen = np.argmax(candidates <= best[:, None] + TIE_EPS, axis=1)
        active[start:stop] = chosen
        values[start:stop] = candidates[np.arange(stop - start), chosen]

    if np.any(counts == 0):
        j = int(np.argmax(counts == 0))
        raise OpenLayoutError(
            f"no wall candidate at longitude {fan.thetas[j]:.9f} (ray {j})"
        )
    if np.any(values <= 0.0):
        j = int(np.argmax(values <= 0.0))
        raise GeometryError(f"degenerate zero depth at longitude {fan.thetas[j]:.9f}")
    trace = RenderTrace(
        active_wall=active.astype(np.int64),
        candidate_count=counts.astype(np.int64),
        active_depth=values,
        input_key=input_key,
    )
    return HorizonDepthMap(fan, values), trace


def render(walls: list[WallPlane], fan: RayFan) -> tuple[HorizonDepthMap, RenderTrace]:
    """Render a wall list.  Every longitude must be covered by some wall."""
    if len(walls) < 3:
        raise DomainError("need at least 3 walls to enclose the camera")
    normals = np.stack([w.normal for w in walls])
    offsets = np.array([w.offset for w in walls])
    lo = np.array([w.theta_lo for w in walls])
    hi = np.array([w.theta_hi for w in walls])
    digest = hashlib.blake2b(digest_size=16)
    for arr in (normals, offsets, lo, hi):
        digest.update(np.ascontiguousarray(arr).tobytes())
    digest.update(fan.count.to_bytes(8, "little"))
    return _render_arrays(normals, offsets, lo, hi, fan, digest.hexdigest())


def render_pair(
    pair: BoundaryPair,
    camera_height: float,
    ceiling_ratio: float,
    fan: RayFan,
) -> tuple[HorizonDepthMap, HorizonDepthMap, RenderTrace, RenderTrace]:
    """Render floor and ceiling depths for one boundary pair.

    Returns (floor map, ceiling map, floor trace, ceiling trace); the
    traces feed :func:`render_jacobian`.
    """
    key = pair_input_key(pair, camera_height, ceiling_ratio, fan)
    results = []
    for points in (pair.floor, pair.ceiling):
        lifted = lift_to_plane(points, camera_height, ceiling_ratio)
        normals, offsets, lo, hi = _wall_arrays(lifted, points.thetas)
        results.append(_render_arrays(normals, offsets, lo, hi, fan, key))
    (d_f, trace_f), (d_c, trace_c) = results
    return d_f, d_c, trace_f, trace_c


def l1_loss(
    d_f: HorizonDepthMap,
    d_c: HorizonDepthMap,
    d_bar: HorizonDepthMap,
    mean: bool = False,
) -> float:
    """L1 distance of both rendered maps to one reference map.

    Both surfaces are compared against the same reference; with
    ``mean=True`` the total is averaged over all 2M residuals.
    """
    if not (d_f.fan.count == d_c.fan.count == d_bar.fan.count):
        raise DomainError("depth maps must share one ray fan")
    total = float(
        np.sum(np.abs(d_f.values - d_bar.values))
        + np.sum(np.abs(d_c.values - d_bar.values))
    )
    if mean:
        return total / (2 * d_bar.fan.count)
    return total


def _surface_jacobian(
    thetas: np.ndarray,
    phis: np.ndarray,
    plane_scale: float,
    lifted: np.ndarray,
    fan: RayFan,
    trace: RenderTrace,
) -> DepthJacobian:
    """Closed-form d(depth)/d(angles) for one surface.

    With corner positions A, B of the active wall (horizontal x/z
    coordinates) and ray direction U, the depth is
    ``cross(A, B) / (cross(U, B) - cross(U, A))``; the chain rule runs
    through A = scale * cot(phi) * (sin theta, cos theta).
    """
    n = len(thetas)
    m = fan.count
    a = trace.active_wall
    b = (a + 1) % n

    ax, az = lifted[a, 0], lifted[a, 2]
    bx, bz = lifted[b, 0], lifted[b, 2]
    ux, uz = fan.directions[:, 0], fan.directions[:, 2]

    num = ax * bz - az * bx
    den = (ux * bz - uz * bx) - (ux * az - uz * ax)
    den2 = den * den

    dd_ax = (bz * den - num * uz) / den2
    dd_az = (-bx * den + num * ux) / den2
    dd_bx = (-az * den + num * uz) / den2
    dd_bz = (ax * den - num * ux) / den2

    sin_t, cos_t = np.sin(thetas), np.cos(thetas)
    cot = np.cos(phis) / np.sin(phis)
    dradial_dphi = -plane_scale / np.sin(phis) ** 2  # d(scale*cot)/dphi
    radial = plane_scale * cot

    j_phi_a = dd_ax * (dradial_dphi[a] * sin_t[a]) + dd_az * (dradial_dphi[a] * cos_t[a])
    j_phi_b = dd_bx * (dradial_dphi[b] * sin_t[b]) + dd_bz * (dradial_dphi[b] * cos_t[b])
    j_theta_a = dd_ax * (radial[a] * cos_t[a]) + dd_az * (-radial[a] * sin_t[a])
    j_theta_b = dd_bx * (radial[b] * cos_t[b]) + dd_bz * (-radial[b] * sin_t[b])

    rows = np.tile(np.arange(m), 4)
    cols = np.concatenate([a, b, n + a, n + b])
    data = np.concatenate([j_phi_a, j_phi_b, j_theta_a, j_theta_b])
    matrix = csr_matrix((data, (rows, cols)), shape=(m, 2 * n))
    return DepthJacobian(matrix=matrix, n_points=n)


def render_jacobian(
    pair: BoundaryPair,
    camera_height: float,
    ceiling_ratio: float,
    fan: RayFan,
    floor_trace: RenderTrace,
    ceiling_trace: RenderTrace,
) -> tuple[DepthJacobian, DepthJacobian]:
    """Analytic depth Jacobians for both surfaces of a rendered pair.

    The traces must come from :func:`render_pair` on the exact same
    inputs; the active wall per ray is held fixed (a subgradient at
    occlusion switches).
    """
    key = pair_input_key(pair, camera_height, ceiling_ratio, fan)
    for trace in (floor_trace, ceiling_trace):
        if trace.input_key != key:
            raise StaleTraceError("render trace does not match these inputs")
    jacs = []
    for points, trace, scale in (
        (pair.floor, floor_trace, camera_height),
        (pair.ceiling, ceiling_trace, -camera_height * ceiling_ratio),
    ):
        lifted = lift_to_plane(points, camera_height, ceiling_ratio)
        jacs.append(
            _surface_jacobian(points.thetas, points.phis, scale, lifted, fan, trace)
        )
    return jacs[0], jacs[1]


def loss_gradient(
    d_f: HorizonDepthMap,
    d_c: HorizonDepthMap,
    d_bar: HorizonDepthMap,
    jac_f: DepthJacobian,
    jac_c: DepthJacobian,
    include_theta: bool = False,
) -> LossGradient:
    """Gradient of :func:`l1_loss` (sum form) over boundary angles."""
    if not (d_f.fan.count == d_c.fan.count == d_bar.fan.count):
        raise DomainError("depth maps must share one ray fan")
    g_f = jac_f.matrix.T @ np.sign(d_f.values - d_bar.values)
    g_c = jac_c.matrix.T @ np.sign(d_c.values - d_bar.values)
    nf, nc = jac_f.n_points, jac_c.n_points
    return LossGradient(
        floor_phi=g_f[:nf],
        ceiling_phi=g_c[:nc],
        floor_theta=g_f[nf:] if include_theta else None,
        ceiling_theta=g_c[nc:] if include_theta else None,
    )
