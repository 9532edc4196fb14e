"""Recover a room layout from a single horizon-depth map.

The fit runs plain gradient descent with backtracking on the boundary
latitudes (longitudes stay on the equiangular grid), rendering the
ceiling at unit ceiling ratio: a taller or shorter ceiling at the same
latitudes renders identically, so the ratio acts as a gauge and is
estimated separately once the fit has settled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    FitFailureError,
    FormatError,
    GeometryError,
    OpenLayoutError,
    SnapFailureError,
)
from .layout import (
    CEILING,
    DEFAULT_CAMERA_HEIGHT,
    FLOOR,
    BoundaryPair,
    BoundaryPointSet,
    LayoutAnnotation,
    lift_to_plane,
)
from .render import HorizonDepthMap, l1_loss, loss_gradient, render_jacobian, render_pair
from .sphere import make_ray_fan

MIN_STEP = 1e-12
MAX_LATITUDE = math.pi / 2 - 1e-3
MIN_LATITUDE = 1e-4


@dataclass(frozen=True)
class FitConfig:
    """Descent parameters for :func:`fit_layout`."""

    n_points: int = 256
    m_rays: int = 256
    max_iters: int = 2000
    step_size: float = 0.01
    convergence_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.n_points < 4 or self.m_rays < 4:
            raise DomainError("n_points and m_rays must be at least 4")
        if self.max_iters < 0 or self.step_size <= 0 or self.convergence_tol <= 0:
            raise DomainError("max_iters, step_size, convergence_tol must be positive")

    @classmethod
    def from_json(cls, payload: dict) -> "FitConfig":
        if not isinstance(payload, dict):
            raise FormatError("fit config must be a JSON object")
        known = {"n_points", "m_rays", "max_iters", "step_size", "convergence_tol", "seed"}
        unknown = set(payload) - known
        if unknown:
            raise FormatError(f"unknown fit config keys: {sorted(unknown)}")
        try:
            return cls(**payload)
        except TypeError as exc:
            raise FormatError(f"bad fit config: {exc}") from exc

    def to_json(self) -> dict:
        return {
            "n_points": self.n_points,
            "m_rays": self.m_rays,
            "max_iters": self.max_iters,
            "step_size": self.step_size,
            "convergence_tol": self.convergence_tol,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class FitResult:
    """Outcome of a descent run."""

    pair: BoundaryPair
    converged: bool
    iterations: int
    final_loss: float
    loss_trajectory: np.ndarray
    estimated_ceiling_ratio: float

    def __post_init__(self):
        self.loss_trajectory.setflags(write=False)


def _square_init(d_bar: HorizonDepthMap, n_points: int) -> BoundaryPair:
    """Square room scaled to the reference's median depth."""
    half: float = float(np.median(d_bar.values))
    thetas = make_ray_fan(n_points).thetas.copy()
    rho = half / np.maximum(np.abs(np.sin(thetas)), np.abs(np.cos(thetas)))
    floor_phis = np.arctan2(DEFAULT_CAMERA_HEIGHT, rho)
    return BoundaryPair(
        floor=BoundaryPointSet(FLOOR, thetas, floor_phis),
        ceiling=BoundaryPointSet(CEILING, thetas.copy(), -floor_phis),
    )


def _project(phis: np.ndarray, surface: str) -> np.ndarray:
    if surface == FLOOR:
        return np.clip(phis, MIN_LATITUDE, MAX_LATITUDE)
    return np.clip(phis, -MAX_LATITUDE, -MIN_LATITUDE)


def fit_layout(
    d_bar: HorizonDepthMap,
    config: FitConfig | None = None,
    init: BoundaryPair | None = None,
) -> FitResult:
    """Descend boundary latitudes until both surfaces match ``d_bar``.

    Each iteration takes one gradient step, halving the step size while
    the loss fails to decrease (or the candidate layout does not close);
    a step that underflows 1e-12 without an open-layout rejection means
    no direction improves the loss, which is treated as convergence.
    """
    config = config or FitConfig()
    if d_bar.fan.count != config.m_rays:
        raise DomainError(
            f"reference has {d_bar.fan.count} rays but config.m_rays={config.m_rays}"
        )
    fan = make_ray_fan(config.m_rays)
    pair = init if init is not None else _square_init(d_bar, config.n_points)
    height, gauge_ratio = DEFAULT_CAMERA_HEIGHT, 1.0

    d_f, d_c, tr_f, tr_c = render_pair(pair, height, gauge_ratio, fan)
    loss = l1_loss(d_f, d_c, d_bar)
    trajectory = [loss]
    step = config.step_size
    converged = loss == 0.0
    iterations = 0

    while not converged and iterations < config.max_iters:
        jac_f, jac_c = render_jacobian(pair, height, gauge_ratio, fan, tr_f, tr_c)
        grad = loss_gradient(d_f, d_c, d_bar, jac_f, jac_c)

        open_layout_seen = False
        while True:
            if step < MIN_STEP:
                if open_layout_seen:
                    raise FitFailureError(
                        "step size underflowed while the layout failed to close",
                        trajectory,
                    )
                converged = True  # no descent direction improves the loss
                break
            floor_phis = _project(pair.floor.phis - step * grad.floor_phi, FLOOR)
            ceil_phis = _project(pair.ceiling.phis - step * grad.ceiling_phi, CEILING)
            candidate = BoundaryPair(
                floor=BoundaryPointSet(FLOOR, pair.floor.thetas, floor_phis),
                ceiling=BoundaryPointSet(CEILING, pair.ceiling.thetas, ceil_phis),
            )
            try:
                d_f2, d_c2, tr_f2, tr_c2 = render_pair(candidate, height, gauge_ratio, fan)
            except OpenLayoutError:
                open_layout_seen = True
                step *= 0.5
                continue
            except GeometryError:
                step *= 0.5
                continue
            new_loss = l1_loss(d_f2, d_c2, d_bar)
            if new_loss >= loss:
                step *= 0.5
                continue
            break

        if converged:
            break
        improvement = loss - new_loss
        pair, loss = candidate, new_loss
        d_f, d_c, tr_f, tr_c = d_f2, d_c2, tr_f2, tr_c2
        trajectory.append(loss)
        iterations += 1
        step = min(step * 2.0, config.step_size)
        if improvement < config.convergence_tol or loss == 0.0:
            converged = True

    return FitResult(
        pair=pair,
        converged=converged,
        iterations=iterations,
        final_loss=loss,
        loss_trajectory=np.asarray(trajectory),
        estimated_ceiling_ratio=estimate_ceiling_ratio(pair),
    )


def estimate_ceiling_ratio(pair: BoundaryPair) -> float:
    """Ceiling-over-camera height ratio implied by a boundary pair.

    Projects floor points onto y = 1 and ceiling points onto y = -1;
    for each shared longitude the ratio of horizontal radii equals the
    ceiling ratio, and their mean is returned.
    """
    floor_phis = pair.floor.phis
    ceil_phis = pair.ceiling.phis
    if np.any(floor_phis == 0.0) or np.any(ceil_phis == 0.0):
        raise GeometryError("zero latitude cannot be projected onto a plane")
    floor_radius = np.cos(floor_phis) / np.sin(floor_phis)
    ceil_radius = np.cos(ceil_phis) / np.sin(-ceil_phis)
    return float(np.mean(floor_radius / ceil_radius))


# ---------------------------------------------------------------------------
# axis-aligned snapping


@dataclass
class _Run:
    """A maximal stretch of boundary segments along one axis."""

    axis: int                 # 0: wall parallel to x (constant z); 1: constant x
    start: int                # first segment index
    count: int                # number of segments
    points: np.ndarray = field(default=None)  # supporting points, filled later


def _dominant_direction(points: np.ndarray) -> float:
    """Most common segment orientation modulo a quarter turn.

    Histogram of length-weighted orientations picks a coarse mode; the
    returned angle is the circular mean of the orientations near it.
    """
    edges = np.roll(points, -1, axis=0) - points
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    keep = lengths > 0
    gamma = np.arctan2(edges[keep, 0], edges[keep, 1]) % (math.pi / 2)
    weights = lengths[keep]
    bins = np.minimum((gamma / (math.pi / 2) * 90).astype(int), 89)
    hist = np.bincount(bins, weights=weights, minlength=90)
    mode_center = (np.argmax(hist) + 0.5) * (math.pi / 2) / 90
    delta = (gamma - mode_center + math.pi / 4) % (math.pi / 2) - math.pi / 4
    near = np.abs(delta) <= math.pi / 16
    c = np.sum(weights[near] * np.cos(4 * gamma[near]))
    s = np.sum(weights[near] * np.sin(4 * gamma[near]))
    return math.atan2(s, c) / 4.0 % (math.pi / 2)


def _rotate(points: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    x, z = points[:, 0], points[:, 1]
    return np.column_stack([c * x + s * z, -s * x + c * z])


def _segment_geometry(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-segment nearest axis and wall offset (z for x-parallel, x otherwise)."""
    edges = np.roll(points, -1, axis=0) - points
    axes = (np.abs(edges[:, 0]) < np.abs(edges[:, 1])).astype(int)
    mids = 0.5 * (points + np.roll(points, -1, axis=0))
    offsets = np.where(axes == 0, mids[:, 1], mids[:, 0])
    return axes, offsets


def _segment_runs(points: np.ndarray, collinear_tol: float) -> list[_Run]:
    """Cyclic same-axis runs, split where the wall offset jumps."""
    n = len(points)
    axes, offsets = _segment_geometry(points)

    breaks = [
        k
        for k in range(n)
        if axes[k] != axes[k - 1] or abs(offsets[k] - offsets[k - 1]) > collinear_tol
    ]
    if not breaks:
        return [_Run(axis=int(axes[0]), start=0, count=n)]
    runs = []
    for i, start in enumerate(breaks):
        end = breaks[(i + 1) % len(breaks)]
        count = (end - start) % n or n
        runs.append(_Run(axis=int(axes[start]), start=start, count=count))
    return runs


def _run_seg_offsets(run: _Run, offsets: np.ndarray) -> np.ndarray:
    idx = (run.start + np.arange(run.count)) % len(offsets)
    return offsets[idx]


def _split_drifting(run: _Run, offsets: np.ndarray, tol: float) -> list[_Run]:
    """Break a run apart until every piece is collinear to within ``tol``.

    Step-by-step offset jumps catch corners, but a stretch of boundary
    points still in transit between two walls drifts smoothly and can
    pose as a wall of its own.  Drifting shows up as travel: the run's
    ends disagree by about as much as its overall spread.  A noisy but
    genuine wall spreads symmetrically instead, so moderate spread with
    no end-to-end trend is left alone; anything that travels is split at
    its largest internal jump so the drifting pieces fall below the
    minimum wall length and get dropped.
    """
    segs = _run_seg_offsets(run, offsets)
    if run.count < 2:
        return [run]
    spread = float(segs.max() - segs.min())
    if spread <= tol:
        return [run]
    third = max(1, run.count // 3)
    trend = abs(float(np.mean(segs[-third:]) - np.mean(segs[:third])))
    if spread <= 2.5 * tol and trend < 0.55 * spread:
        return [run]
    k = int(np.argmax(np.abs(np.diff(segs)))) + 1
    head = _Run(axis=run.axis, start=run.start, count=k)
    tail = _Run(axis=run.axis, start=(run.start + k) % len(offsets), count=run.count - k)
    return _split_drifting(head, offsets, tol) + _split_drifting(tail, offsets, tol)


def _is_transit(run: _Run, offsets: np.ndarray, tol: float) -> bool:
    """True when a run's offsets ramp instead of scattering around a mean.

    Point noise spreads a wall's offsets symmetrically, so the first and
    last thirds share a mean and the trend stays well below the spread;
    a stretch of boundary still in transit between walls drifts
    monotonically, putting the trend near two thirds of the spread.
    """
    if run.count < 3:
        return False
    segs = _run_seg_offsets(run, offsets)
    spread = float(segs.max() - segs.min())
    if spread <= 0.5 * tol:
        return False
    third = max(1, run.count // 3)
    trend = abs(float(np.mean(segs[-third:]) - np.mean(segs[:third])))
    return trend >= 0.55 * spread


def _wall_runs(points: np.ndarray, collinear_tol: float) -> list[_Run]:
    """Same-axis runs that are individually collinear within tolerance.

    Runs wider than the tolerance are bisected at their largest jump;
    flat pieces of genuine walls re-merge during cleanup, while ramping
    (in-transit) pieces are discarded outright.
    """
    _, offsets = _segment_geometry(points)
    out: list[_Run] = []
    for run in _segment_runs(points, collinear_tol):
        for piece in _split_drifting(run, offsets, collinear_tol):
            if not _is_transit(piece, offsets, collinear_tol):
                out.append(piece)
    return out


def _run_points(run: _Run, points: np.ndarray) -> np.ndarray:
    idx = (run.start + np.arange(run.count + 1)) % len(points)
    return points[idx]


def _run_offset(run: _Run, points: np.ndarray) -> float:
    """Depth-weighted mean wall coordinate over the run's support."""
    pts = _run_points(run, points)
    if len(pts) >= 4:
        pts = pts[1:-1]  # corner-adjacent points belong to the neighbors
    coord = pts[:, 1] if run.axis == 0 else pts[:, 0]
    weights = np.hypot(pts[:, 0], pts[:, 1])
    return float(np.sum(weights * coord) / np.sum(weights))


def _run_extent(run: _Run, points: np.ndarray) -> float:
    pts = _run_points(run, points)
    along = pts[:, 0] if run.axis == 0 else pts[:, 1]
    return float(np.max(along) - np.min(along))


def _refine_direction(runs: list[_Run], points: np.ndarray) -> float:
    """Residual grid rotation implied by each run's principal axis.

    The histogram estimate is only bin-accurate, and segments that
    bridge two walls at a corner pull a plain segment-orientation mean
    off target.  Principal axes of the runs' interior points are immune
    to both, so on clean data the refined frame is exact to float
    precision.  Returns the angle to add to the current frame estimate.
    """
    c_sum = 0.0
    s_sum = 0.0
    for run in runs:
        if run.count < 4:
            continue  # short runs carry more noise than signal
        pts = _run_points(run, points)
        pts = pts[1:-1]  # endpoints may sit on neighboring walls
        centered = pts - pts.mean(axis=0)
        sxx = float(np.sum(centered[:, 0] ** 2))
        szz = float(np.sum(centered[:, 1] ** 2))
        sxz = float(np.sum(centered[:, 0] * centered[:, 1]))
        if sxx == 0.0 and szz == 0.0:
            continue
        alpha = 0.5 * math.atan2(2.0 * sxz, sxx - szz)
        gamma = math.pi / 2 - alpha  # align with the atan2(x, z) convention
        weight = _run_extent(run, points)
        c_sum += weight * math.cos(4.0 * gamma)
        s_sum += weight * math.sin(4.0 * gamma)
    if c_sum == 0.0 and s_sum == 0.0:
        return 0.0
    return math.atan2(s_sum, c_sum) / 4.0


def manhattan_snap(
    pair: BoundaryPair,
    ratio: float,
    camera_height: float = DEFAULT_CAMERA_HEIGHT,
    collinear_tol: float = 0.12,
    min_wall_length: float = 0.2,
) -> LayoutAnnotation:
    """Collapse a dense boundary into an axis-aligned corner annotation.

    The floor boundary is lifted to the floor plane, rotated into its
    dominant wall frame, segmented into same-axis runs (a direction
    change past a quarter turn, or a wall-offset jump beyond
    ``collinear_tol``, starts a new run), and each surviving run snaps
    to the depth-weighted mean of its supporting points.  Runs shorter
    than ``min_wall_length`` are dropped; where occlusion leaves two
    parallel walls adjacent, the step between them is closed at the
    nearer wall's end.  Raises :class:`SnapFailureError` when fewer than
    four walls survive or the polygon does not close around the camera.
    """
    lifted = lift_to_plane(pair.floor, camera_height, 1.0)
    points = lifted[:, [0, 2]]
    angle = _dominant_direction(points)
    for _ in range(3):
        rotated = _rotate(points, -angle)
        delta = _refine_direction(_segment_runs(rotated, collinear_tol), rotated)
        if abs(delta) < 1e-12:
            break
        angle += delta
    rotated = _rotate(points, -angle)

    runs = _wall_runs(rotated, collinear_tol)
    runs = _cleanup_runs(runs, rotated, collinear_tol, min_wall_length)
    if len(runs) < 4:
        raise SnapFailureError(f"only {len(runs)} walls survived snapping")

    corners = _runs_to_corners(runs, rotated)
    try:
        return LayoutAnnotation(
            corners_xz=_rotate(corners, angle),
            camera_height=camera_height,
            ceiling_ratio=ratio,
        )
    except DomainError as exc:
        raise SnapFailureError(f"snapped polygon is not a valid room: {exc}") from exc


def _cleanup_runs(
    runs: list[_Run], points: np.ndarray, collinear_tol: float, min_wall_length: float
) -> list[_Run]:
    """Merge rejoinable neighbors and drop runs too short to be walls."""
    n_segs = len(points)

    def union_is_wall(cand: _Run) -> bool:
        # judge the bridged union by its points, not its segments: a
        # direction flicker misclassifies a segment (giving it a junk
        # offset) while both endpoints still lie on the wall, so point
        # wall-coordinates are junk-free where segment offsets are not
        pts = _run_points(cand, points)
        if len(pts) >= 4:
            pts = pts[1:-1]
        coord = pts[:, 1] if cand.axis == 0 else pts[:, 0]
        spread = float(coord.max() - coord.min())
        if spread > 2.5 * collinear_tol:
            return False
        third = max(1, len(coord) // 3)
        trend = abs(float(np.mean(coord[-third:]) - np.mean(coord[:third])))
        return spread <= collinear_tol or trend < 0.55 * spread

    def merge_pass(rs: list[_Run]) -> list[_Run]:
        changed = True
        while changed and len(rs) > 1:
            changed = False
            for i in range(len(rs)):
                j = (i + 1) % len(rs)
                if i == j:
                    break
                a, b = rs[i], rs[j]
                if a.axis != b.axis:
                    continue
                # jitter flickers and dropped slivers leave small index
                # gaps between pieces of one wall; bridge those too (the
                # union test below sees the bridged points, so anything
                # that actually leaves the wall still gets refused)
                gap = (b.start - (a.start + a.count)) % n_segs
                if gap > 8:
                    continue
                if abs(_run_offset(a, points) - _run_offset(b, points)) > collinear_tol:
                    continue
                cand = _Run(axis=a.axis, start=a.start, count=a.count + gap + b.count)
                if not union_is_wall(cand):
                    continue
                rs[i] = cand
                del rs[j]
                changed = True
                break
        return rs

    runs = merge_pass(runs)
    while len(runs) > 4:
        extents = [_run_extent(r, points) for r in runs]
        victim = int(np.argmin(extents))
        if extents[victim] >= min_wall_length:
            break
        del runs[victim]
        runs = merge_pass(runs)
    return runs


def _runs_to_corners(runs: list[_Run], points: np.ndarray) -> np.ndarray:
    """Wall offsets to polygon corners, closing occlusion steps."""
    walls: list[tuple[int, float]] = []  # (axis, offset)
    for i, run in enumerate(runs):
        nxt = runs[(i + 1) % len(runs)]
        walls.append((run.axis, _run_offset(run, points)))
        if run.axis == nxt.axis:
            # two parallel walls: insert the perpendicular step at the
            # end of whichever wall is nearer to the camera
            end_a = _run_points(run, points)[-1]
            start_b = _run_points(nxt, points)[0]
            near = end_a if np.hypot(*end_a) <= np.hypot(*start_b) else start_b
            step_coord = near[0] if run.axis == 0 else near[1]
            walls.append((1 - run.axis, float(step_coord)))

    if len(walls) < 4 or len(walls) % 2 != 0:
        raise SnapFailureError("snapped walls do not alternate into a closed loop")
    corners = []
    for i, (axis, offset) in enumerate(walls):
        nxt_axis, nxt_offset = walls[(i + 1) % len(walls)]
        if axis == nxt_axis:
            raise SnapFailureError("adjacent snapped walls share an axis")
        # axis 0 fixes z = offset, axis 1 fixes x = offset
        x = offset if axis == 1 else nxt_offset
        z = offset if axis == 0 else nxt_offset
        corners.append((x, z))
    return np.asarray(corners)
