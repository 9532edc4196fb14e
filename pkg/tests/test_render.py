"""Depth rendering: candidates, occlusion, the L1 objective, resampling."""

import math

import numpy as np
import pytest

import hdk
from hdk import DomainError, GeometryError, OpenLayoutError

from conftest import FIXTURE_NAMES, load_annotation
from oracle import ray_segment_depths, wall_candidate_depths
from roomgen import random_room


def wall(normal, offset, lo, hi):
    return hdk.WallPlane(np.asarray(normal, dtype=float), offset, lo, hi)


def square_closed_form(thetas):
    return 1.0 / np.maximum(np.abs(np.sin(thetas)), np.abs(np.cos(thetas)))


# ---------------------------------------------------------------------------
# candidate_depth


def test_candidate_head_on():
    w = wall([0.0, 0.0, 2.0], -2.0, -math.pi / 4, math.pi / 4)
    assert hdk.candidate_depth(np.array([0.0, 0.0, 1.0]), w) == pytest.approx(1.0)


def test_candidate_rejected_by_span():
    w = wall([0.0, 0.0, 2.0], -2.0, math.pi / 2, math.pi)
    assert hdk.candidate_depth(np.array([0.0, 0.0, 1.0]), w) is None


def test_candidate_parallel_ray():
    w = wall([0.0, 0.0, 2.0], -2.0, -math.pi, math.pi)
    assert hdk.candidate_depth(np.array([1.0, 0.0, 0.0]), w) is None


def test_candidate_behind_camera():
    w = wall([0.0, 0.0, 2.0], -2.0, -math.pi, math.pi)
    assert hdk.candidate_depth(np.array([0.0, 0.0, -1.0]), w) is None


# ---------------------------------------------------------------------------
# render


def square_walls():
    a = load_annotation("square")
    pair = hdk.annotation_to_boundaries(a)
    lifted = hdk.lift_to_plane(pair.floor, a.camera_height)
    return hdk.recover_wall_planes(lifted, pair.floor.thetas)


def test_square_axis_and_diagonal_rays():
    depth, _ = hdk.render(square_walls(), hdk.make_ray_fan(8))
    # fan longitudes: -pi, -3pi/4, ..., includes 0 (index 4) and pi/4 (5)
    assert depth.values[4] == pytest.approx(1.0, abs=1e-12)
    assert depth.values[5] == pytest.approx(math.sqrt(2.0), abs=1e-12)


def test_square_closed_form_m1024():
    fan = hdk.make_ray_fan(1024)
    depth, _ = hdk.render(square_walls(), fan)
    assert np.max(np.abs(depth.values - square_closed_form(fan.thetas))) <= 1e-9


def test_trace_depth_matches_values_exactly():
    fan = hdk.make_ray_fan(97)
    depth, trace = hdk.render(square_walls(), fan)
    assert np.array_equal(trace.active_depth, depth.values)
    assert np.all(trace.candidate_count >= 1)


def test_occlusion_prefers_near_wall():
    """Overlapping spans force the renderer to keep the nearest candidate.

    Every wall of this L-room gets its true longitude arc (the short arc
    between its endpoint directions), and the back wall's span is then
    widened to a full turn.  Rays over the back half of the room see both
    their true wall and the back wall's plane behind it; the rendered
    depth must equal the brute-force polygon depth and never exceed any
    surviving candidate.
    """
    corners = np.array(
        [[-2.0, -2.0], [2.0, -2.0], [2.0, 0.5], [0.5, 0.5], [0.5, 2.0], [-2.0, 2.0]]
    )
    lifted = np.column_stack(
        [corners[:, 0], np.full(len(corners), 1.6), corners[:, 1]]
    )
    spans = []
    walls = []
    thetas = np.arctan2(corners[:, 0], corners[:, 1])
    for i in range(len(corners)):
        j = (i + 1) % len(corners)
        edge = lifted[j] - lifted[i]
        normal = np.array([edge[2], 0.0, -edge[0]])
        offset = -float(normal @ lifted[i])
        # the short arc between the endpoint longitudes: a straight wall
        # seen from an interior camera always subtends less than pi
        lo, hi = float(thetas[i]), float(thetas[j])
        width = (hi - lo) % (2 * math.pi)
        if width > math.pi:
            lo, width = hi, 2 * math.pi - width
        if i == 0:
            width = 2 * math.pi  # back wall plane offered to every ray
        walls.append(wall(normal, offset, lo, lo + width))
        spans.append((lo, width))

    fan = hdk.make_ray_fan(512)
    depth, trace = hdk.render(walls, fan)
    expected = ray_segment_depths(corners, fan.thetas)
    assert np.max(np.abs(depth.values - expected)) <= 1e-9
    # back-half rays must have seen both the near and the far candidate
    assert np.any(trace.candidate_count > 1)
    for j in np.flatnonzero(trace.candidate_count > 1)[:32]:
        candidates = wall_candidate_depths(corners, spans, fan.thetas[j])
        assert depth.values[j] <= np.min(candidates) + 1e-12


def test_open_layout_names_the_uncovered_longitude():
    # one wall covering only a quarter turn leaves most rays uncovered
    walls = [
        wall([0.0, 0.0, 2.0], -2.0, -math.pi / 4, math.pi / 4),
        wall([2.0, 0.0, 0.0], -2.0, math.pi / 4, math.pi / 2),
        wall([-2.0, 0.0, 0.0], -2.0, -math.pi / 2, -math.pi / 4),
    ]
    with pytest.raises(OpenLayoutError) as excinfo:
        hdk.render(walls, hdk.make_ray_fan(8))
    assert "longitude" in str(excinfo.value)


def test_render_requires_three_walls():
    with pytest.raises(DomainError):
        hdk.render([wall([0.0, 0.0, 2.0], -2.0, -math.pi, math.pi)], hdk.make_ray_fan(8))


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_densified_render_matches_oracle(name):
    a = load_annotation(name)
    fan = hdk.make_ray_fan(256)
    pair = hdk.densify_boundaries(a, 256)
    d_f, _, _, _ = hdk.render_pair(pair, a.camera_height, a.ceiling_ratio, fan)
    expected = ray_segment_depths(a.corners_xz, fan.thetas)
    assert np.max(np.abs(d_f.values - expected)) <= 1e-9


# ---------------------------------------------------------------------------
# render_pair


@pytest.mark.parametrize("name", ["square", "lroom", "room8"])
def test_floor_ceiling_identity_on_ground_truth(name):
    a = load_annotation(name)
    fan = hdk.make_ray_fan(256)
    pair = hdk.densify_boundaries(a, 256)
    d_f, d_c, _, _ = hdk.render_pair(pair, a.camera_height, a.ceiling_ratio, fan)
    assert np.max(np.abs(d_f.values - d_c.values)) <= 1e-9


def test_surfaces_render_independently():
    a = load_annotation("square")
    fan = hdk.make_ray_fan(64)
    pair = hdk.densify_boundaries(a, 64)
    d_f, d_c, _, _ = hdk.render_pair(pair, a.camera_height, a.ceiling_ratio, fan)
    bumped = hdk.BoundaryPair(
        floor=pair.floor,
        ceiling=hdk.BoundaryPointSet(
            "ceiling", pair.ceiling.thetas, pair.ceiling.phis - 0.05
        ),
    )
    d_f2, d_c2, _, _ = hdk.render_pair(bumped, a.camera_height, a.ceiling_ratio, fan)
    assert np.array_equal(d_f.values, d_f2.values)
    assert np.max(np.abs(d_c.values - d_c2.values)) > 1e-3


def test_render_scale_invariance_bitwise():
    """Same boundary angles render bit-identically regardless of the
    room scale they came from (the angles carry no scale)."""
    for name in ("square", "rect"):
        a = load_annotation(name)
        fan = hdk.make_ray_fan(128)
        base_pair = hdk.annotation_to_boundaries(a)
        d_f, d_c, _, _ = hdk.render_pair(base_pair, 1.6, a.ceiling_ratio, fan)
        for s in (0.5, 3.0):
            scaled = hdk.LayoutAnnotation(
                a.corners_xz * s, a.camera_height * s, a.ceiling_ratio
            )
            pair_s = hdk.annotation_to_boundaries(scaled)
            d_f2, d_c2, _, _ = hdk.render_pair(pair_s, 1.6, a.ceiling_ratio, fan)
            assert np.array_equal(d_f.values, d_f2.values)
            assert np.array_equal(d_c.values, d_c2.values)


# ---------------------------------------------------------------------------
# l1_loss


def make_map(fan, values):
    return hdk.HorizonDepthMap(fan, np.asarray(values, dtype=float))


def test_l1_loss_zero_at_match():
    fan = hdk.make_ray_fan(16)
    d = make_map(fan, np.full(16, 2.0))
    assert hdk.l1_loss(d, d, d) == 0.0


def test_l1_loss_offset_example():
    fan = hdk.make_ray_fan(256)
    d_bar = make_map(fan, np.full(256, 2.0))
    d_f = make_map(fan, np.full(256, 2.5))
    assert hdk.l1_loss(d_f, d_bar, d_bar) == pytest.approx(128.0)
    assert hdk.l1_loss(d_f, d_bar, d_bar, mean=True) == pytest.approx(0.25)


def test_l1_loss_matches_recomputation():
    fan = hdk.make_ray_fan(64)
    rng = np.random.default_rng(5)
    for _ in range(20):
        a, b, c = (1.0 + rng.random((3, 64)))
        expected = float(np.sum(np.abs(a - c)) + np.sum(np.abs(b - c)))
        got = hdk.l1_loss(make_map(fan, a), make_map(fan, b), make_map(fan, c))
        assert got == pytest.approx(expected, rel=1e-12)


def test_l1_loss_rejects_mismatched_fans():
    d16 = make_map(hdk.make_ray_fan(16), np.full(16, 2.0))
    d32 = make_map(hdk.make_ray_fan(32), np.full(32, 2.0))
    with pytest.raises(DomainError):
        hdk.l1_loss(d16, d16, d32)


def test_depth_map_validation():
    fan = hdk.make_ray_fan(8)
    with pytest.raises(DomainError):
        make_map(fan, np.full(7, 1.0))
    with pytest.raises(DomainError):
        make_map(fan, np.array([1.0] * 7 + [-1.0]))
    with pytest.raises(DomainError):
        make_map(fan, np.array([1.0] * 7 + [np.inf]))


# ---------------------------------------------------------------------------
# resolution behaviour


def periodic_interp(values, target_count):
    m = len(values)
    pos = np.arange(target_count) * (m / target_count)
    base = np.floor(pos)
    i0 = base.astype(int) % m
    i1 = (i0 + 1) % m
    w = pos - base
    return (1.0 - w) * values[i0] + w * values[i1]


def test_shared_longitude_renders_are_bitwise_equal():
    """Coarse-fan rays aligned with fine-fan rays see identical depths."""
    a = load_annotation("square")
    pair = hdk.densify_boundaries(a, 1024)
    coarse, _, _, _ = hdk.render_pair(pair, a.camera_height, a.ceiling_ratio, hdk.make_ray_fan(16))
    fine, _, _, _ = hdk.render_pair(pair, a.camera_height, a.ceiling_ratio, hdk.make_ray_fan(1024))
    assert np.array_equal(coarse.values, fine.values[::64])


def test_resolution_error_non_increasing():
    reference_m = 2048
    for seed in (0, 1, 2):
        a = random_room(seed)
        pair = hdk.densify_boundaries(a, reference_m)
        fan_ref = hdk.make_ray_fan(reference_m)
        d_ref, _, _, _ = hdk.render_pair(pair, a.camera_height, a.ceiling_ratio, fan_ref)
        errors = []
        for m in (16, 64, 256, 1024):
            d_m, _, _, _ = hdk.render_pair(
                pair, a.camera_height, a.ceiling_ratio, hdk.make_ray_fan(m)
            )
            gap = np.abs(periodic_interp(d_m.values, reference_m) - d_ref.values)
            errors.append(float(np.max(gap)))
        assert all(e1 >= e2 for e1, e2 in zip(errors, errors[1:]))
