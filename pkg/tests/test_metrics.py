"""Layout IoU metrics against closed forms and a Monte-Carlo oracle."""

import numpy as np
import pytest
from scipy.spatial import ConvexHull

import hdk
from conftest import load_annotation
from oracle import monte_carlo_intersection_area
from roomgen import random_room

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def annotation(corners, camera_height=1.6, ceiling_ratio=1.0):
    return hdk.LayoutAnnotation(
        corners_xz=np.asarray(corners, dtype=float),
        camera_height=camera_height,
        ceiling_ratio=ceiling_ratio,
    )


def random_convex_polygon(rng):
    """Convex hull of a handful of random points, as corner array."""
    points = rng.uniform(-2.0, 2.0, size=(12, 2))
    hull = ConvexHull(points)
    return points[hull.vertices]


# ---------------------------------------------------------------------------
# polygon_intersection_area


def test_intersection_area_of_identical_squares():
    assert hdk.polygon_intersection_area(UNIT_SQUARE, UNIT_SQUARE) == pytest.approx(
        1.0, abs=1e-12
    )


def test_intersection_area_of_shifted_square():
    shifted = UNIT_SQUARE + np.array([0.5, 0.0])
    assert hdk.polygon_intersection_area(UNIT_SQUARE, shifted) == pytest.approx(
        0.5, abs=1e-12
    )
    assert hdk.polygon_intersection_area(shifted, UNIT_SQUARE) == pytest.approx(
        0.5, abs=1e-12
    )


def test_intersection_area_of_disjoint_squares():
    far = UNIT_SQUARE + np.array([5.0, 0.0])
    assert hdk.polygon_intersection_area(UNIT_SQUARE, far) == 0.0


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_intersection_area_matches_monte_carlo(seed):
    rng = np.random.default_rng(seed)
    first = random_convex_polygon(rng)
    second = random_convex_polygon(rng)
    exact = hdk.polygon_intersection_area(first, second)
    estimate, sigma = monte_carlo_intersection_area(first, second, 10**6, rng)
    assert abs(exact - estimate) <= 3.0 * max(sigma, 1e-12)


@pytest.mark.parametrize(
    "corners",
    [
        [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]],  # bowtie
        [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],  # zero area
    ],
)
def test_intersection_area_rejects_bad_polygons(corners):
    with pytest.raises(hdk.GeometryError):
        hdk.polygon_intersection_area(np.asarray(corners), UNIT_SQUARE)


# ---------------------------------------------------------------------------
# layout_iou


def test_iou_of_identical_layouts():
    room = load_annotation("lroom")
    report = hdk.layout_iou(room, room)
    assert report.iou_2d == pytest.approx(1.0, abs=1e-12)
    assert report.iou_3d == pytest.approx(1.0, abs=1e-12)


def test_iou_with_different_height_spans():
    # same floor plan; vertical spans 1.0 * (1 + 1.9) = 2.9 versus 3.2
    corners = UNIT_SQUARE - np.array([0.5, 0.5])
    pred = annotation(corners, camera_height=1.0, ceiling_ratio=1.9)
    truth = annotation(corners, camera_height=1.0, ceiling_ratio=2.2)
    report = hdk.layout_iou(pred, truth)
    assert report.iou_2d == pytest.approx(1.0, abs=1e-12)
    assert report.iou_3d == pytest.approx(2.9 / 3.2, abs=1e-12)
    assert report.iou_3d == pytest.approx(0.90625, abs=1e-9)


def test_iou_of_half_overlapping_squares():
    first = annotation([[-0.75, -0.5], [0.25, -0.5], [0.25, 0.5], [-0.75, 0.5]])
    second = annotation(np.asarray(first.corners_xz) + np.array([0.5, 0.0]))
    report = hdk.layout_iou(first, second)
    assert report.iou_2d == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert report.iou_3d == pytest.approx(1.0 / 3.0, abs=1e-12)


@pytest.mark.parametrize("seed", [2, 5, 8])
def test_iou_is_symmetric_and_bounded(seed):
    first = random_room(seed)
    second = random_room(seed + 100)
    forward = hdk.layout_iou(first, second)
    backward = hdk.layout_iou(second, first)
    assert forward.iou_2d == pytest.approx(backward.iou_2d, abs=1e-12)
    assert forward.iou_3d == pytest.approx(backward.iou_3d, abs=1e-12)
    for value in (forward.iou_2d, forward.iou_3d):
        assert 0.0 <= value <= 1.0
    # annotations both contain the camera, so they always overlap a bit
    assert forward.iou_2d > 0.0


def test_iou_is_translation_equivariant():
    base = random_room(4)
    shifted_pred = annotation(
        np.asarray(base.corners_xz) + np.array([0.05, -0.03]),
        base.camera_height,
        base.ceiling_ratio,
    )
    other = random_room(104)
    shifted_gt = annotation(
        np.asarray(other.corners_xz) + np.array([0.05, -0.03]),
        other.camera_height,
        other.ceiling_ratio,
    )
    plain = hdk.layout_iou(base, other)
    moved = hdk.layout_iou(shifted_pred, shifted_gt)
    assert moved.iou_2d == pytest.approx(plain.iou_2d, abs=1e-9)
    assert moved.iou_3d == pytest.approx(plain.iou_3d, abs=1e-9)


@pytest.mark.parametrize(
    "name,bucket",
    [
        ("square", "4"),
        ("lroom", "6"),
        ("room8", "8"),
        ("room10a", "10+"),
        ("room12b", "10+"),
    ],
)
def test_bucket_follows_truth_corner_count(name, bucket):
    room = load_annotation(name)
    assert hdk.layout_iou(room, room).corner_count_bucket == bucket


# ---------------------------------------------------------------------------
# bucket_by_corners


def test_single_sample_table():
    room = load_annotation("square")
    table = hdk.bucket_by_corners([hdk.layout_iou(room, room)])
    assert table.counts == {"overall": 1, "4": 1}
    assert table.mean_iou_2d["overall"] == pytest.approx(1.0, abs=1e-12)
    assert table.mean_iou_2d["4"] == pytest.approx(1.0, abs=1e-12)


def test_two_bucket_means():
    reports = [
        hdk.IoUReport(iou_2d=0.8, iou_3d=0.8, corner_count_bucket="4"),
        hdk.IoUReport(iou_2d=0.6, iou_3d=0.6, corner_count_bucket="6"),
    ]
    table = hdk.bucket_by_corners(reports)
    assert table.mean_iou_2d["overall"] == pytest.approx(0.7, abs=1e-12)
    assert table.mean_iou_2d["4"] == pytest.approx(0.8, abs=1e-12)
    assert table.mean_iou_2d["6"] == pytest.approx(0.6, abs=1e-12)
    assert table.counts == {"overall": 2, "4": 1, "6": 1}


def test_forty_room_table_layout():
    reports = []
    seed = 0
    while len(reports) < 40:
        room = random_room(seed)
        seed += 1
        reports.append(hdk.layout_iou(room, room))
    table = hdk.bucket_by_corners(reports)
    assert table.counts["overall"] == 40
    assert sum(v for k, v in table.counts.items() if k != "overall") == 40

    text = table.format_text()
    lines = text.splitlines()
    assert len(lines) == 4  # header, count, 2D, 3D
    assert lines[0].split() == ["overall", "4", "corners", "6", "corners",
                                "8", "corners", "10+", "corners"]
    # every row must align into the same five data columns
    for row in lines[1:]:
        assert len(row.split()) in (6, 7)

    payload = table.to_json()
    assert set(payload) == {"overall", "4", "6", "8", "10+"}
    for row in payload.values():
        assert set(row) == {"count", "iou_2d", "iou_3d"}
