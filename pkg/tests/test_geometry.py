import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lidarcurate import Box3D, Point3, PointCloud, bev_iou, iou_3d
from lidarcurate.geometry import (
    bev_polygon,
    box_corners,
    center_distance,
    clip_convex_polygon,
    count_points_in_box,
    count_points_in_boxes,
    point_in_box,
    points_in_box_mask,
    polygon_area,
)
from oracles import axis_aligned_iou, halfspace_inside, signed_face_distances

shapely = pytest.importorskip("shapely.geometry")

CUBE2 = Box3D((0, 0, 0), 2, 2, 2, 0)


@pytest.mark.parametrize(
    "sensor, center, expected",
    [((0, 0, 0), (3, 4, 0), 5.0), ((2, 3, 3), (2, 3, 3), 0.0), ((1, 1, 1), (2, 3, 3), 3.0)],
)
def test_center_distance(sensor, center, expected):
    box = Box3D(center, 1, 1, 1)
    assert center_distance(Point3(*sensor), box) == expected
    assert center_distance(Point3(*sensor), box, squared=True) == expected**2


def test_point_in_box_examples():
    assert point_in_box(Point3(0.5, 0.5, 0.5), CUBE2)
    assert point_in_box(Point3(1.0, 0, 0), CUBE2)
    assert not point_in_box(Point3(1.0 + 1e-9, 0, 0), CUBE2)
    rotated = Box3D((0, 0, 0), 2, 2, 2, math.pi / 4)
    assert point_in_box(Point3(1.2, 0, 0), rotated)
    # the same point fails the half-space test only if the oracle disagrees
    assert halfspace_inside(np.array([[1.2, 0, 0]]), rotated)[0]
    assert not point_in_box(Point3(1.5, 0, 0), rotated)


def test_count_examples():
    assert count_points_in_box(PointCloud.from_points(np.zeros((0, 3))), CUBE2) == 0
    cloud = PointCloud.from_points([(0, 0, 0), (0.5, 0, 0), (9, 9, 9)])
    assert count_points_in_box(cloud, CUBE2) == 2
    perm = PointCloud.from_points([(9, 9, 9), (0.5, 0, 0), (0, 0, 0)])
    assert count_points_in_box(perm, CUBE2) == 2


def test_corner_order():
    box = Box3D((1, 2, 3), 4, 2, 1, 0.3)
    c = box_corners(box)
    # bottom counter-clockwise from above: positive signed area
    bottom = c[:4, :2]
    signed = np.dot(bottom[:, 0], np.roll(bottom[:, 1], -1)) - np.dot(bottom[:, 1], np.roll(bottom[:, 0], -1))
    assert signed > 0
    np.testing.assert_allclose(c[4:] - c[:4], np.tile([0, 0, 1.0], (4, 1)), atol=1e-12)
    np.testing.assert_allclose(c[4:].mean(0) - c[:4].mean(0), [0, 0, box.height], atol=1e-12)
    np.testing.assert_allclose(c.mean(0), box.center[:3], atol=1e-12)


def random_box(rng, spread=5.0, yaw=True):
    return Box3D(
        tuple(rng.uniform(-spread, spread, 3)),
        *rng.uniform(0.2, 4.0, 3),
        yaw=rng.uniform(-math.pi, math.pi) if yaw else 0.0,
    )


def test_count_many_matches_single_and_naive_loop():
    rng = np.random.default_rng(3)
    pts = rng.uniform(-6, 6, size=(3000, 3))
    cloud = PointCloud.from_points(pts)
    boxes = [random_box(rng) for _ in range(40)]
    fast = count_points_in_boxes(cloud, boxes)
    for box, n in zip(boxes, fast):
        assert n == count_points_in_box(cloud, box)
        assert n == sum(point_in_box(p, box) for p in cloud)


def test_count_many_includes_boundary_points():
    box = Box3D((10.0, 0, 0), 2, 2, 2, 0)
    cloud = PointCloud.from_points([(9.0, 0, 0), (11.0, 1.0, 1.0), (11.0 + 1e-5, 0, 0)])
    assert count_points_in_boxes(cloud, [box]).tolist() == [2]


def test_containment_agrees_with_halfspace_oracle():
    rng = np.random.default_rng(11)
    for _ in range(200):
        box = random_box(rng)
        pts = np.asarray(box.center[:3]) + rng.uniform(-3, 3, size=(200, 3))
        d = signed_face_distances(pts, box)
        clear = np.abs(d).min(axis=1) >= 1e-6
        np.testing.assert_array_equal(
            points_in_box_mask(pts[clear], box), halfspace_inside(pts[clear], box)
        )


def test_polygon_area_and_clip():
    sq = np.array([[0, 0], [2, 0], [2, 2], [0, 2]], dtype=float)
    assert polygon_area(sq) == 4.0
    shifted = sq + [1, 1]
    inter = clip_convex_polygon(sq, shifted)
    assert polygon_area(inter) == pytest.approx(1.0)
    far = sq + [5, 0]
    assert polygon_area(clip_convex_polygon(sq, far)) == 0.0
    touching = sq + [2, 0]
    assert polygon_area(clip_convex_polygon(sq, touching)) == pytest.approx(0.0, abs=1e-12)


def test_bev_iou_examples():
    assert bev_iou(CUBE2, CUBE2) == pytest.approx(1.0, abs=1e-9)
    assert bev_iou(CUBE2, Box3D((10, 0, 0), 2, 2, 2)) == 0.0
    assert bev_iou(CUBE2, Box3D((1, 0, 0), 2, 2, 2)) == pytest.approx(1 / 3, abs=1e-12)
    # edge contact has zero area
    assert bev_iou(CUBE2, Box3D((2, 0, 0), 2, 2, 2)) == 0.0


def test_iou_3d_examples():
    assert iou_3d(CUBE2, CUBE2) == pytest.approx(1.0, abs=1e-9)
    assert iou_3d(CUBE2, Box3D((1, 0, 0), 2, 2, 2)) == pytest.approx(1 / 3, abs=1e-12)
    stacked = Box3D((0, 0, 2.5), 2, 2, 2)
    assert bev_iou(CUBE2, stacked) == pytest.approx(1.0)
    assert iou_3d(CUBE2, stacked) == 0.0


def test_bev_iou_matches_shapely():
    from shapely.geometry import Polygon

    rng = np.random.default_rng(5)
    for _ in range(300):
        a, b = random_box(rng, spread=2.0), random_box(rng, spread=2.0)
        pa, pb = Polygon(bev_polygon(a)), Polygon(bev_polygon(b))
        inter = pa.intersection(pb).area
        expected = inter / (pa.area + pb.area - inter)
        assert bev_iou(a, b) == pytest.approx(expected, abs=1e-9)


def test_iou_axis_aligned_analytic():
    rng = np.random.default_rng(8)
    for _ in range(300):
        a, b = random_box(rng, 2.0, yaw=False), random_box(rng, 2.0, yaw=False)
        assert iou_3d(a, b) == pytest.approx(axis_aligned_iou(a, b), abs=1e-9)


def _rotate(box, angle, origin):
    c, s = math.cos(angle), math.sin(angle)
    x, y = box.center[0] - origin[0], box.center[1] - origin[1]
    center = (origin[0] + c * x - s * y, origin[1] + s * x + c * y, box.center[2])
    return Box3D(center, box.length, box.width, box.height, box.yaw + angle)


def test_symmetry_bounds_and_yaw_invariance():
    rng = np.random.default_rng(13)
    for _ in range(300):
        a, b = random_box(rng, 2.0), random_box(rng, 2.0)
        for fn in (bev_iou, iou_3d):
            v = fn(a, b)
            assert 0.0 <= v <= 1.0
            assert v == pytest.approx(fn(b, a), abs=1e-12)
            assert fn(a, a) == pytest.approx(1.0, abs=1e-9)
            angle, origin = rng.uniform(-math.pi, math.pi), rng.uniform(-3, 3, 2)
            assert fn(_rotate(a, angle, origin), _rotate(b, angle, origin)) == pytest.approx(v, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(-math.pi, math.pi),
    st.tuples(st.floats(-5, 5), st.floats(-5, 5)),
    st.lists(st.tuples(st.floats(-4, 4), st.floats(-4, 4), st.floats(-2, 2)), min_size=1, max_size=30),
)
def test_containment_is_yaw_invariant(angle, origin, points):
    box = Box3D((0.5, -0.25, 0.0), 3.0, 1.5, 2.0, 0.4)
    rotated = _rotate(box, angle, origin + (0.0,))
    c, s = math.cos(angle), math.sin(angle)
    for x, y, z in points:
        d = signed_face_distances(np.array([[x, y, z]]), box)
        if np.abs(d).min() < 1e-6:
            continue
        px, py = x - origin[0], y - origin[1]
        moved = Point3(origin[0] + c * px - s * py, origin[1] + s * px + c * py, z)
        assert point_in_box(Point3(x, y, z), box) == point_in_box(moved, rotated)
