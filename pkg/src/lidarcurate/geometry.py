"""Oriented-box geometry: containment, point counting, distances and IoU.

Boxes rotate about the vertical axis only, so every overlap question reduces
to a ground-plane (bird's-eye view) polygon problem times a 1D overlap of
the vertical extents.  The ground-plane intersection of two rectangles is
found by clipping one against the other (Sutherland-Hodgman) and measuring
the result with the shoelace formula.

Containment is boundary-inclusive: a point exactly on a face is inside.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .annotation_io import Box3D
from .pointcloud_io import Point3, PointCloud

#: signed-distance slack (meters) when deciding which side of a clip edge a vertex is on
CLIP_TOLERANCE = 1e-9

# corner signs in the box frame: bottom face counter-clockwise seen from +z,
# then the top face in the same order
_CORNER_SIGNS = np.array(
    [
        [1, 1, -1], [-1, 1, -1], [-1, -1, -1], [1, -1, -1],
        [1, 1, 1], [-1, 1, 1], [-1, -1, 1], [1, -1, 1],
    ],
    dtype=np.float64,
)


def center_distance(sensor: Point3, box: Box3D, squared: bool = False) -> float:
    """Euclidean distance from the sensor to the box center (or its square)."""
    dx = box.center[0] - sensor[0]
    dy = box.center[1] - sensor[1]
    dz = box.center[2] - sensor[2]
    sq = dx * dx + dy * dy + dz * dz
    return sq if squared else math.sqrt(sq)


def box_corners(box: Box3D) -> np.ndarray:
    """Return the eight corners as an ``(8, 3)`` array.

    Indices 0-3 are the bottom face, counter-clockwise when viewed from above
    starting at the local ``(+length/2, +width/2)`` corner; 4-7 are the top
    face in matching order, so corner ``i + 4`` sits directly above ``i``.
    """
    half = np.array([box.length, box.width, box.height]) / 2.0
    local = _CORNER_SIGNS * half
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return local @ rot.T + np.asarray(box.center[:3], dtype=np.float64)


def bev_polygon(box: Box3D) -> np.ndarray:
    """Ground-plane footprint as a counter-clockwise ``(4, 2)`` array."""
    return box_corners(box)[:4, :2]


def points_in_box_mask(xyz: np.ndarray, box: Box3D) -> np.ndarray:
    """Boolean mask of the rows of an ``(N, >=3)`` array lying inside ``box``."""
    pts = np.asarray(xyz, dtype=np.float64)
    cx, cy, cz = box.center[:3]
    dx = pts[:, 0] - cx
    dy = pts[:, 1] - cy
    dz = pts[:, 2] - cz
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    # rotate by -yaw into the box frame
    lx = c * dx + s * dy
    ly = c * dy - s * dx
    return (
        (np.abs(lx) <= box.length / 2.0)
        & (np.abs(ly) <= box.width / 2.0)
        & (np.abs(dz) <= box.height / 2.0)
    )


def point_in_box(p: Point3, box: Box3D) -> bool:
    return bool(points_in_box_mask(np.array([p[:3]], dtype=np.float64), box)[0])


def count_points_in_box(cloud: PointCloud, box: Box3D) -> int:
    """Number of points of ``cloud`` inside ``box``."""
    if len(cloud) == 0:
        return 0
    return int(np.count_nonzero(points_in_box_mask(cloud.points, box)))


def count_points_in_boxes(cloud: PointCloud, boxes: Sequence[Box3D]) -> np.ndarray:
    """Point counts for many boxes of one frame.

    Gives the same result as calling :func:`count_points_in_box` per box, but
    sorts the cloud along x once and tests each box only against the slab of
    points that can reach its footprint.
    """
    counts = np.zeros(len(boxes), dtype=np.int64)
    if len(cloud) == 0 or not boxes:
        return counts
    xyz = cloud.points[:, :3].astype(np.float64)
    order = np.argsort(xyz[:, 0], kind="stable")
    xyz = xyz[order]
    xs = xyz[:, 0]
    for i, box in enumerate(boxes):
        reach = math.hypot(box.length / 2.0, box.width / 2.0)
        pad = 1e-6 * (1.0 + abs(box.center[0]) + reach)
        lo = np.searchsorted(xs, box.center[0] - reach - pad, side="left")
        hi = np.searchsorted(xs, box.center[0] + reach + pad, side="right")
        if hi > lo:
            counts[i] = np.count_nonzero(points_in_box_mask(xyz[lo:hi], box))
    return counts


def polygon_area(poly: np.ndarray) -> float:
    """Unsigned shoelace area of a simple polygon given as ``(K, 2)`` vertices."""
    if len(poly) < 3:
        return 0.0
    x = poly[:, 0]
    y = poly[:, 1]
    return abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))) / 2.0


def clip_convex_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Intersect ``subject`` with the convex, counter-clockwise polygon ``clip``.

    Vertices within :data:`CLIP_TOLERANCE` of a clip edge count as inside.
    Returns a ``(K, 2)`` array, possibly with ``K < 3`` for empty or
    degenerate intersections.
    """
    output = [tuple(v) for v in np.asarray(subject, dtype=np.float64)]
    clip = np.asarray(clip, dtype=np.float64)
    n = len(clip)
    for i in range(n):
        if not output:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        norm = math.hypot(ex, ey)
        if norm == 0.0:
            continue

        def side(p):
            # signed distance, positive on the interior (left) side
            return (ex * (p[1] - ay) - ey * (p[0] - ax)) / norm

        inputs = output
        output = []
        prev = inputs[-1]
        d_prev = side(prev)
        for cur in inputs:
            d_cur = side(cur)
            if d_cur >= -CLIP_TOLERANCE:
                if d_prev < -CLIP_TOLERANCE:
                    output.append(_crossing(prev, cur, d_prev, d_cur))
                output.append(cur)
            elif d_prev >= -CLIP_TOLERANCE:
                output.append(_crossing(prev, cur, d_prev, d_cur))
            prev, d_prev = cur, d_cur
    return np.array(output, dtype=np.float64).reshape(-1, 2)


def _crossing(p, q, dp, dq):
    t = dp / (dp - dq)
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def bev_intersection_area(a: Box3D, b: Box3D) -> float:
    pa, pb = bev_polygon(a), bev_polygon(b)
    # bounding-circle reject keeps far-apart pairs cheap
    ra = math.hypot(a.length, a.width) / 2.0
    rb = math.hypot(b.length, b.width) / 2.0
    if math.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1]) > ra + rb:
        return 0.0
    return polygon_area(clip_convex_polygon(pa, pb))


def _ratio(inter: float, size_a: float, size_b: float) -> float:
    union = size_a + size_b - inter
    if union <= 0.0 or inter <= 0.0:
        return 0.0
    return min(1.0, max(0.0, inter / union))


def bev_iou(a: Box3D, b: Box3D) -> float:
    """IoU of the two yaw-rotated footprints in the ground plane."""
    return _ratio(
        bev_intersection_area(a, b), a.length * a.width, b.length * b.width
    )


def vertical_overlap(a: Box3D, b: Box3D) -> float:
    top = min(a.center[2] + a.height / 2.0, b.center[2] + b.height / 2.0)
    bottom = max(a.center[2] - a.height / 2.0, b.center[2] - b.height / 2.0)
    return max(0.0, top - bottom)


def iou_3d(a: Box3D, b: Box3D) -> float:
    """Volume IoU: footprint intersection area times vertical overlap."""
    overlap = vertical_overlap(a, b)
    if overlap <= 0.0:
        return 0.0
    return _ratio(bev_intersection_area(a, b) * overlap, a.volume, b.volume)
