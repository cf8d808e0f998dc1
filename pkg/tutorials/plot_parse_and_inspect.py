"""
Reading a frame and counting points in boxes
============================================

Build a small point cloud and a label file, write them in the KITTI-style
formats, read them back and ask how many points fall inside each box.
"""

import math
import tempfile
from pathlib import Path

import numpy as np

from lidarcurate import (
    Box3D,
    FrameAnnotations,
    ObjectAnnotation,
    OcclusionLevel,
    PointCloud,
    load_cloud,
    parse_label_file,
    save_bin,
    write_label_file,
)
from lidarcurate.geometry import box_corners, center_distance, count_points_in_boxes

rng = np.random.default_rng(0)
workdir = Path(tempfile.mkdtemp())

# %%
# Two pedestrians and a car.  Boxes are centered, with yaw about +z.
objects = [
    ObjectAnnotation("Pedestrian", Box3D((6.0, 1.0, 0.0), 0.8, 0.6, 1.7, 0.3)),
    ObjectAnnotation("Pedestrian", Box3D((12.0, -4.0, 0.0), 0.8, 0.6, 1.7, -1.2),
                     OcclusionLevel.SEVERELY_OCCLUDED),
    ObjectAnnotation("Car", Box3D((20.0, 3.0, 0.0), 4.2, 1.8, 1.5, math.pi / 2),
                     OcclusionLevel.FULLY_OCCLUDED),
]
frame = FrameAnnotations("000042", objects)

# %%
# A cloud: scattered background plus a few returns from the first pedestrian.
background = rng.uniform([-30, -30, -2], [30, 30, 2], size=(5000, 3))
body = np.asarray(objects[0].box.center[:3]) + rng.uniform(-0.2, 0.2, size=(40, 3))
cloud = PointCloud.from_points(np.vstack([background, body]), frame.frame_id)

# %%
# Write both files.  Binary clouds are little-endian float32 x, y, z, intensity.
save_bin(cloud, workdir / "000042.bin")
(workdir / "000042.txt").write_text(write_label_file(frame))
print((workdir / "000042.txt").read_text())

# %%
# Read them back.  The round trip is exact.
cloud_back = load_cloud(workdir / "000042.bin")
frame_back = parse_label_file((workdir / "000042.txt").read_text(), "000042")
assert cloud_back == cloud and frame_back == frame
print(f"{len(cloud_back)} points, {cloud_back.report.dropped_nonfinite} non-finite dropped")

# %%
# Distance from the sensor and points inside each box.
counts = count_points_in_boxes(cloud_back, [o.box for o in frame_back.objects])
for obj, n in zip(frame_back.objects, counts):
    d = center_distance(frame_back.sensor_position, obj.box)
    print(f"{obj.class_name:<10} {obj.occlusion.label:<18} distance {d:6.2f} m  points {n}")

# %%
# The eight corners: bottom face counter-clockwise seen from above, then the top.
print(np.round(box_corners(objects[0].box), 3))
