"""
Filtering annotations by distance, point count and occlusion
============================================================

Apply the three validity constraints to a synthetic frame, look at why each
object was kept or dropped, then run the same filter over a dataset on disk
with the ``lidarcurate filter`` command.
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from lidarcurate import (
    Box3D,
    Constraint,
    FilterConfig,
    FilterReport,
    FrameAnnotations,
    ObjectAnnotation,
    OcclusionLevel,
    PointCloud,
    apply_filters,
    save_bin,
    write_label_file,
)
from lidarcurate.cli import main

rng = np.random.default_rng(1)


def fill(box, n):
    """``n`` points spread through the middle of ``box``."""
    half = np.array([box.length, box.width, box.height]) * 0.4
    c, s = np.cos(box.yaw), np.sin(box.yaw)
    local = rng.uniform(-half, half, size=(n, 3))
    x = c * local[:, 0] - s * local[:, 1] + box.center[0]
    y = s * local[:, 0] + c * local[:, 1] + box.center[1]
    return np.column_stack([x, y, local[:, 2] + box.center[2]])


# %%
# Five pedestrians.  One is too far, one has too few points, one is fully
# occluded and two are fine, one of them sitting exactly at 15 m.
specs = [
    ((5.0, 2.0), 60, OcclusionLevel.FULLY_VISIBLE),
    ((9.0, 12.0), 10, OcclusionLevel.MOSTLY_VISIBLE),  # 15 m and 10 points: both limits are inclusive
    ((25.0, 0.0), 80, OcclusionLevel.FULLY_VISIBLE),
    ((4.0, -6.0), 4, OcclusionLevel.FULLY_VISIBLE),
    ((7.0, -1.0), 50, OcclusionLevel.FULLY_OCCLUDED),
]
objects, parts = [], []
for (x, y), n, occ in specs:
    box = Box3D((x, y, 0.0), 0.8, 0.6, 1.7, rng.uniform(-3, 3))
    objects.append(ObjectAnnotation("Pedestrian", box, occ))
    parts.append(fill(box, n))
frame = FrameAnnotations("000007", objects)
cloud = PointCloud.from_points(np.vstack(parts), frame.frame_id)

# %%
# The defaults are eta = 15 m, delta = 10 points and discard {fully occluded}.
config = FilterConfig()
kept, verdicts = apply_filters(cloud, frame, config)
for v in verdicts:
    failed = ", ".join(sorted(c.value for c in v.failed_constraints)) or "-"
    print(f"kept={v.kept!s:<5} distance={v.measured_distance:5.2f} points={v.measured_point_count:3d} failed={failed}")
print(f"{len(kept.objects)} of {len(frame.objects)} kept")

# %%
# Constraints can be switched off one at a time, for example to study how
# much each one removes.
for c in Constraint:
    only = config.only(c)
    print(c.value, FilterReport.for_frame(frame, apply_filters(cloud, frame, only).verdicts, only).discarded)

# %%
# On disk: write the frame KITTI-style and call the command-line tool.
root = Path(tempfile.mkdtemp())
(root / "velodyne").mkdir()
(root / "label").mkdir()
save_bin(cloud, root / "velodyne" / "000007.bin")
(root / "label" / "000007.txt").write_text(write_label_file(frame))

code = main(["filter", str(root), "--output", str(root / "filtered"), "--verdicts", "--jobs", "1"])
assert code == 0
print((root / "filtered" / "label" / "000007.txt").read_text())
print(json.dumps(json.loads((root / "filtered" / "report.json").read_text())["report"]["discarded_by"]))
