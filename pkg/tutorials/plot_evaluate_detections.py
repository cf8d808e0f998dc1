"""
Scoring detections: IoU, precision-recall and average precision
===============================================================

Match scored detections to ground truth by 3D IoU, trace the
precision-recall curve and compare the two AP integration rules.
"""

import numpy as np

from lidarcurate import (
    APMode,
    Box3D,
    EvalConfig,
    FrameAnnotations,
    IoUKind,
    ObjectAnnotation,
    bev_iou,
    evaluate,
    iou_3d,
)

rng = np.random.default_rng(2)

# %%
# IoU of two overlapping rotated boxes, in bird's-eye view and in 3D.
a = Box3D((0.0, 0.0, 0.0), 4.0, 2.0, 1.5, 0.0)
b = Box3D((0.8, 0.3, 0.4), 4.0, 2.0, 1.5, 0.35)
print(f"BEV IoU {bev_iou(a, b):.4f}, 3D IoU {iou_3d(a, b):.4f}")

# %%
# Ground truth for a few frames, and a noisy detector: most objects are found
# with a small offset, some are missed, and there are a few false alarms.
gt, det = [], []
for i in range(5):
    truth = [ObjectAnnotation("Pedestrian", Box3D((*rng.uniform(-15, 15, 2), 0.0), 0.8, 0.6, 1.7,
                                                  rng.uniform(-3, 3)))
             for _ in range(6)]
    found = []
    for o in truth:
        if rng.uniform() < 0.8:
            shifted = Box3D(tuple(np.asarray(o.box.center[:3]) + rng.normal(0, 0.1, 3)),
                            o.box.length, o.box.width, o.box.height, o.box.yaw)
            found.append(ObjectAnnotation("Pedestrian", shifted, score=float(rng.uniform(0.4, 1.0))))
    for _ in range(2):
        ghost = Box3D((*rng.uniform(-15, 15, 2), 0.0), 0.8, 0.6, 1.7)
        found.append(ObjectAnnotation("Pedestrian", ghost, score=float(rng.uniform(0.0, 0.7))))
    gt.append(FrameAnnotations(f"{i:06d}", truth))
    det.append(FrameAnnotations(f"{i:06d}", found))

# %%
# The defaults are 3D IoU at 0.3 with 41-point interpolated AP.
result = evaluate(gt, det)
print(result.summary_text())

# %%
# The curve has one point per distinct score; this is what to plot.
for p in result.curve[:5]:
    print(f"score >= {p.score_threshold:.3f}: precision {p.precision:.3f} recall {p.recall:.3f}")

# %%
# All-point integration and a stricter overlap threshold.
for config in (EvalConfig(ap_mode=APMode.ALL_POINT),
               EvalConfig(iou_threshold=0.5),
               EvalConfig(iou_kind=IoUKind.BEV)):
    print(config.as_dict(), f"AP {evaluate(gt, det, config).ap:.4f}")
