"""Curate LiDAR 3D-detection training labels and score detections.

The filter keeps an annotated object only when its box center is close
enough to the sensor, enough returns fall inside the box, and it is not
(fully) occluded.  The evaluation side matches detections to ground truth
by IoU and reports precision-recall curves and average precision.
"""

from .annotation_io import (
    Box3D,
    FrameAnnotations,
    KittiExtras,
    ObjectAnnotation,
    OcclusionLevel,
    load_labels,
    normalize_yaw,
    parse_label_file,
    parse_occlusion_name,
    write_label_file,
)
from .errors import (
    ConfigError,
    CurationError,
    FrameError,
    FrameMismatch,
    InvalidOcclusion,
    MalformedLine,
    MissingScore,
    NoGroundTruth,
    NonPositiveDimension,
    TruncatedRecord,
    UnknownOcclusionName,
)
from .evaluation import (
    APMode,
    DetectionLabel,
    EvalConfig,
    EvalResult,
    IoUKind,
    PRPoint,
    average_precision,
    evaluate,
    match_detections,
    pr_curve,
)
from .filtering import (
    Constraint,
    FilterConfig,
    FilterReport,
    FilterVerdict,
    apply_filters,
    distance_constraint,
    filter_dataset,
    occlusion_constraint,
    point_count_constraint,
)
from .geometry import (
    bev_iou,
    box_corners,
    center_distance,
    count_points_in_box,
    count_points_in_boxes,
    iou_3d,
    point_in_box,
)
from .pointcloud_io import Point3, PointCloud, load_cloud, parse_ascii_xyz, parse_bin, save_bin, to_bin

__version__ = "0.1.0"
