"""Detection scoring: greedy IoU matching, precision-recall curves, AP.

Detections are matched per frame in descending score order; each claims the
unmatched ground-truth box it overlaps most, provided that overlap reaches
the IoU threshold.  Labels from all frames are then pooled into a single
dataset-level precision-recall curve.

Two AP definitions are available.  ``ALL_POINT`` integrates the
max-interpolated precision envelope over every recall step;
``INTERPOLATED_41`` averages that envelope at recall ``0, 0.025, ..., 1``.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from ._kvfile import format_kv, parse_kv
from .annotation_io import FrameAnnotations
from .errors import ConfigError, FrameMismatch, MissingScore, NoGroundTruth
from .geometry import bev_iou, iou_3d


class IoUKind(enum.Enum):
    BEV = "bev"
    FULL_3D = "3d"


class APMode(enum.Enum):
    ALL_POINT = "all_point"
    INTERPOLATED_41 = "interpolated41"


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.3
    iou_kind: IoUKind = IoUKind.FULL_3D
    ap_mode: APMode = APMode.INTERPOLATED_41

    def __post_init__(self) -> None:
        thr = float(self.iou_threshold)
        if not 0.0 < thr <= 1.0:
            raise ConfigError(f"iou_threshold must lie in (0, 1], got {self.iou_threshold!r}")
        object.__setattr__(self, "iou_threshold", thr)
        try:
            object.__setattr__(self, "iou_kind", IoUKind(self.iou_kind))
            object.__setattr__(self, "ap_mode", APMode(self.ap_mode))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def as_dict(self) -> dict[str, object]:
        return {
            "iou_threshold": self.iou_threshold,
            "iou_kind": self.iou_kind.value,
            "ap_mode": self.ap_mode.value,
        }


def parse_eval_config(text: str, base: EvalConfig | None = None) -> EvalConfig:
    updates: dict[str, object] = {}
    for key, value in parse_kv(text).items():
        if key == "iou_threshold":
            try:
                updates[key] = float(value)
            except ValueError:
                raise ConfigError(f"iou_threshold: not a number: {value!r}") from None
        elif key in ("iou_kind", "ap_mode"):
            updates[key] = value.lower()
        else:
            raise ConfigError(f"unknown eval config key {key!r}")
    return replace(base or EvalConfig(), **updates)


def load_eval_config(path: str | os.PathLike, base: EvalConfig | None = None) -> EvalConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_eval_config(text, base)


class DetectionLabel(NamedTuple):
    score: float
    is_tp: bool


@dataclass(frozen=True)
class PRPoint:
    score_threshold: float
    precision: float
    recall: float


def match_detections(
    gt: FrameAnnotations, det: FrameAnnotations, config: EvalConfig = EvalConfig()
) -> list[DetectionLabel]:
    """Label each detection TP or FP; the result follows ``det.objects`` order.

    Detections are visited by descending score, ties in input order.  Ground
    truth is claimed at most once; when two unmatched boxes overlap a
    detection equally, the earlier one wins.  Class names are not compared.

    Raises:
        MissingScore: if any detection lacks a score.
    """
    for i, obj in enumerate(det.objects):
        if obj.score is None:
            raise MissingScore(det.frame_id, i)
    iou = iou_3d if config.iou_kind is IoUKind.FULL_3D else bev_iou
    order = sorted(range(len(det.objects)), key=lambda i: -det.objects[i].score)
    claimed = [False] * len(gt.objects)
    is_tp = [False] * len(det.objects)
    for i in order:
        box = det.objects[i].box
        best_j, best_iou = -1, -1.0
        for j, g in enumerate(gt.objects):
            if claimed[j]:
                continue
            value = iou(box, g.box)
            if value > best_iou:
                best_j, best_iou = j, value
        if best_j >= 0 and best_iou >= config.iou_threshold:
            claimed[best_j] = True
            is_tp[i] = True
    return [DetectionLabel(obj.score, tp) for obj, tp in zip(det.objects, is_tp)]


def _label_arrays(labels: Iterable[tuple[float, bool]]):
    labels = list(labels)
    scores = np.array([s for s, _ in labels], dtype=np.float64)
    tps = np.array([bool(t) for _, t in labels], dtype=bool)
    return scores, tps


def _curve_arrays(labels: Iterable[tuple[float, bool]]):
    """Per distinct score, highest first: threshold, cumulative TP, detections kept."""
    scores, tps = _label_arrays(labels)
    order = np.argsort(-scores, kind="stable")
    scores, tps = scores[order], tps[order]
    cum_tp = np.cumsum(tps, dtype=np.int64)
    # last index of each run of equal scores
    if scores.size:
        ends = np.flatnonzero(np.append(scores[1:] != scores[:-1], True))
    else:
        ends = np.zeros(0, dtype=np.int64)
    return scores[ends], cum_tp[ends], ends + 1


def pr_curve(labels: Iterable[tuple[float, bool]], gt_count: int) -> list[PRPoint]:
    """One point per distinct score, from the highest threshold to the lowest.

    At threshold ``t`` every detection scoring at least ``t`` is counted.
    Recall is reported as 0 when ``gt_count`` is 0.
    """
    if gt_count < 0:
        raise ValueError("gt_count must be nonnegative")
    thresholds, tp, n = _curve_arrays(labels)
    return [
        PRPoint(t, k / m, k / gt_count if gt_count else 0.0)
        for t, k, m in zip(thresholds.tolist(), tp.tolist(), n.tolist())
    ]


def average_precision(
    labels: Iterable[tuple[float, bool]],
    gt_count: int,
    config: EvalConfig | APMode = EvalConfig(),
) -> float:
    """AP of scored TP/FP labels against ``gt_count`` ground-truth objects.

    Raises:
        NoGroundTruth: if ``gt_count`` is 0.
    """
    if gt_count <= 0:
        raise NoGroundTruth()
    mode = config if isinstance(config, APMode) else config.ap_mode
    _, tp, n = _curve_arrays(labels)
    if tp.size == 0:
        return 0.0
    precision = tp / n
    # best precision at or beyond each recall level
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    if mode is APMode.ALL_POINT:
        # integer recall steps keep a perfect detector at exactly 1.0
        steps = np.diff(tp, prepend=0)
        ap = math.fsum((steps * envelope).tolist()) / gt_count
    else:
        recall = tp / gt_count
        grid = np.arange(41) / 40.0
        idx = np.searchsorted(recall, grid, side="left")
        ap = math.fsum(np.append(envelope, 0.0)[idx].tolist()) / grid.size
    return min(1.0, max(0.0, ap))


@dataclass(frozen=True)
class EvalResult:
    ap: float
    curve: tuple[PRPoint, ...]
    tp: int
    fp: int
    fn: int
    num_gt: int
    num_detections: int
    config: EvalConfig

    def summary_text(self) -> str:
        return format_kv(
            {
                "ap": repr(self.ap),
                "tp": self.tp,
                "fp": self.fp,
                "fn": self.fn,
                "num_gt": self.num_gt,
                "num_detections": self.num_detections,
                **self.config.as_dict(),
            }
        )

    def curve_csv(self) -> str:
        rows = ["score_threshold,precision,recall\n"]
        rows += [f"{p.score_threshold!r},{p.precision!r},{p.recall!r}\n" for p in self.curve]
        return "".join(rows)


def _by_frame(frames) -> dict[str, FrameAnnotations]:
    if isinstance(frames, Mapping):
        frames = frames.values()
    out: dict[str, FrameAnnotations] = {}
    for frame in frames:
        if frame.frame_id in out:
            raise ValueError(f"duplicate frame id {frame.frame_id!r}")
        out[frame.frame_id] = frame
    return out


def pooled_labels(gt_frames, det_frames, config: EvalConfig = EvalConfig(), jobs: int = 1):
    """Match every frame and return ``(labels, num_gt)`` pooled over the dataset.

    Labels are ordered by frame (ground-truth order) then detection index.

    Raises:
        FrameMismatch: if a detection frame has no ground-truth counterpart.
    """
    gt = _by_frame(gt_frames)
    det = _by_frame(det_frames)
    for fid in det:
        if fid not in gt:
            raise FrameMismatch("<ground truth>", fid)

    def one(fid):
        return match_detections(gt[fid], det.get(fid, FrameAnnotations(fid)), config)

    if jobs <= 1:
        per_frame = [one(fid) for fid in gt]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_frame = list(pool.map(one, gt))
    labels = [label for frame in per_frame for label in frame]
    return labels, sum(len(f.objects) for f in gt.values())


def evaluate(gt_frames, det_frames, config: EvalConfig = EvalConfig(), jobs: int = 1) -> EvalResult:
    """Dataset-level AP with a single pooled precision-recall curve.

    Ground-truth frames without detections contribute only false negatives.

    Raises:
        FrameMismatch: detection frame id absent from the ground truth.
        MissingScore: an unscored detection.
        NoGroundTruth: no ground-truth objects at all.
    """
    labels, num_gt = pooled_labels(gt_frames, det_frames, config, jobs)
    return result_from_labels(labels, num_gt, config)


def result_from_labels(
    labels: Sequence[DetectionLabel], num_gt: int, config: EvalConfig = EvalConfig()
) -> EvalResult:
    """Build an :class:`EvalResult` from already pooled match labels."""
    ap = average_precision(labels, num_gt, config)
    tp = sum(1 for label in labels if label.is_tp)
    return EvalResult(
        ap=ap,
        curve=tuple(pr_curve(labels, num_gt)),
        tp=tp,
        fp=len(labels) - tp,
        fn=num_gt - tp,
        num_gt=num_gt,
        num_detections=len(labels),
        config=config,
    )
