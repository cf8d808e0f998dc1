"""``lidarcurate`` command line: filter, stats and eval over whole datasets.

Exit codes:

    0  success
    2  bad configuration or command-line usage
    3  manifest, I/O or parse failure in some frame (partial outputs removed)
    4  a detection without a score was given to ``eval``
    5  ``eval`` found no ground-truth objects

Set ``LIDARCURATE_LOG`` (``DEBUG``, ``INFO``, ``WARNING``, ...) for log output
on standard error.  Outputs do not depend on ``--jobs``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

from .annotation_io import write_label_file
from .errors import ConfigError, CurationError, FrameError, MissingScore, NoGroundTruth
from .evaluation import (
    APMode,
    EvalConfig,
    IoUKind,
    load_eval_config,
    match_detections,
    result_from_labels,
)
from .filtering import (
    VERDICT_HEADER,
    FilterConfig,
    FilterReport,
    apply_filters,
    format_verdict_rows,
    load_filter_config,
    parse_occlusion_set,
)
from .geometry import center_distance, count_points_in_boxes
from .manifest import DatasetManifest, FrameEntry, format_manifest, read_manifest

log = logging.getLogger("lidarcurate")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FRAME = 3
EXIT_UNSCORED = 4
EXIT_NO_GT = 5

STATS_HEADER = "frame_id,class,distance,point_count,occlusion"


class CommandError(Exception):
    def __init__(self, code: int, message: str) -> None:
        super().__init__(message)
        self.code = code


def _map(fn: Callable, items: Sequence, jobs: int) -> Iterable:
    """Ordered map, in-process for one job or a single item."""
    if jobs <= 1 or len(items) <= 1:
        return map(fn, items)
    pool = ProcessPoolExecutor(max_workers=min(jobs, len(items)))
    try:
        return list(pool.map(fn, items))
    finally:
        pool.shutdown(cancel_futures=True)


def _tagged(entry: FrameEntry, fn, *args):
    try:
        return fn(*args)
    except FrameError:
        raise
    except (CurationError, OSError, UnicodeDecodeError) as exc:
        raise FrameError(entry.frame_id, exc) from exc


# -- workers (module level so they pickle) ------------------------------------


def _filter_task(args):
    entry, config = args

    def run():
        annotations = entry.load_labels()
        kept, verdicts = apply_filters(entry.load_cloud(), annotations, config)
        return (
            write_label_file(kept),
            format_verdict_rows(annotations, verdicts),
            FilterReport.for_frame(annotations, verdicts, config),
        )

    return _tagged(entry, run)


def _stats_task(entry: FrameEntry) -> str:
    def run():
        annotations = entry.load_labels()
        cloud = entry.load_cloud()
        counts = count_points_in_boxes(cloud, [o.box for o in annotations.objects])
        rows = []
        for obj, n in zip(annotations.objects, counts.tolist()):
            d = center_distance(annotations.sensor_position, obj.box)
            rows.append(f"{entry.frame_id},{obj.class_name},{d!r},{n},{obj.occlusion.label}\n")
        return "".join(rows)

    return _tagged(entry, run)


def _eval_task(args):
    gt_entry, det_entry, config = args

    def run():
        gt = gt_entry.load_labels()
        det = det_entry.load_labels() if det_entry is not None else replace(gt, objects=())
        det = replace(det, frame_id=gt.frame_id)
        return match_detections(gt, det, config), len(gt.objects)

    try:
        return _tagged(gt_entry, run)
    except FrameError as exc:
        if isinstance(exc.cause, MissingScore):
            raise exc.cause from None
        raise


# -- configuration -------------------------------------------------------------


def _filter_config(args) -> FilterConfig:
    config = FilterConfig()
    if args.config:
        config = load_filter_config(args.config, config)
    updates: dict[str, object] = {}
    if args.eta is not None:
        updates["eta"] = args.eta
    if args.delta is not None:
        updates["delta"] = args.delta
    if args.discard_occlusions is not None:
        updates["discard_occlusions"] = parse_occlusion_set(args.discard_occlusions)
    if args.use_squared_distance:
        updates["use_squared_distance"] = True
    if args.disable_distance or args.disable_all:
        updates["enable_distance"] = False
    if args.disable_point_count or args.disable_all:
        updates["enable_point_count"] = False
    if args.disable_occlusion or args.disable_all:
        updates["enable_occlusion"] = False
    return replace(config, **updates)


def _eval_config(args) -> EvalConfig:
    config = EvalConfig()
    if args.config:
        config = load_eval_config(args.config, config)
    updates: dict[str, object] = {}
    if args.iou_threshold is not None:
        updates["iou_threshold"] = args.iou_threshold
    if args.iou_kind is not None:
        updates["iou_kind"] = IoUKind(args.iou_kind)
    if args.ap_mode is not None:
        updates["ap_mode"] = APMode(args.ap_mode)
    return replace(config, **updates)


def _manifest(path, need_clouds: bool) -> DatasetManifest:
    try:
        manifest = read_manifest(path)
        manifest.check_files(need_clouds=need_clouds)
    except CurationError as exc:
        raise CommandError(EXIT_FRAME, str(exc)) from None
    return manifest


# -- commands ----------------------------------------------------------------


def _publish(staging: Path, output: Path) -> None:
    """Move everything under ``staging`` into ``output``."""
    if not output.exists():
        os.replace(staging, output)
        return
    for src in sorted(staging.rglob("*")):
        if src.is_file():
            dst = output / src.relative_to(staging)
            dst.parent.mkdir(parents=True, exist_ok=True)
            os.replace(src, dst)
    shutil.rmtree(staging, ignore_errors=True)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def cmd_filter(args) -> int:
    config = _filter_config(args)
    manifest = _manifest(args.manifest, need_clouds=True)
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".lidarcurate-", dir=output.parent))
    staging.chmod(0o755)
    try:
        results = _map(_filter_task, [(e, config) for e in manifest.frames], args.jobs)
        report = FilterReport()
        verdict_rows = [VERDICT_HEADER + "\n"]
        for entry, (labels, rows, frame_report) in zip(manifest.frames, results):
            _write(staging / entry.relative_label, labels)
            verdict_rows.append(rows)
            report.update(frame_report)
        if args.verdicts:
            _write(staging / "verdicts.csv", "".join(verdict_rows))
        _write(staging / "manifest.tsv", format_manifest(manifest.frames))
        doc = {"config": config.as_dict(), "report": report.as_dict()}
        _write(staging / "report.json", json.dumps(doc, sort_keys=True, indent=2) + "\n")
    except (FrameError, OSError) as exc:
        shutil.rmtree(staging, ignore_errors=True)
        raise CommandError(EXIT_FRAME, str(exc)) from None
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    _publish(staging, output)
    log.info("kept %d of %d objects in %d frames", report.kept, report.total, len(manifest))
    return EXIT_OK


def cmd_stats(args) -> int:
    manifest = _manifest(args.manifest, need_clouds=True)
    try:
        rows = list(_map(_stats_task, list(manifest.frames), args.jobs))
    except (FrameError, OSError) as exc:
        raise CommandError(EXIT_FRAME, str(exc)) from None
    text = STATS_HEADER + "\n" + "".join(rows)
    if args.output:
        _write(Path(args.output), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _eval_config(args)
    gt = _manifest(args.gt, need_clouds=False)
    det = _manifest(args.det, need_clouds=False)
    gt_ids = gt.by_frame_id()
    det_ids = det.by_frame_id()
    unknown = sorted(set(det_ids) - set(gt_ids))
    if unknown:
        raise CommandError(EXIT_FRAME, f"detection frames without ground truth: {unknown}")
    tasks = [(e, det_ids.get(e.frame_id), config) for e in gt.frames]
    try:
        per_frame = list(_map(_eval_task, tasks, args.jobs))
    except MissingScore as exc:
        raise CommandError(EXIT_UNSCORED, str(exc)) from None
    except (FrameError, OSError) as exc:
        raise CommandError(EXIT_FRAME, str(exc)) from None
    labels = [label for frame_labels, _ in per_frame for label in frame_labels]
    num_gt = sum(n for _, n in per_frame)
    try:
        result = result_from_labels(labels, num_gt, config)
    except NoGroundTruth as exc:
        raise CommandError(EXIT_NO_GT, str(exc)) from None

    summary = result.summary_text()
    if args.output:
        out = Path(args.output)
        _write(out / "summary.txt", summary)
        _write(out / "pr_curve.csv", result.curve_csv())
    sys.stdout.write(summary)
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lidarcurate",
        description="Curate LiDAR detection training labels and score detections.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    jobs_default = os.cpu_count() or 1

    p = sub.add_parser("filter", help="drop annotations that fail the sample-validity constraints")
    p.add_argument("manifest", help="manifest file or dataset directory")
    p.add_argument("--output", "-o", required=True, help="directory for filtered label files")
    p.add_argument("--config", help="key=value filter configuration file")
    p.add_argument("--eta", type=float, help="maximum sensor-to-center distance (m), default 15")
    p.add_argument("--delta", type=int, help="minimum in-box point count, default 10")
    p.add_argument("--discard-occlusions", help="comma-separated levels to drop, e.g. fully_occluded")
    p.add_argument("--use-squared-distance", action="store_true",
                   help="compare the squared distance against eta")
    p.add_argument("--disable-distance", action="store_true")
    p.add_argument("--disable-point-count", action="store_true")
    p.add_argument("--disable-occlusion", action="store_true")
    p.add_argument("--disable-all", action="store_true")
    p.add_argument("--verdicts", action="store_true", help="also write verdicts.csv")
    p.add_argument("--jobs", "-j", type=_positive_int, default=jobs_default)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("stats", help="per-object distance, point count and occlusion as CSV")
    p.add_argument("manifest")
    p.add_argument("--output", "-o", help="write CSV here instead of standard output")
    p.add_argument("--jobs", "-j", type=_positive_int, default=jobs_default)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval", help="match detections to ground truth and compute AP")
    p.add_argument("gt", help="ground-truth manifest or label directory")
    p.add_argument("det", help="detection manifest or label directory")
    p.add_argument("--output", "-o", help="directory for summary.txt and pr_curve.csv")
    p.add_argument("--config", help="key=value evaluation configuration file")
    p.add_argument("--iou-threshold", type=float)
    p.add_argument("--iou-kind", choices=[k.value for k in IoUKind])
    p.add_argument("--ap-mode", choices=[m.value for m in APMode])
    p.add_argument("--jobs", "-j", type=_positive_int, default=jobs_default)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("LIDARCURATE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"lidarcurate: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CommandError as exc:
        print(f"lidarcurate: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
