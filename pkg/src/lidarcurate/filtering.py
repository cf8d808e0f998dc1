"""Training-sample validity filter.

An annotated object is kept only if every enabled constraint accepts it:

* distance: the box center lies within ``eta`` meters of the sensor
  (distance exactly ``eta`` is kept);
* point count: at least ``delta`` LiDAR returns fall inside the box
  (exactly ``delta`` is kept);
* occlusion: its visibility level is not in ``discard_occlusions``
  (by default only fully occluded objects are dropped).

Constraints are evaluated independently per object, so the kept set is the
intersection of the per-constraint kept sets.  Only annotations are
filtered; point clouds pass through untouched.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, NamedTuple, Protocol

from ._kvfile import format_kv, parse_bool, parse_kv
from .annotation_io import (
    Box3D,
    FrameAnnotations,
    OcclusionLevel,
    parse_occlusion_name,
    write_label_file,
)
from .errors import ConfigError, CurationError, FrameError, FrameMismatch, UnknownOcclusionName
from .geometry import center_distance, count_points_in_boxes
from .pointcloud_io import Point3, PointCloud


class Constraint(enum.Enum):
    DISTANCE = "distance"
    POINT_COUNT = "point_count"
    OCCLUSION = "occlusion"


@dataclass(frozen=True)
class FilterConfig:
    """Thresholds and switches for the three constraints.

    With ``use_squared_distance`` the squared center distance is compared
    against ``eta`` instead of the distance itself.
    """

    eta: float = 15.0
    delta: int = 10
    discard_occlusions: frozenset[OcclusionLevel] = frozenset({OcclusionLevel.FULLY_OCCLUDED})
    use_squared_distance: bool = False
    enable_distance: bool = True
    enable_point_count: bool = True
    enable_occlusion: bool = True

    def __post_init__(self) -> None:
        eta = float(self.eta)
        if not (math.isfinite(eta) and eta > 0.0):
            raise ConfigError(f"eta must be a positive finite number, got {self.eta!r}")
        object.__setattr__(self, "eta", eta)
        if isinstance(self.delta, bool) or int(self.delta) != self.delta or self.delta < 0:
            raise ConfigError(f"delta must be a nonnegative integer, got {self.delta!r}")
        object.__setattr__(self, "delta", int(self.delta))
        try:
            levels = frozenset(OcclusionLevel(v) for v in self.discard_occlusions)
        except ValueError as exc:
            raise ConfigError(f"discard_occlusions: {exc}") from None
        object.__setattr__(self, "discard_occlusions", levels)

    @property
    def enabled(self) -> frozenset[Constraint]:
        flags = {
            Constraint.DISTANCE: self.enable_distance,
            Constraint.POINT_COUNT: self.enable_point_count,
            Constraint.OCCLUSION: self.enable_occlusion,
        }
        return frozenset(c for c, on in flags.items() if on)

    def only(self, *constraints: Constraint) -> "FilterConfig":
        """Copy with just the given constraints enabled."""
        return replace(
            self,
            enable_distance=Constraint.DISTANCE in constraints,
            enable_point_count=Constraint.POINT_COUNT in constraints,
            enable_occlusion=Constraint.OCCLUSION in constraints,
        )

    def disable_all(self) -> "FilterConfig":
        return self.only()

    def as_dict(self) -> dict[str, object]:
        return {
            "eta": self.eta,
            "delta": self.delta,
            "discard_occlusions": sorted(level.label for level in self.discard_occlusions),
            "use_squared_distance": self.use_squared_distance,
            "enable_distance": self.enable_distance,
            "enable_point_count": self.enable_point_count,
            "enable_occlusion": self.enable_occlusion,
        }

    def to_text(self) -> str:
        d = self.as_dict()
        d["discard_occlusions"] = ",".join(d["discard_occlusions"]) or "none"
        return format_kv({k: str(v).lower() if isinstance(v, bool) else v for k, v in d.items()})


def parse_occlusion_set(value: str) -> frozenset[OcclusionLevel]:
    """Comma-separated category names or integers 0-3; ``none`` or empty means no level."""
    levels = set()
    for item in value.split(","):
        item = item.strip()
        if not item or item.lower() == "none":
            continue
        if item.isdigit():
            try:
                levels.add(OcclusionLevel(int(item)))
            except ValueError:
                raise ConfigError(f"occlusion level {item!r} outside 0-3") from None
        else:
            try:
                levels.add(parse_occlusion_name(item))
            except UnknownOcclusionName as exc:
                raise ConfigError(str(exc)) from None
    return frozenset(levels)


_BOOL_KEYS = {f.name for f in fields(FilterConfig) if f.type in ("bool", bool)}


def parse_filter_config(text: str, base: FilterConfig | None = None) -> FilterConfig:
    """Read ``key=value`` lines (``eta=15``, ``enable_occlusion=false``, ...)."""
    updates: dict[str, object] = {}
    for key, value in parse_kv(text).items():
        try:
            if key == "eta":
                updates[key] = float(value)
            elif key == "delta":
                updates[key] = int(value)
            elif key == "discard_occlusions":
                updates[key] = parse_occlusion_set(value)
            elif key in _BOOL_KEYS:
                updates[key] = parse_bool(key, value)
            else:
                raise ConfigError(f"unknown filter config key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{key}: {exc}") from None
    return replace(base or FilterConfig(), **updates)


def load_filter_config(path: str | os.PathLike, base: FilterConfig | None = None) -> FilterConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_filter_config(text, base)


# -- single constraints -------------------------------------------------------


def distance_constraint(sensor: Point3, box: Box3D, config: FilterConfig) -> bool:
    """Keep when the center distance (or its square) is at most ``eta``."""
    return center_distance(sensor, box, squared=config.use_squared_distance) <= config.eta


def point_count_constraint(n: int, config: FilterConfig) -> bool:
    return n >= config.delta


def occlusion_constraint(level: OcclusionLevel, config: FilterConfig) -> bool:
    return OcclusionLevel(level) not in config.discard_occlusions


# -- per frame ------------------------------------------------------------------


@dataclass(frozen=True)
class FilterVerdict:
    """Outcome for one object.

    ``failed_constraints`` lists every constraint the object violates,
    including disabled ones; only enabled failures affect ``kept``.
    """

    kept: bool
    failed_constraints: frozenset[Constraint]
    measured_distance: float
    measured_point_count: int


class FilterResult(NamedTuple):
    kept: FrameAnnotations
    verdicts: tuple[FilterVerdict, ...]


def apply_filters(
    cloud: PointCloud, annotations: FrameAnnotations, config: FilterConfig
) -> FilterResult:
    """Split one frame's objects into kept and discarded.

    Returns the kept objects (input order, with ``cached_point_count`` set)
    and one verdict per input object.

    Raises:
        FrameMismatch: if the cloud and annotations carry different frame ids.
    """
    if cloud.frame_id != annotations.frame_id:
        raise FrameMismatch(annotations.frame_id, cloud.frame_id)
    objects = annotations.objects
    counts = count_points_in_boxes(cloud, [obj.box for obj in objects])
    enabled = config.enabled
    sensor = annotations.sensor_position

    kept, verdicts = [], []
    for obj, n in zip(objects, counts.tolist()):
        failed = set()
        if not distance_constraint(sensor, obj.box, config):
            failed.add(Constraint.DISTANCE)
        if not point_count_constraint(n, config):
            failed.add(Constraint.POINT_COUNT)
        if not occlusion_constraint(obj.occlusion, config):
            failed.add(Constraint.OCCLUSION)
        keep = not (failed & enabled)
        verdicts.append(
            FilterVerdict(keep, frozenset(failed), center_distance(sensor, obj.box), n)
        )
        if keep:
            kept.append(obj.with_point_count(n))
    return FilterResult(annotations.with_objects(kept), tuple(verdicts))


# -- reporting ----------------------------------------------------------------


@dataclass
class Tally:
    total: int = 0
    kept: int = 0
    discarded: int = 0
    # objects with several failed constraints count once under each
    discarded_by: dict[str, int] = field(
        default_factory=lambda: {c.value: 0 for c in Constraint}
    )

    def add(self, other: "Tally") -> None:
        self.total += other.total
        self.kept += other.kept
        self.discarded += other.discarded
        for key, n in other.discarded_by.items():
            self.discarded_by[key] = self.discarded_by.get(key, 0) + n

    def as_dict(self) -> dict[str, object]:
        return {
            "total": self.total,
            "kept": self.kept,
            "discarded": self.discarded,
            "discarded_by": dict(sorted(self.discarded_by.items())),
        }


@dataclass
class FilterReport:
    """Aggregate, per-frame and per-class tallies.

    :meth:`merge` is associative and commutative, so per-frame reports can be
    combined in any order.
    """

    overall: Tally = field(default_factory=Tally)
    per_frame: dict[str, Tally] = field(default_factory=dict)
    per_class: dict[str, Tally] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return self.overall.total

    @property
    def kept(self) -> int:
        return self.overall.kept

    @property
    def discarded(self) -> int:
        return self.overall.discarded

    @classmethod
    def for_frame(
        cls,
        annotations: FrameAnnotations,
        verdicts: Iterable[FilterVerdict],
        config: FilterConfig,
    ) -> "FilterReport":
        report = cls()
        frame = report.per_frame.setdefault(annotations.frame_id, Tally())
        enabled = config.enabled
        for obj, verdict in zip(annotations.objects, verdicts):
            one = Tally(total=1)
            if verdict.kept:
                one.kept = 1
            else:
                one.discarded = 1
                for c in verdict.failed_constraints & enabled:
                    one.discarded_by[c.value] += 1
            frame.add(one)
            report.per_class.setdefault(obj.class_name, Tally()).add(one)
            report.overall.add(one)
        return report

    def update(self, other: "FilterReport") -> None:
        """Add ``other``'s tallies into this report in place."""
        self.overall.add(other.overall)
        for key, tally in other.per_frame.items():
            self.per_frame.setdefault(key, Tally()).add(tally)
        for key, tally in other.per_class.items():
            self.per_class.setdefault(key, Tally()).add(tally)

    def merge(self, other: "FilterReport") -> "FilterReport":
        out = FilterReport()
        out.update(self)
        out.update(other)
        return out

    def as_dict(self) -> dict[str, object]:
        return {
            **self.overall.as_dict(),
            "per_frame": {k: v.as_dict() for k, v in sorted(self.per_frame.items())},
            "per_class": {k: v.as_dict() for k, v in sorted(self.per_class.items())},
        }


VERDICT_HEADER = "frame_id,index,class,kept,failed,distance,point_count"


def format_verdict_rows(annotations: FrameAnnotations, verdicts: Iterable[FilterVerdict]) -> str:
    """CSV rows (no header) for an audit trail; ``failed`` is ``;``-joined."""
    rows = []
    for i, (obj, v) in enumerate(zip(annotations.objects, verdicts)):
        failed = ";".join(sorted(c.value for c in v.failed_constraints))
        rows.append(
            f"{annotations.frame_id},{i},{obj.class_name},{str(v.kept).lower()},"
            f"{failed},{v.measured_distance!r},{v.measured_point_count}\n"
        )
    return "".join(rows)


# -- datasets -----------------------------------------------------------------


class LabelSink(Protocol):
    def write(self, frame_id: str, text: str) -> None: ...


class DirectorySink:
    """Writes ``<frame_id><suffix>`` files under ``root``."""

    def __init__(self, root: str | os.PathLike, suffix: str = ".txt") -> None:
        self.root = Path(root)
        self.suffix = suffix
        self.root.mkdir(parents=True, exist_ok=True)

    def write(self, frame_id: str, text: str) -> None:
        with open(self.root / f"{frame_id}{self.suffix}", "w", newline="\n") as fh:
            fh.write(text)


class MemorySink(dict):
    def write(self, frame_id: str, text: str) -> None:
        self[frame_id] = text


def _filter_one(frame, config):
    cloud, annotations = frame
    try:
        kept, verdicts = apply_filters(cloud, annotations, config)
    except CurationError as exc:
        raise FrameError(annotations.frame_id, exc) from exc
    return annotations, kept, verdicts


def filter_dataset(
    frames: Iterable[tuple[PointCloud, FrameAnnotations]],
    config: FilterConfig,
    sink: LabelSink,
    jobs: int = 1,
) -> FilterReport:
    """Filter every frame and write its kept labels to ``sink``.

    Frames may be processed on ``jobs`` threads; writes always happen in
    input order, so the output does not depend on scheduling.

    Raises:
        FrameError: wrapping the first failure, tagged with its frame id.
    """
    report = FilterReport()

    def consume(results):
        for annotations, kept, verdicts in results:
            try:
                sink.write(annotations.frame_id, write_label_file(kept))
            except OSError as exc:
                raise FrameError(annotations.frame_id, exc) from exc
            report.update(FilterReport.for_frame(annotations, verdicts, config))

    if jobs <= 1:
        consume(_filter_one(frame, config) for frame in frames)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            consume(pool.map(lambda f: _filter_one(f, config), frames))
    return report
