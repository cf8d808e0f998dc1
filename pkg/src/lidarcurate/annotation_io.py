"""Per-frame object annotations in an extended KITTI-style label format.

Each non-empty line describes one object::

    class truncated occluded alpha x1 y1 x2 y2 h w l cx cy cz yaw [score]

``occluded`` is an integer visibility slot (0 fully visible ... 3 fully
occluded).  ``cx cy cz`` is the geometric center of the box in sensor
coordinates, ``h w l`` its height, width and length in meters, and ``yaw``
the heading about the vertical axis in radians.  The trailing ``score`` is
present for detections only.  ``truncated``, ``alpha`` and the 2D image box
are validated as numbers but carried through untouched.
"""

from __future__ import annotations

import enum
import math
import os
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

from .errors import InvalidOcclusion, MalformedLine, NonPositiveDimension, UnknownOcclusionName
from .pointcloud_io import Point3

ORIGIN = Point3(0.0, 0.0, 0.0)


class OcclusionLevel(enum.IntEnum):
    """Annotated visibility, ordered from least to most occluded."""

    FULLY_VISIBLE = 0
    MOSTLY_VISIBLE = 1
    SEVERELY_OCCLUDED = 2
    FULLY_OCCLUDED = 3

    @property
    def label(self) -> str:
        return self.name.lower()


_OCCLUSION_NAMES = {
    "fullyvisible": OcclusionLevel.FULLY_VISIBLE,
    "mostlyvisible": OcclusionLevel.MOSTLY_VISIBLE,
    "severelyoccluded": OcclusionLevel.SEVERELY_OCCLUDED,
    # a common misspelling in label documentation
    "severlyoccluded": OcclusionLevel.SEVERELY_OCCLUDED,
    "fullyoccluded": OcclusionLevel.FULLY_OCCLUDED,
}


def parse_occlusion_name(name: str) -> OcclusionLevel:
    """Map a category name such as ``"Fully Occluded"`` to its level.

    Matching ignores case, and spaces and underscores are interchangeable
    (or may be left out entirely, as in ``"FullyOccluded"``).
    """
    key = re.sub(r"[\s_]+", "", name.strip().lower())
    try:
        return _OCCLUSION_NAMES[key]
    except KeyError:
        raise UnknownOcclusionName(name) from None


def normalize_yaw(yaw: float) -> float:
    """Wrap an angle into ``(-pi, pi]``."""
    wrapped = math.remainder(yaw, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped = math.pi
    return wrapped


@dataclass(frozen=True)
class Box3D:
    """Oriented box: geometric center, extents along its local axes, heading.

    ``length`` runs along the local x axis (the heading direction),
    ``width`` along local y and ``height`` along z.
    """

    center: Point3
    length: float
    width: float
    height: float
    yaw: float = 0.0

    def __post_init__(self) -> None:
        c = self.center
        object.__setattr__(self, "center", Point3(float(c[0]), float(c[1]), float(c[2])))
        for name in ("length", "width", "height"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0.0):
                raise NonPositiveDimension(name, value)
            object.__setattr__(self, name, value)
        if not math.isfinite(self.yaw):
            raise ValueError(f"yaw must be finite, got {self.yaw!r}")
        object.__setattr__(self, "yaw", normalize_yaw(float(self.yaw)))

    @property
    def volume(self) -> float:
        return self.length * self.width * self.height


class KittiExtras(NamedTuple):
    """Label fields the filter ignores, kept as their original tokens."""

    truncated: str = "0"
    alpha: str = "0"
    x1: str = "0"
    y1: str = "0"
    x2: str = "0"
    y2: str = "0"


@dataclass(frozen=True)
class ObjectAnnotation:
    class_name: str
    box: Box3D
    occlusion: OcclusionLevel = OcclusionLevel.FULLY_VISIBLE
    score: Optional[float] = None
    extras: KittiExtras = KittiExtras()
    # in-box point count for the frame the object was filtered against
    cached_point_count: Optional[int] = field(default=None, compare=False)
    # original label line, re-emitted on write while it still describes the object
    source_line: Optional[str] = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if not self.class_name or any(ch.isspace() for ch in self.class_name):
            raise ValueError(f"class name must be a single non-empty token: {self.class_name!r}")
        object.__setattr__(self, "occlusion", OcclusionLevel(self.occlusion))
        object.__setattr__(self, "extras", KittiExtras(*self.extras))
        if self.score is not None:
            score = float(self.score)
            if not 0.0 <= score <= 1.0:
                raise ValueError(f"score must lie in [0, 1], got {score!r}")
            object.__setattr__(self, "score", score)
        if self.cached_point_count is not None and self.cached_point_count < 0:
            raise ValueError("cached_point_count must be nonnegative")

    def with_point_count(self, n: int) -> "ObjectAnnotation":
        return replace(self, cached_point_count=int(n))


@dataclass(frozen=True)
class FrameAnnotations:
    frame_id: str
    objects: tuple[ObjectAnnotation, ...] = ()
    sensor_position: Point3 = ORIGIN

    def __post_init__(self) -> None:
        object.__setattr__(self, "objects", tuple(self.objects))
        p = self.sensor_position
        object.__setattr__(self, "sensor_position", Point3(float(p[0]), float(p[1]), float(p[2])))

    def __len__(self) -> int:
        return len(self.objects)

    def with_objects(self, objects: Sequence[ObjectAnnotation]) -> "FrameAnnotations":
        return replace(self, objects=tuple(objects))


def _number(token: str, lineno: int, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise MalformedLine(lineno, f"{what} is not a number: {token!r}") from None


def _parse_line(line: str, lineno: int) -> ObjectAnnotation:
    tokens = line.split()
    if len(tokens) not in (15, 16):
        raise MalformedLine(lineno, f"expected 15 or 16 fields, got {len(tokens)}")
    class_name = tokens[0]
    extras = KittiExtras(tokens[1], tokens[3], *tokens[4:8])
    for what, tok in zip(KittiExtras._fields, extras):
        _number(tok, lineno, what)

    try:
        occ_value = int(tokens[2])
    except ValueError:
        raise MalformedLine(lineno, f"occlusion is not an integer: {tokens[2]!r}") from None
    if not 0 <= occ_value <= 3:
        raise InvalidOcclusion(occ_value)

    h, w, l, cx, cy, cz, yaw = (
        _number(tok, lineno, name)
        for tok, name in zip(tokens[8:15], ("h", "w", "l", "cx", "cy", "cz", "yaw"))
    )
    if not all(math.isfinite(v) for v in (cx, cy, cz, yaw)):
        raise MalformedLine(lineno, "center and yaw must be finite")
    box = Box3D(Point3(cx, cy, cz), length=l, width=w, height=h, yaw=yaw)

    score = None
    if len(tokens) == 16:
        score = _number(tokens[15], lineno, "score")
        if not 0.0 <= score <= 1.0:
            raise MalformedLine(lineno, f"score {score!r} outside [0, 1]")
    return ObjectAnnotation(
        class_name, box, OcclusionLevel(occ_value), score, extras, source_line=line
    )


def parse_label_file(
    text: str, frame_id: str, sensor_position: Point3 = ORIGIN
) -> FrameAnnotations:
    """Parse label lines into a :class:`FrameAnnotations`.

    Raises:
        MalformedLine: wrong field count or a non-numeric field.
        InvalidOcclusion: occlusion integer outside 0-3.
        NonPositiveDimension: a box extent that is not strictly positive.
    """
    objects = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            objects.append(_parse_line(line, lineno))
    return FrameAnnotations(frame_id, tuple(objects), sensor_position)


def _fmt(value: float) -> str:
    # shortest repr round-trips exactly through float()
    return repr(float(value))


def format_label_line(obj: ObjectAnnotation) -> str:
    b = obj.box
    ex = obj.extras
    fields = [
        obj.class_name, ex.truncated, str(int(obj.occlusion)), ex.alpha,
        ex.x1, ex.y1, ex.x2, ex.y2,
        _fmt(b.height), _fmt(b.width), _fmt(b.length),
        _fmt(b.center.x), _fmt(b.center.y), _fmt(b.center.z), _fmt(b.yaw),
    ]
    if obj.score is not None:
        fields.append(_fmt(obj.score))
    return " ".join(fields)


def _source_still_valid(obj: ObjectAnnotation) -> bool:
    try:
        return _parse_line(obj.source_line, 0) == obj
    except (ValueError, MalformedLine):
        return False


def write_label_file(annotations: FrameAnnotations, preserve_source: bool = True) -> str:
    """Serialize to label text, one ``\\n``-terminated line per object.

    Objects that came from :func:`parse_label_file` and are unchanged are
    written as their original line, so an unmodified
    file survives a parse/write cycle byte for byte.  Everything else, or
    everything when ``preserve_source`` is false, uses the canonical format.
    """
    lines = []
    for obj in annotations.objects:
        if preserve_source and obj.source_line is not None and _source_still_valid(obj):
            lines.append(obj.source_line)
        else:
            lines.append(format_label_line(obj))
    return "".join(line + "\n" for line in lines)


def load_labels(
    path: str | os.PathLike,
    frame_id: str | None = None,
    sensor_position: Point3 = ORIGIN,
) -> FrameAnnotations:
    path = Path(path)
    fid = path.stem if frame_id is None else frame_id
    return parse_label_file(path.read_text(), fid, sensor_position)
