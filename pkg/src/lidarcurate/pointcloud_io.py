"""Reading LiDAR frames from packed binary and ASCII files.

Binary ``.bin`` files follow the KITTI velodyne convention: no header, one
16-byte record per return holding four little-endian ``float32`` values
``(x, y, z, intensity)``.  ASCII ``.xyz`` files hold one point per line as
whitespace-separated numbers; ``#`` starts a comment line and intensity may
be omitted.

Returns whose ``x``, ``y`` or ``z`` is NaN or infinite are dropped and
counted in :attr:`PointCloud.report` rather than rejected, since real
captures routinely contain invalid returns.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import MalformedLine, TruncatedRecord

RECORD_DTYPE = np.dtype("<f4")
RECORD_SIZE = 4 * RECORD_DTYPE.itemsize


class Point3(NamedTuple):
    """A single return. Coordinates in meters, intensity as recorded."""

    x: float
    y: float
    z: float
    intensity: float = 0.0


@dataclass(frozen=True)
class ParseReport:
    records: int = 0
    dropped_nonfinite: int = 0


@dataclass(frozen=True, eq=False)
class PointCloud:
    """One frame of points, kept in file order.

    ``points`` is a read-only ``(N, 4)`` float32 array with columns
    ``x, y, z, intensity``.
    """

    frame_id: str
    points: np.ndarray
    report: ParseReport = field(default_factory=ParseReport)

    def __post_init__(self) -> None:
        pts = np.ascontiguousarray(self.points, dtype=np.float32).reshape(-1, 4)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    def __iter__(self) -> Iterator[Point3]:
        for row in self.points.tolist():
            yield Point3(*row)

    def __getitem__(self, index: int) -> Point3:
        return Point3(*self.points[index].tolist())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PointCloud):
            return NotImplemented
        return (
            self.frame_id == other.frame_id
            and self.points.shape == other.points.shape
            and self.points.tobytes() == other.points.tobytes()
        )

    @property
    def xyz(self) -> np.ndarray:
        """``(N, 3)`` float64 copy of the coordinates."""
        return self.points[:, :3].astype(np.float64)

    @classmethod
    def from_points(cls, points, frame_id: str = "") -> "PointCloud":
        """Build a cloud from an iterable of ``Point3`` or an ``(N, 3|4)`` array."""
        arr = np.asarray(list(points) if not isinstance(points, np.ndarray) else points,
                         dtype=np.float64)
        if arr.size == 0:
            arr = np.zeros((0, 4))
        if arr.ndim != 2 or arr.shape[1] not in (3, 4):
            raise ValueError(f"expected (N, 3) or (N, 4) points, got shape {arr.shape}")
        if arr.shape[1] == 3:
            arr = np.hstack([arr, np.zeros((arr.shape[0], 1))])
        return cls(frame_id, arr.astype(np.float32))


def _drop_nonfinite(raw: np.ndarray, frame_id: str) -> PointCloud:
    finite = np.isfinite(raw[:, :3]).all(axis=1)
    dropped = int(raw.shape[0] - np.count_nonzero(finite))
    if dropped:
        raw = raw[finite]
    return PointCloud(frame_id, raw, ParseReport(int(finite.shape[0]), dropped))


def parse_bin(data: bytes, frame_id: str = "") -> PointCloud:
    """Decode packed ``float32`` ``(x, y, z, intensity)`` records.

    Raises:
        TruncatedRecord: if ``len(data)`` is not a multiple of 16.
    """
    if len(data) % RECORD_SIZE:
        raise TruncatedRecord(len(data), RECORD_SIZE)
    raw = np.frombuffer(data, dtype=RECORD_DTYPE).reshape(-1, 4)
    return _drop_nonfinite(raw, frame_id)


def to_bin(cloud: PointCloud) -> bytes:
    """Serialize a cloud back to 16-byte little-endian records."""
    return cloud.points.astype(RECORD_DTYPE, copy=False).tobytes()


def parse_ascii_xyz(text: str, frame_id: str = "") -> PointCloud:
    """Parse ``x y z [intensity]`` lines; blank and ``#`` lines are skipped.

    Raises:
        MalformedLine: on a non-numeric token or a line with other than
            3 or 4 fields.  ``line_number`` counts every physical line.
    """
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = stripped.split()
        if len(tokens) not in (3, 4):
            raise MalformedLine(lineno, f"expected 3 or 4 values, got {len(tokens)}")
        try:
            values = [float(tok) for tok in tokens]
        except ValueError:
            raise MalformedLine(lineno, "non-numeric token") from None
        if len(values) == 3:
            values.append(0.0)
        rows.append(values)
    raw = np.array(rows, dtype=np.float32).reshape(-1, 4)
    return _drop_nonfinite(raw, frame_id)


def load_cloud(path: str | os.PathLike, frame_id: str | None = None) -> PointCloud:
    """Read a ``.bin`` or ``.xyz`` file; ``frame_id`` defaults to the file stem."""
    path = Path(path)
    fid = path.stem if frame_id is None else frame_id
    if path.suffix.lower() == ".bin":
        return parse_bin(path.read_bytes(), fid)
    return parse_ascii_xyz(path.read_text(), fid)


def save_bin(cloud: PointCloud, path: str | os.PathLike) -> None:
    Path(path).write_bytes(to_bin(cloud))
