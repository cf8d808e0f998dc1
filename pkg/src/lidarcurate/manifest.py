"""Dataset manifests: which cloud file goes with which label file.

A manifest file has one frame per line::

    cloud_path<TAB>label_path[<TAB>sx,sy,sz]

Relative paths resolve against the manifest's directory.  The optional third
column overrides the sensor position for that frame.  A line holding a single
path lists a label file without a cloud, which is enough for evaluation.

Passing a directory instead scans it recursively: every ``*.bin`` (or
``*.xyz``) cloud is paired with the ``*.txt`` label of the same stem.  A
directory with no clouds at all is read as labels only.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .annotation_io import ORIGIN, FrameAnnotations, load_labels
from .errors import CurationError
from .pointcloud_io import Point3, PointCloud, load_cloud

log = logging.getLogger(__name__)

CLOUD_SUFFIXES = (".bin", ".xyz")
LABEL_SUFFIX = ".txt"


class ManifestError(CurationError):
    def __init__(self, message: str) -> None:
        self._init_args = (message,)
        super().__init__(message)


@dataclass(frozen=True)
class FrameEntry:
    frame_id: str
    label_path: Path
    cloud_path: Optional[Path] = None
    sensor_position: Optional[Point3] = None
    # where the label sits relative to the dataset root; output files mirror it
    relative_label: Path = Path()

    def load_labels(self) -> FrameAnnotations:
        return load_labels(self.label_path, self.frame_id, self.sensor_position or ORIGIN)

    def load_cloud(self) -> PointCloud:
        if self.cloud_path is None:
            raise ManifestError(f"frame {self.frame_id!r} has no point cloud")
        return load_cloud(self.cloud_path, self.frame_id)


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    frames: tuple[FrameEntry, ...]

    def __len__(self) -> int:
        return len(self.frames)

    def check_files(self, need_clouds: bool = True) -> None:
        """Raise :class:`ManifestError` if any referenced file is missing."""
        for entry in self.frames:
            if need_clouds:
                if entry.cloud_path is None:
                    raise ManifestError(f"frame {entry.frame_id!r} has no point cloud")
                if not entry.cloud_path.is_file():
                    raise ManifestError(f"missing cloud file {entry.cloud_path}")
            if not entry.label_path.is_file():
                raise ManifestError(f"missing label file {entry.label_path}")

    def by_frame_id(self) -> dict[str, FrameEntry]:
        return {e.frame_id: e for e in self.frames}


def _relative(path: Path, root: Path) -> Path:
    try:
        return path.resolve().relative_to(root.resolve())
    except ValueError:
        return Path(path.name)


def _parse_pose(text: str, lineno: int) -> Point3:
    parts = text.replace(",", " ").split()
    try:
        x, y, z = (float(p) for p in parts)
    except ValueError:
        raise ManifestError(f"manifest line {lineno}: bad sensor position {text!r}") from None
    return Point3(x, y, z)


def parse_manifest(text: str, root: str | os.PathLike) -> DatasetManifest:
    root = Path(root)
    frames = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = [c.strip() for c in line.split("\t")]
        if len(cols) == 1:
            cloud, label, pose = None, cols[0], None
        elif len(cols) in (2, 3):
            cloud, label = cols[0], cols[1]
            pose = _parse_pose(cols[2], lineno) if len(cols) == 3 else None
        else:
            raise ManifestError(f"manifest line {lineno}: expected 1-3 tab-separated columns")
        label_path = root / label
        frames.append(
            FrameEntry(
                frame_id=label_path.stem,
                label_path=label_path,
                cloud_path=root / cloud if cloud else None,
                sensor_position=pose,
                relative_label=_relative(label_path, root),
            )
        )
    return _checked(DatasetManifest(root, tuple(frames)))


def _checked(manifest: DatasetManifest) -> DatasetManifest:
    seen = set()
    for entry in manifest.frames:
        if entry.frame_id in seen:
            raise ManifestError(f"duplicate frame id {entry.frame_id!r}")
        seen.add(entry.frame_id)
    return manifest


def scan_directory(root: str | os.PathLike) -> DatasetManifest:
    root = Path(root)
    files = sorted(p for p in root.rglob("*") if p.is_file())
    clouds = [p for p in files if p.suffix.lower() in CLOUD_SUFFIXES]
    labels: dict[str, Path] = {}
    for p in files:
        if p.suffix.lower() != LABEL_SUFFIX:
            continue
        if p.stem in labels and clouds:
            raise ManifestError(f"ambiguous label files for stem {p.stem!r}")
        labels.setdefault(p.stem, p)

    if not clouds:
        frames = [
            FrameEntry(stem, path, relative_label=_relative(path, root))
            for stem, path in labels.items()
        ]
    else:
        frames = []
        for cloud in clouds:
            label = labels.get(cloud.stem)
            if label is None:
                log.warning("no label file for %s; skipped", cloud)
                continue
            frames.append(
                FrameEntry(cloud.stem, label, cloud, relative_label=_relative(label, root))
            )
    frames.sort(key=lambda e: e.relative_label.as_posix())
    return _checked(DatasetManifest(root, tuple(frames)))


def read_manifest(path: str | os.PathLike) -> DatasetManifest:
    """Load a manifest file, or scan a dataset directory."""
    path = Path(path)
    if path.is_dir():
        return scan_directory(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    return parse_manifest(text, path.parent)


def format_manifest(entries) -> str:
    """Manifest text with absolute cloud paths and root-relative label paths."""
    lines = []
    for e in entries:
        cols = [str(e.cloud_path.resolve()) if e.cloud_path else "", e.relative_label.as_posix()]
        if e.sensor_position is not None:
            cols.append(",".join(repr(v) for v in e.sensor_position[:3]))
        lines.append("\t".join(c for c in cols if c) + "\n")
    return "".join(lines)
