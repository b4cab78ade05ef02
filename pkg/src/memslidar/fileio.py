"""On-disk formats.

* point file (``.bin``): little-endian float32 ``x y z intensity`` per point, no header
* label file (``.txt``): ``class cx cy cz dx dy dz yaw object_id num_points``, 6 decimals;
  yaw in radians. Seven-field lines (class and six box values, no yaw) read with yaw = 0.
* prediction file (``.txt``): ``class cx cy cz dx dy dz yaw confidence``
* depth file (``.mdpt``): 16-byte header ``b"MDPT"``, u32 width, u32 height,
  u32 reserved (0), then row-major little-endian float32 z-depths; +inf = no return
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Box3D

DEPTH_MAGIC = b"MDPT"
_DEPTH_HEADER = struct.Struct("<4sIII")


class FormatError(ValueError):
    """A file that does not follow its declared format."""


@dataclass(frozen=True)
class Label:
    box: Box3D
    class_name: str = "person"
    object_id: int = -1
    num_points: int = 0

    def __post_init__(self):
        if not self.class_name or any(c.isspace() for c in self.class_name):
            raise ValueError("class name must be a nonempty token")
        if self.num_points < 0:
            raise ValueError("num_points must be non-negative")


@dataclass(frozen=True)
class Detection:
    box: Box3D
    confidence: float
    frame_id: int = 0
    class_name: str = "person"

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


def write_points(path, points) -> None:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 4)
    Path(path).write_bytes(pts.astype("<f4").tobytes())


def read_points(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) % 16:
        raise FormatError(f"{path}: size {len(data)} is not a multiple of 16 bytes (short read?)")
    return np.frombuffer(data, dtype="<f4").reshape(-1, 4).astype(np.float64)


def _box_fields(b: Box3D) -> str:
    cx, cy, cz = b.center
    return f"{cx:.6f} {cy:.6f} {cz:.6f} {b.dx:.6f} {b.dy:.6f} {b.dz:.6f} {b.yaw:.6f}"


def format_labels(labels) -> str:
    return "".join(f"{lb.class_name} {_box_fields(lb.box)} {lb.object_id} {lb.num_points}\n" for lb in labels)


def write_labels(path, labels) -> None:
    Path(path).write_text(format_labels(labels))


def _parse_floats(tokens, path, lineno):
    try:
        return [float(t) for t in tokens]
    except ValueError as exc:
        raise FormatError(f"{path}:{lineno}: {exc}") from None


def read_labels(path) -> list[Label]:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        tok = line.split()
        if not tok:
            continue
        if len(tok) not in (7, 8, 10):
            raise FormatError(f"{path}:{lineno}: expected 7, 8 or 10 fields, got {len(tok)}")
        vals = _parse_floats(tok[1:8], path, lineno)
        if len(vals) == 6:
            vals.append(0.0)
        oid, npts = -1, 0
        if len(tok) == 10:
            try:
                oid, npts = int(tok[8]), int(tok[9])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
        try:
            out.append(Label(Box3D.from_array(vals), tok[0], oid, npts))
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
    return out


def write_predictions(path, detections) -> None:
    Path(path).write_text("".join(
        f"{d.class_name} {_box_fields(d.box)} {d.confidence:.6f}\n" for d in detections))


def read_predictions(path, frame_id: int = 0) -> list[Detection]:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        tok = line.split()
        if not tok:
            continue
        if len(tok) != 9:
            raise FormatError(f"{path}:{lineno}: expected 9 fields, got {len(tok)}")
        vals = _parse_floats(tok[1:], path, lineno)
        try:
            out.append(Detection(Box3D.from_array(vals[:7]), vals[7], frame_id, tok[0]))
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
    return out


def write_depth(path, depth) -> None:
    d = np.asarray(depth)
    if d.ndim != 2:
        raise ValueError("depth image must be 2-D")
    h, w = d.shape
    Path(path).write_bytes(_DEPTH_HEADER.pack(DEPTH_MAGIC, w, h, 0) + d.astype("<f4").tobytes())


def read_depth(path) -> np.ndarray:
    """Return the depth image as float32 ``(height, width)``."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: unreadable ({exc.strerror})") from None
    if len(data) < _DEPTH_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, w, h, _ = _DEPTH_HEADER.unpack_from(data)
    if magic != DEPTH_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    body = data[_DEPTH_HEADER.size:]
    if len(body) != 4 * w * h:
        raise FormatError(f"{path}: expected {4 * w * h} payload bytes for {w}x{h}, got {len(body)}")
    return np.frombuffer(body, dtype="<f4").reshape(h, w).astype(np.float32)
