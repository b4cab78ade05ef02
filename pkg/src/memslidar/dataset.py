"""Dataset lifecycle: manifests, normalization, mixing, splitting, augmentation."""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np

from .fileio import Label, read_labels, read_points, write_labels, write_points
from .geometry import rot_y, rot_z, wrap_angle
from .rng import Stream
from .scene import SensorMount
from .sensor import NORMALIZED, SENSOR_RAW, PointCloudFrame

SOURCES = ("real", "synthetic")
# prediction manifests mirror dataset manifests
MANIFEST_SOURCES = SOURCES + ("prediction",)


class DatasetError(ValueError):
    pass


def round_half_up(fraction: float, total: int) -> int:
    """``round(fraction * total)`` with halves rounded up, on the decimal value of ``fraction``."""
    return int((Decimal(repr(float(fraction))) * total).quantize(Decimal(1), rounding=ROUND_HALF_UP))


@dataclass
class ManifestEntry:
    frame_path: Path | None
    label_path: Path | None
    source: str
    frame_id: int
    extra: dict = field(default_factory=dict)


@dataclass
class DatasetManifest:
    entries: list = field(default_factory=list)
    seed: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = [e.frame_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise DatasetError("frame ids must be unique within a manifest")
        for e in self.entries:
            if e.source not in MANIFEST_SOURCES:
                raise DatasetError(f"frame {e.frame_id}: unknown source {e.source!r}")

    def __len__(self):
        return len(self.entries)

    @property
    def frame_convention(self) -> str:
        return self.metadata.get("frame_convention", SENSOR_RAW)

    def by_frame_id(self) -> dict:
        return {e.frame_id: e for e in self.entries}

    def save(self, path) -> None:
        path = Path(path)
        root = path.parent.resolve()

        def rel(p):
            return None if p is None else os.path.relpath(Path(p).resolve(), root)

        doc = {
            "seed": self.seed,
            "metadata": self.metadata,
            "entries": [{"frame": rel(e.frame_path), "labels": rel(e.label_path), "source": e.source,
                         "frame_id": e.frame_id, **e.extra} for e in self.entries],
        }
        path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path, check_files: bool = True) -> DatasetManifest:
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise DatasetError(f"{path}: unreadable manifest ({exc.strerror})") from None
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}: invalid JSON ({exc})") from None
        root = path.parent
        entries = []
        for i, raw in enumerate(doc.get("entries", [])):
            raw = dict(raw)
            try:
                fp, lp = raw.pop("frame"), raw.pop("labels")
                src, fid = raw.pop("source"), int(raw.pop("frame_id"))
            except KeyError as exc:
                raise DatasetError(f"{path}: entry {i} lacks {exc}") from None
            fp = None if fp is None else root / fp
            lp = None if lp is None else root / lp
            if check_files:
                for p in (fp, lp):
                    if p is not None and not p.exists():
                        raise DatasetError(f"{path}: entry {i} references missing file {p}")
            entries.append(ManifestEntry(fp, lp, src, fid, raw))
        return cls(entries, int(doc.get("seed", 0)), dict(doc.get("metadata", {})))


def read_frame(entry: ManifestEntry, convention: str = SENSOR_RAW) -> tuple[PointCloudFrame, list[Label]]:
    pts = read_points(entry.frame_path) if entry.frame_path is not None else np.zeros((0, 4))
    labels = read_labels(entry.label_path) if entry.label_path is not None else []
    return PointCloudFrame(pts, entry.frame_id, convention), labels


def write_frame(frame: PointCloudFrame, labels, frame_path, label_path) -> None:
    write_points(frame_path, frame.points)
    write_labels(label_path, labels)


# normalization ----------------------------------------------------------

def _level(mount: SensorMount) -> np.ndarray:
    return rot_y(mount.tilt)


def normalize(frame: PointCloudFrame, labels, mount: SensorMount):
    """Remove tilt and height: origin on the ground below the sensor, z up.

    Label yaw is already measured in the level-projected sensor frame, so it
    carries over unchanged.
    """
    if frame.frame_convention == NORMALIZED:
        raise DatasetError("frame is already normalized")
    r = _level(mount)
    lift = np.array([0.0, 0.0, mount.height])
    xyz = frame.xyz @ r.T + lift
    out = frame.with_points(xyz, frame_convention=NORMALIZED)
    new_labels = [replace(lb, box=lb.box.replace(center=r @ lb.box.center + lift)) for lb in labels]
    return out, new_labels


def denormalize(frame: PointCloudFrame, labels, mount: SensorMount):
    if frame.frame_convention != NORMALIZED:
        raise DatasetError("frame is not normalized")
    r = _level(mount)
    lift = np.array([0.0, 0.0, mount.height])
    xyz = (frame.xyz - lift) @ r
    out = frame.with_points(xyz, frame_convention=SENSOR_RAW)
    new_labels = [replace(lb, box=lb.box.replace(center=r.T @ (lb.box.center - lift))) for lb in labels]
    return out, new_labels


# mixing and splitting ---------------------------------------------------

@dataclass(frozen=True)
class MixSpec:
    synthetic_fraction: float
    total_count: int

    def __post_init__(self):
        if not (0.0 <= self.synthetic_fraction <= 1.0):
            raise DatasetError("synthetic fraction must lie in [0, 1]")
        if self.total_count < 0:
            raise DatasetError("total count must be non-negative")

    @property
    def synthetic_count(self) -> int:
        return round_half_up(self.synthetic_fraction, self.total_count)

    @property
    def real_count(self) -> int:
        return self.total_count - self.synthetic_count


def mix(real: DatasetManifest, synthetic: DatasetManifest, spec: MixSpec, seed: int) -> DatasetManifest:
    """Draw exact counts from both pools without replacement, then shuffle.

    Output frame ids are renumbered ``0..total-1``; the pool id survives as
    ``origin_frame_id``.
    """
    n_syn, n_real = spec.synthetic_count, spec.real_count
    short = []
    if len(synthetic) < n_syn:
        short.append(f"synthetic pool has {len(synthetic)} frames, needs {n_syn} ({n_syn - len(synthetic)} short)")
    if len(real) < n_real:
        short.append(f"real pool has {len(real)} frames, needs {n_real} ({n_real - len(real)} short)")
    if short:
        raise DatasetError("; ".join(short))
    conv = {pool.frame_convention for pool, n in ((real, n_real), (synthetic, n_syn)) if n}
    if len(conv) > 1:
        raise DatasetError("cannot mix pools with different frame conventions")
    rs = Stream(seed)
    picked = [synthetic.entries[i] for i in rs.permutation(len(synthetic))[:n_syn]]
    picked += [real.entries[i] for i in rs.permutation(len(real))[:n_real]]
    order = rs.permutation(len(picked))
    entries = []
    for new_id, i in enumerate(order.tolist()):
        e = picked[i]
        extra = dict(e.extra, origin_frame_id=e.extra.get("origin_frame_id", e.frame_id))
        entries.append(ManifestEntry(e.frame_path, e.label_path, e.source, new_id, extra))
    meta = {"frame_convention": conv.pop() if conv else SENSOR_RAW,
            "mix": {"synthetic_fraction": spec.synthetic_fraction, "total_count": spec.total_count,
                    "synthetic": n_syn, "real": n_real}}
    return DatasetManifest(entries, seed, meta)


def split(ds: DatasetManifest, train_fraction: float, seed: int) -> tuple[DatasetManifest, DatasetManifest]:
    if not (0.0 < train_fraction < 1.0):
        raise DatasetError("train fraction must lie in (0, 1)")
    n_train = round_half_up(train_fraction, len(ds))
    order = Stream(seed).permutation(len(ds)).tolist()
    train = [ds.entries[i] for i in order[:n_train]]
    val = [ds.entries[i] for i in order[n_train:]]
    return (DatasetManifest(train, seed, dict(ds.metadata, split="train")),
            DatasetManifest(val, seed, dict(ds.metadata, split="validation")))


# augmentation -----------------------------------------------------------

@dataclass(frozen=True)
class AugmentationSpec:
    """One augmentation op.

    Fixed parameters (``angle``, ``factor``) win; otherwise values are drawn
    per frame from the stream keyed by ``(seed, frame_id)``: rotation
    uniform in ``[-max_angle, max_angle)``, scale uniform in ``scale_range``.
    """

    op: str
    angle: float | None = None
    max_angle: float = math.pi / 4
    factor: float | None = None
    scale_range: tuple = (0.95, 1.05)
    axis: str = "y"
    seed: int = 0

    def __post_init__(self):
        if self.op not in ("rotate", "scale", "mirror"):
            raise DatasetError(f"unknown augmentation op {self.op!r}")
        if self.angle is not None and not math.isfinite(self.angle):
            raise DatasetError("rotation angle must be finite")
        if self.factor is not None and not self.factor > 0:
            raise DatasetError("scale factor must be positive")
        lo, hi = self.scale_range
        if not (0 < lo <= hi):
            raise DatasetError("scale range must be positive and ordered")
        if self.axis not in ("x", "y"):
            raise DatasetError("mirror axis must be x or y")

    def resolve(self, frame_id: int) -> AugmentationSpec:
        if self.op == "rotate" and self.angle is None:
            a = Stream(self.seed, frame_id).uniform(low=-self.max_angle, high=self.max_angle)
            return replace(self, angle=a)
        if self.op == "scale" and self.factor is None:
            f = Stream(self.seed, frame_id).uniform(low=self.scale_range[0], high=self.scale_range[1])
            return replace(self, factor=f)
        return self


def augment(frame: PointCloudFrame, labels, spec: AugmentationSpec):
    if frame.frame_convention != NORMALIZED:
        raise DatasetError("augmentation requires a normalized (level) frame")
    spec = spec.resolve(frame.frame_id)
    xyz = frame.xyz
    if spec.op == "rotate":
        r = rot_z(spec.angle)
        out = frame.with_points(xyz @ r.T)
        new = [replace(lb, box=lb.box.replace(center=r @ lb.box.center, yaw=lb.box.yaw + spec.angle))
               for lb in labels]
    elif spec.op == "scale":
        f = spec.factor
        out = frame.with_points(xyz * f)
        new = [replace(lb, box=lb.box.replace(center=lb.box.center * f, dx=lb.box.dx * f, dy=lb.box.dy * f,
                                              dz=lb.box.dz * f)) for lb in labels]
    else:
        col = 1 if spec.axis == "y" else 0
        flip = np.ones(3)
        flip[col] = -1.0
        out = frame.with_points(xyz * flip)
        new = []
        for lb in labels:
            yaw = -lb.box.yaw if spec.axis == "y" else wrap_angle(math.pi - lb.box.yaw)
            new.append(replace(lb, box=lb.box.replace(center=lb.box.center * flip, yaw=yaw)))
    return out, new


# statistics -------------------------------------------------------------

def _dist(values) -> dict:
    if not values:
        return {"count": 0, "min": 0, "max": 0, "mean": 0.0, "median": 0.0}
    a = np.asarray(values, dtype=np.float64)
    return {"count": len(a), "min": int(a.min()), "max": int(a.max()),
            "mean": float(a.mean()), "median": float(np.median(a))}


def stats(ds: DatasetManifest) -> dict:
    persons_hist: dict[int, int] = {}
    points_per_frame, points_per_box = [], []
    sources = {s: 0 for s in SOURCES}
    sources.update({e.source: 0 for e in ds.entries})
    for e in ds.entries:
        sources[e.source] += 1
        n_pts = 0
        if e.frame_path is not None:
            n_pts = Path(e.frame_path).stat().st_size // 16
        points_per_frame.append(n_pts)
        labels = read_labels(e.label_path) if e.label_path is not None else []
        persons = [lb for lb in labels if lb.class_name == "person"]
        persons_hist[len(persons)] = persons_hist.get(len(persons), 0) + 1
        points_per_box.extend(lb.num_points for lb in persons)
    return {
        "frames": len(ds),
        "persons_per_frame": {str(k): persons_hist[k] for k in sorted(persons_hist)},
        "points_per_frame": _dist(points_per_frame),
        "points_per_box": _dist(points_per_box),
        "sources": sources,
    }
