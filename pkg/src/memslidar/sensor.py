"""Scene + scan pattern -> annotated point-cloud frames.

Two generation paths share the scan pattern and the raycaster:

* direct: one exact raycast per beam direction;
* depth: render a z-depth image once, look each beam up at its nearest pixel
  and unproject through the inverse intrinsics (the external-depth ingestion
  path runs the same sampler on depth files).

Depth images are sampled at float32 precision, the precision of the on-disk
depth format, so a rendered image written to disk and ingested again gives
bit-identical coordinates.

Labels of sensor-raw frames store the box center in sensor coordinates and
the yaw relative to the sensor's level-projected heading. Persons stand
upright in the world, so in a tilted sensor frame such a box is gravity
aligned rather than aligned with the sensor z axis; use
:func:`points_in_label` (or normalize the frame first) for containment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .fileio import Label, read_depth
from .geometry import (
    Box3D, CameraIntrinsics, RigidTransform, camera_to_lidar, intrinsics_from_fov,
    point_in_box, unproject, wrap_angle,
)
from .rng import Stream
from .scanpattern import ScanConfig, ScanDirections, directions_to_pixels, generate_scan_directions
from .scene import SceneScript, SensorMount, mount_to_transform, person_world_box, render_depth

SENSOR_RAW = "sensor-raw"
NORMALIZED = "normalized"
DEFAULT_RESOLUTION = (1024, 768)
DEFAULT_MIN_POINTS = 5


@dataclass(frozen=True, eq=False)
class PointCloudFrame:
    points: np.ndarray  # (N, 4): x, y, z, intensity
    frame_id: int = 0
    frame_convention: str = SENSOR_RAW
    provenance: np.ndarray | None = None  # per-point object id, synthetic frames only
    sample_index: np.ndarray | None = None  # scan sample that produced each point
    sensor_pose: RigidTransform | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 4)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        if len(pts) and (pts[:, 3].min() < 0 or pts[:, 3].max() > 1):
            raise ValueError("intensity must lie in [0, 1]")
        if self.frame_convention not in (SENSOR_RAW, NORMALIZED):
            raise ValueError(f"unknown frame convention {self.frame_convention!r}")
        object.__setattr__(self, "points", pts)
        for name in ("provenance", "sample_index"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=np.int64)
                if v.shape != (len(pts),):
                    raise ValueError(f"{name} must have one entry per point")
                object.__setattr__(self, name, v)

    def __len__(self):
        return len(self.points)

    @property
    def xyz(self) -> np.ndarray:
        return self.points[:, :3]

    def with_points(self, xyz, **kw) -> PointCloudFrame:
        pts = self.points.copy()
        pts[:, :3] = xyz
        return replace(self, points=pts, **kw)


@lru_cache(maxsize=16)
def _scan(cfg: ScanConfig) -> ScanDirections:
    return generate_scan_directions(cfg)


def check_depth_resolution(scan: ScanConfig, width: int, height: int) -> CameraIntrinsics:
    k = intrinsics_from_fov(scan.fov_h, width, height)
    fov_v_img = 2.0 * math.atan(height / 2.0 / k.fy)
    if fov_v_img < scan.fov_v:
        raise ValueError(
            f"{width}x{height} image covers {math.degrees(fov_v_img):.2f} deg vertically, "
            f"scan needs {math.degrees(scan.fov_v):.2f} deg")
    return k


def sensor_box_to_world(box: Box3D, mount: SensorMount) -> Box3D:
    """World-frame box of a sensor-raw label (inverse of the annotation mapping)."""
    pose = mount_to_transform(mount)
    return box.replace(center=pose.apply(box.center), yaw=box.yaw + mount.heading)


def points_in_label(label: Label, cloud: PointCloudFrame, mount: SensorMount) -> np.ndarray:
    """Membership mask of a sensor-raw cloud in a sensor-raw label box."""
    if cloud.frame_convention != SENSOR_RAW:
        return point_in_box(label.box, cloud.xyz)
    pose = mount_to_transform(mount)
    return point_in_box(sensor_box_to_world(label.box, mount), pose.apply(cloud.xyz))


def annotate_frame(scene: SceneScript, t: float, cloud: PointCloudFrame,
                   min_points: int = DEFAULT_MIN_POINTS) -> list[Label]:
    if cloud.frame_convention != SENSOR_RAW:
        raise ValueError("annotate_frame expects a sensor-raw cloud")
    pose = mount_to_transform(scene.mount)
    inv = pose.inverse()
    world_pts = pose.apply(cloud.xyz)
    labels = []
    for model, position, heading in scene.at(t).persons:
        wbox = person_world_box(model, position, heading)
        n = int(np.count_nonzero(point_in_box(wbox, world_pts))) if len(world_pts) else 0
        if n < min_points:
            continue
        sbox = wbox.replace(center=inv.apply(wbox.center), yaw=wrap_angle(heading - scene.mount.heading))
        labels.append(Label(sbox, model.class_name, model.object_id, n))
    return labels


def _intensity(snapshot, ids: np.ndarray) -> np.ndarray:
    refl = snapshot.reflectivity
    return np.array([refl[i] for i in ids.tolist()], dtype=np.float64)


def simulate_frame_direct(scene: SceneScript, t: float, frame_id: int = 0,
                          min_points: int = DEFAULT_MIN_POINTS) -> tuple[PointCloudFrame, list[Label]]:
    snap = scene.at(t)
    pose = mount_to_transform(scene.mount)
    dirs = _scan(scene.scan)
    beams = pose.apply_vector(dirs.unit_vectors())
    dist, ids = snap.cast(pose.translation, beams)
    hit = np.isfinite(dist)
    world = pose.translation + dist[hit, None] * beams[hit]
    pts = np.empty((int(hit.sum()), 4))
    pts[:, :3] = pose.inverse().apply(world)
    pts[:, 3] = _intensity(snap, ids[hit])
    cloud = PointCloudFrame(pts, frame_id, SENSOR_RAW, ids[hit], dirs.sample_index[hit], pose)
    return cloud, annotate_frame(scene, t, cloud, min_points)


def sample_depth_image(depth, k: CameraIntrinsics, scan: ScanConfig):
    """Look every scan direction up in a depth image.

    Returns ``(xyz, sample_index, (u, v))`` for beams with a finite return;
    the coordinates are sensor-frame (LiDAR convention).
    """
    depth = np.asarray(depth)
    if depth.shape != (k.height, k.width):
        raise ValueError(f"depth image is {depth.shape[1]}x{depth.shape[0]}, intrinsics expect {k.width}x{k.height}")
    dirs = _scan(scan)
    u, v = directions_to_pixels(dirs, k)
    z = depth[v, u].astype(np.float64)
    ok = np.isfinite(z) & (z > 0)
    xyz = camera_to_lidar(unproject(k, u[ok], v[ok], z[ok]))
    return xyz, dirs.sample_index[ok], (u[ok], v[ok])


def simulate_frame_depthpath(scene: SceneScript, t: float, resolution=DEFAULT_RESOLUTION, frame_id: int = 0,
                             min_points: int = DEFAULT_MIN_POINTS) -> tuple[PointCloudFrame, list[Label]]:
    w, h = resolution
    k = check_depth_resolution(scene.scan, w, h)
    snap = scene.at(t)
    pose = mount_to_transform(scene.mount)
    depth, ids = render_depth(snap, pose, k, return_ids=True)
    xyz, idx, (u, v) = sample_depth_image(depth.astype(np.float32), k, scene.scan)
    hit_ids = ids[v, u]
    pts = np.empty((len(xyz), 4))
    pts[:, :3] = xyz
    pts[:, 3] = _intensity(snap, hit_ids)
    cloud = PointCloudFrame(pts, frame_id, SENSOR_RAW, hit_ids, idx, pose)
    return cloud, annotate_frame(scene, t, cloud, min_points)


def ingest_external_depth(depth_file, pose: RigidTransform, k: CameraIntrinsics, scan: ScanConfig,
                          frame_id: int = 0, intensity: float = 1.0) -> PointCloudFrame:
    """Point cloud from an externally rendered depth file (no labels).

    External depth carries no reflectance, so every point gets ``intensity``.
    """
    depth = depth_file if isinstance(depth_file, np.ndarray) else read_depth(depth_file)
    if depth.shape != (k.height, k.width):
        raise ValueError(f"depth file is {depth.shape[1]}x{depth.shape[0]}, intrinsics expect {k.width}x{k.height}")
    if np.any(np.isnan(depth)) or np.any(depth < 0):
        raise ValueError("depth file contains negative or NaN depths")
    xyz, idx, _ = sample_depth_image(depth, k, scan)
    pts = np.empty((len(xyz), 4))
    pts[:, :3] = xyz
    pts[:, 3] = intensity
    return PointCloudFrame(pts, frame_id, SENSOR_RAW, None, idx, pose)


def add_range_noise(cloud: PointCloudFrame, sigma: float, seed: int) -> PointCloudFrame:
    """Displace each point along its sensor ray by N(0, sigma).

    The stream is keyed by ``(seed, frame_id)`` so frames are independent of
    generation order.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0 or len(cloud) == 0:
        return cloud
    if cloud.frame_convention != SENSOR_RAW:
        raise ValueError("range noise needs sensor-raw coordinates (rays start at the origin)")
    xyz = cloud.xyz
    r = np.linalg.norm(xyz, axis=1, keepdims=True)
    n = Stream(seed, cloud.frame_id).normal(len(cloud)) * sigma
    return cloud.with_points(xyz + n[:, None] * xyz / r)
