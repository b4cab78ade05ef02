"""Scene description, analytic raycaster and virtual depth camera.

Scene scripts are JSON documents; angles in the file are degrees, lengths
meters. A minimal annotated example::

    {
      "statics": [
        {"type": "ground", "id": 0, "z": 0.0, "reflectivity": 0.2},
        {"type": "box", "id": 1, "center": [12, 4, 1], "size": [2, 1, 2], "yaw": 30},
        {"type": "cylinder", "id": 2, "center": [9, -3, 0], "radius": 0.2, "height": 3},
        {"type": "sphere", "id": 3, "center": [15, 0, 1], "radius": 0.5}
      ],
      "persons": [
        {"id": 100, "height": 1.8, "body_radius": 0.25,
         "trajectory": {"waypoints": [[8, -6], [14, 6]], "speed": 1.3, "start_time": 0}}
      ],
      "mount": {"position": [0, 0, 4], "tilt": 16, "heading": 0},
      "sensor": {"num_scanlines": 200, "fov_h": 72, "fov_v": 30, "points_per_line": 100},
      "frame_times": {"start": 0.0, "step": 0.1, "count": 50},
      "seed": 7
    }

``mount`` also accepts ``{"preset": name}`` (see :data:`MOUNT_PRESETS`) or a
``height`` in place of ``position``. ``frame_times`` may be an explicit list.
A cylinder's ``center`` is its *base* center; a 2-element center puts the base
at z = 0.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from ._backend import kernels
from .geometry import (
    Box3D, CameraIntrinsics, RigidTransform, CAMERA_TO_LIDAR, rot_y, rot_z, wrap_angle,
)
from .scanpattern import ScanConfig

log = logging.getLogger(__name__)

DEFAULT_MAX_RANGE = 75.0


@dataclass(frozen=True)
class GroundPlane:
    object_id: int
    z: float = 0.0
    reflectivity: float = 0.2


@dataclass(frozen=True)
class BoxPrimitive:
    object_id: int
    box: Box3D
    reflectivity: float = 0.5


@dataclass(frozen=True)
class Cylinder:
    """Vertical cylinder; ``center`` is the base center."""

    object_id: int
    center: tuple
    radius: float
    height: float
    reflectivity: float = 0.5


@dataclass(frozen=True)
class Sphere:
    object_id: int
    center: tuple
    radius: float
    reflectivity: float = 0.5


Primitive = GroundPlane | BoxPrimitive | Cylinder | Sphere


def _check_primitive(p) -> None:
    if not (0.0 < p.reflectivity <= 1.0):
        raise ValueError(f"object {p.object_id}: reflectivity must lie in (0, 1]")
    if isinstance(p, (Cylinder, Sphere)) and not p.radius > 0:
        raise ValueError(f"object {p.object_id}: radius must be positive")
    if isinstance(p, Cylinder) and not p.height > 0:
        raise ValueError(f"object {p.object_id}: height must be positive")


@dataclass(frozen=True)
class PersonModel:
    object_id: int
    height: float = 1.75
    body_radius: float = 0.25
    reflectivity: float = 0.6
    class_name: str = "person"

    def __post_init__(self):
        if not (1.2 <= self.height <= 2.2):
            raise ValueError(f"person {self.object_id}: height {self.height} outside [1.2, 2.2] m")
        if not (0.1 <= self.body_radius <= 0.5):
            raise ValueError(f"person {self.object_id}: body radius {self.body_radius} outside [0.1, 0.5] m")
        if not (0.0 < self.reflectivity <= 1.0):
            raise ValueError(f"person {self.object_id}: reflectivity must lie in (0, 1]")

    def primitives(self, position) -> tuple[Cylinder, Sphere]:
        """Body cylinder (feet to 0.85 h) and a head sphere touching the top."""
        x, y, z = (float(c) for c in position)
        head_r = 0.5 * self.body_radius
        body = Cylinder(self.object_id, (x, y, z), self.body_radius, 0.85 * self.height, self.reflectivity)
        head = Sphere(self.object_id, (x, y, z + self.height - head_r), head_r, self.reflectivity)
        return body, head


@dataclass(frozen=True)
class Trajectory:
    waypoints: tuple
    speed: float
    start_time: float = 0.0

    def __post_init__(self):
        wp = np.asarray(self.waypoints, dtype=np.float64)
        if wp.ndim != 2 or wp.shape[1] != 2 or len(wp) < 2:
            raise ValueError("trajectory needs at least two (x, y) waypoints")
        if not self.speed > 0:
            raise ValueError("trajectory speed must be positive")
        seg = np.linalg.norm(np.diff(wp, axis=0), axis=1)
        if np.any(seg == 0):
            raise ValueError("consecutive trajectory waypoints coincide")
        object.__setattr__(self, "waypoints", tuple(map(tuple, wp.tolist())))

    @cached_property
    def _cumulative(self) -> np.ndarray:
        wp = np.asarray(self.waypoints)
        return np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(wp, axis=0), axis=1))])

    @property
    def length(self) -> float:
        return float(self._cumulative[-1])


def person_pose_at(tr: Trajectory, t: float) -> tuple[np.ndarray, float]:
    """Position on the ground polyline and heading of the current segment."""
    if t < tr.start_time:
        raise ValueError(f"t={t} precedes the trajectory start {tr.start_time}")
    wp = np.asarray(tr.waypoints)
    cum = tr._cumulative
    s = tr.speed * (t - tr.start_time)
    if s >= cum[-1]:
        d = wp[-1] - wp[-2]
        return np.array([wp[-1, 0], wp[-1, 1], 0.0]), math.atan2(d[1], d[0])
    i = int(np.searchsorted(cum, s, side="right")) - 1
    d = wp[i + 1] - wp[i]
    frac = (s - cum[i]) / (cum[i + 1] - cum[i])
    xy = wp[i] + frac * d
    return np.array([xy[0], xy[1], 0.0]), math.atan2(d[1], d[0])


def person_world_box(pm: PersonModel, position, heading: float) -> Box3D:
    p = np.asarray(position, dtype=np.float64)
    return Box3D(np.array([p[0], p[1], p[2] + 0.5 * pm.height]),
                 2.0 * pm.body_radius, 2.0 * pm.body_radius, pm.height, heading)


@dataclass(frozen=True)
class SensorMount:
    """Static mount: position (z = mounting height), downward tilt, heading."""

    position: tuple = (0.0, 0.0, 4.0)
    tilt: float = math.radians(16.0)
    heading: float = 0.0

    def __post_init__(self):
        pos = tuple(float(c) for c in self.position)
        if len(pos) != 3:
            raise ValueError("mount position must have three components")
        object.__setattr__(self, "position", pos)
        if not pos[2] > 0:
            raise ValueError("mount height must be positive")
        if not (0.0 <= self.tilt < math.pi / 2):
            raise ValueError("mount tilt must lie in [0, 90) degrees")

    @property
    def height(self) -> float:
        return self.position[2]

    def to_dict(self) -> dict:
        return {"position": list(self.position), "tilt": math.degrees(self.tilt),
                "heading": math.degrees(self.heading)}

    @classmethod
    def from_dict(cls, d: dict | None) -> SensorMount:
        d = dict(d or {})
        if "preset" in d:
            base = MOUNT_PRESETS[d.pop("preset")]
            if d:
                raise ValueError("a mount preset cannot be combined with other mount keys")
            return base
        if "position" in d:
            pos = d.pop("position")
        else:
            pos = [0.0, 0.0, float(d.pop("height", 4.0))]
        tilt = math.radians(float(d.pop("tilt", 16.0)))
        heading = math.radians(float(d.pop("heading", 0.0)))
        if d:
            raise ValueError(f"unknown mount keys: {sorted(d)}")
        return cls(tuple(pos), tilt, heading)


MOUNT_PRESETS = {
    # public-area recording geometry: 4 m, 16 degrees
    "campus": SensorMount((0.0, 0.0, 4.0), math.radians(16.0), 0.0),
    # industrial entrance evaluation geometry: 5 m, 23 degrees
    "smartfactory-entrance": SensorMount((0.0, 0.0, 5.0), math.radians(23.0), 0.0),
}


def mount_transform(position, tilt: float, heading: float) -> RigidTransform:
    """Sensor-to-world transform; positive tilt pitches the x axis downward."""
    return RigidTransform(rot_z(heading) @ rot_y(tilt), np.asarray(position, dtype=np.float64))


def mount_to_transform(m: SensorMount) -> RigidTransform:
    return mount_transform(m.position, m.tilt, m.heading)


@dataclass(frozen=True)
class Person:
    model: PersonModel
    trajectory: Trajectory


@dataclass(frozen=True, eq=False)
class SceneSnapshot:
    """Immutable scene state at one instant, packed for the ray kernels."""

    time: float
    primitives: tuple
    persons: tuple  # (PersonModel, position, heading) of spawned persons
    max_range: float = DEFAULT_MAX_RANGE

    @cached_property
    def packed(self) -> dict:
        planes, boxes, cyls, sphs = [], [], [], []
        ids = {"plane": [], "box": [], "cylinder": [], "sphere": []}
        for p in self.primitives:
            if isinstance(p, GroundPlane):
                planes.append([p.z]); ids["plane"].append(p.object_id)
            elif isinstance(p, BoxPrimitive):
                b = p.box
                boxes.append([*b.center, 0.5 * b.dx, 0.5 * b.dy, 0.5 * b.dz, math.cos(b.yaw), math.sin(b.yaw)])
                ids["box"].append(p.object_id)
            elif isinstance(p, Cylinder):
                cx, cy, cz = (tuple(p.center) + (0.0,))[:3]
                cyls.append([cx, cy, cz, p.radius, p.height]); ids["cylinder"].append(p.object_id)
            elif isinstance(p, Sphere):
                sphs.append([*p.center, p.radius]); ids["sphere"].append(p.object_id)
            else:
                raise TypeError(f"unknown primitive {p!r}")

        def arr(rows, w):
            return np.array(rows, dtype=np.float64).reshape(-1, w)

        def iarr(v):
            return np.array(v, dtype=np.int64)

        return dict(planes=arr(planes, 1), plane_ids=iarr(ids["plane"]),
                    boxes=arr(boxes, 8), box_ids=iarr(ids["box"]),
                    cylinders=arr(cyls, 5), cylinder_ids=iarr(ids["cylinder"]),
                    spheres=arr(sphs, 4), sphere_ids=iarr(ids["sphere"]))

    @cached_property
    def reflectivity(self) -> dict:
        return {p.object_id: p.reflectivity for p in self.primitives}

    def cast(self, origin, dirs) -> tuple[np.ndarray, np.ndarray]:
        """Batch raycast from one origin; misses are ``(inf, -1)``."""
        return kernels.cast_rays(np.asarray(origin, dtype=np.float64), dirs,
                                 max_range=float(self.max_range), **self.packed)


@dataclass(frozen=True)
class SceneScript:
    statics: tuple = ()
    persons: tuple = ()
    mount: SensorMount = field(default_factory=SensorMount)
    scan: ScanConfig = field(default_factory=ScanConfig)
    frame_times: tuple = ()
    seed: int = 0
    max_range: float = DEFAULT_MAX_RANGE

    def __post_init__(self):
        object.__setattr__(self, "statics", tuple(self.statics))
        object.__setattr__(self, "persons", tuple(self.persons))
        object.__setattr__(self, "frame_times", tuple(float(t) for t in self.frame_times))
        for p in self.statics:
            _check_primitive(p)
        ids = [p.object_id for p in self.statics] + [p.model.object_id for p in self.persons]
        if len(set(ids)) != len(ids):
            raise ValueError("object ids must be unique within a scene")
        if any(i < 0 for i in ids):
            raise ValueError("object ids must be non-negative")
        ft = self.frame_times
        if any(b <= a for a, b in zip(ft, ft[1:])):
            raise ValueError("frame_times must be strictly increasing")
        if not self.max_range > 0:
            raise ValueError("max_range must be positive")
        if self.persons and not (3 <= len(self.persons) <= 10):
            log.warning("scene has %d persons; 3 to 10 per scene is the recommended range", len(self.persons))

    def at(self, t: float) -> SceneSnapshot:
        prims = list(self.statics)
        present = []
        for person in self.persons:
            if t < person.trajectory.start_time:
                continue
            pos, heading = person_pose_at(person.trajectory, t)
            prims.extend(person.model.primitives(pos))
            present.append((person.model, pos, heading))
        return SceneSnapshot(float(t), tuple(prims), tuple(present), self.max_range)

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        statics = []
        for p in self.statics:
            if isinstance(p, GroundPlane):
                statics.append({"type": "ground", "id": p.object_id, "z": p.z, "reflectivity": p.reflectivity})
            elif isinstance(p, BoxPrimitive):
                b = p.box
                statics.append({"type": "box", "id": p.object_id, "center": b.center.tolist(),
                                "size": [b.dx, b.dy, b.dz], "yaw": math.degrees(b.yaw),
                                "reflectivity": p.reflectivity})
            elif isinstance(p, Cylinder):
                statics.append({"type": "cylinder", "id": p.object_id, "center": list(p.center),
                                "radius": p.radius, "height": p.height, "reflectivity": p.reflectivity})
            elif isinstance(p, Sphere):
                statics.append({"type": "sphere", "id": p.object_id, "center": list(p.center),
                                "radius": p.radius, "reflectivity": p.reflectivity})
        persons = [{
            "id": p.model.object_id, "height": p.model.height, "body_radius": p.model.body_radius,
            "reflectivity": p.model.reflectivity,
            "trajectory": {"waypoints": [list(w) for w in p.trajectory.waypoints],
                           "speed": p.trajectory.speed, "start_time": p.trajectory.start_time},
        } for p in self.persons]
        return {"statics": statics, "persons": persons, "mount": self.mount.to_dict(),
                "sensor": self.scan.to_dict(), "frame_times": list(self.frame_times),
                "seed": self.seed, "max_range": self.max_range}

    @classmethod
    def from_dict(cls, d: dict) -> SceneScript:
        d = dict(d)
        unknown = set(d) - {"statics", "persons", "mount", "sensor", "frame_times", "seed", "max_range"}
        if unknown:
            raise ValueError(f"unknown scene keys: {sorted(unknown)}")
        statics = [_primitive_from_dict(s) for s in d.get("statics", [])]
        persons = []
        for p in d.get("persons", []):
            tr = p["trajectory"]
            model = PersonModel(int(p["id"]), float(p.get("height", 1.75)), float(p.get("body_radius", 0.25)),
                                float(p.get("reflectivity", 0.6)))
            persons.append(Person(model, Trajectory(tr["waypoints"], float(tr["speed"]),
                                                    float(tr.get("start_time", 0.0)))))
        ft = d.get("frame_times", [])
        if isinstance(ft, dict):
            start, step, count = float(ft.get("start", 0.0)), float(ft["step"]), int(ft["count"])
            ft = [start + i * step for i in range(count)]
        return cls(statics, persons, SensorMount.from_dict(d.get("mount")), ScanConfig.from_dict(d.get("sensor")),
                   ft, int(d.get("seed", 0)), float(d.get("max_range", DEFAULT_MAX_RANGE)))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> SceneScript:
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"{path}: malformed scene script ({exc!r})") from exc


def _primitive_from_dict(s: dict):
    kind = s.get("type")
    oid = int(s["id"])
    refl = float(s.get("reflectivity", 0.2 if kind == "ground" else 0.5))
    if kind == "ground":
        return GroundPlane(oid, float(s.get("z", 0.0)), refl)
    if kind == "box":
        dx, dy, dz = (float(v) for v in s["size"])
        return BoxPrimitive(oid, Box3D(np.asarray(s["center"], dtype=float), dx, dy, dz,
                                       math.radians(float(s.get("yaw", 0.0)))), refl)
    if kind == "cylinder":
        c = [float(v) for v in s["center"]]
        if len(c) == 2:
            c.append(0.0)
        return Cylinder(oid, tuple(c), float(s["radius"]), float(s["height"]), refl)
    if kind == "sphere":
        return Sphere(oid, tuple(float(v) for v in s["center"]), float(s["radius"]), refl)
    raise ValueError(f"unknown primitive type {kind!r}")


def raycast(scene: SceneSnapshot, origin, direction) -> tuple[float, int] | None:
    d = np.asarray(direction, dtype=np.float64).reshape(3)
    if abs(float(np.linalg.norm(d)) - 1.0) > 1e-9:
        raise ValueError("ray direction must be a unit vector")
    t, oid = scene.cast(origin, d.reshape(1, 3))
    if not np.isfinite(t[0]):
        return None
    return float(t[0]), int(oid[0])


def pixel_rays(k: CameraIntrinsics) -> np.ndarray:
    """Unnormalized camera-frame rays (z = 1) for every pixel center, ``(H, W, 3)``."""
    u = np.arange(k.width, dtype=np.float64)
    v = np.arange(k.height, dtype=np.float64)
    x = (u - k.cx) / k.fx
    y = (v - k.cy) / k.fy
    rays = np.empty((k.height, k.width, 3))
    rays[..., 0] = x[None, :]
    rays[..., 1] = y[:, None]
    rays[..., 2] = 1.0
    return rays


def render_depth(scene: SceneSnapshot, sensor_pose: RigidTransform, k: CameraIntrinsics,
                 return_ids: bool = False):
    """Z-depth image of the scene seen from a forward-looking camera at the sensor.

    The camera shares the sensor origin and looks along the sensor x axis.
    Pixel ``(u, v)`` samples the ray that :func:`geometry.unproject` assigns
    to those integer coordinates. No-hit pixels hold ``+inf`` (id ``-1``).
    """
    rays_cam = pixel_rays(k).reshape(-1, 3)
    norms = np.linalg.norm(rays_cam, axis=1)
    # camera -> sensor -> world, normalized
    dirs = rays_cam @ (sensor_pose.rotation @ CAMERA_TO_LIDAR).T
    dirs /= norms[:, None]
    dist, ids = scene.cast(sensor_pose.translation, dirs)
    depth = (dist / norms).reshape(k.height, k.width)
    if return_ids:
        return depth, ids.reshape(k.height, k.width)
    return depth
