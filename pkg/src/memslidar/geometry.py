"""Rigid transforms, pinhole intrinsics and oriented boxes.

Conventions used throughout the package:

* Points are ``float64`` numpy arrays of shape ``(3,)`` or ``(N, 3)``.
* LiDAR / world frames: x forward, y left, z up.
* Camera frame: x right, y down, z forward (optical axis).
* Integer pixel coordinates denote pixel *centers*: the ray through pixel
  ``(u, v)`` is exactly the one :func:`unproject` defines for those values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ORTHO_TOL = 1e-9


def wrap_angle(a: float) -> float:
    """Map an angle to ``[-pi, pi)``; in-range angles pass through untouched."""
    if -math.pi <= a < math.pi:
        return a
    w = math.fmod(a + math.pi, 2.0 * math.pi)
    if w < 0.0:
        w += 2.0 * math.pi
    w -= math.pi
    # fmod rounding can land exactly on +pi
    if w >= math.pi:
        w -= 2.0 * math.pi
    return w


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def axis_angle(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about ``axis`` (normalized here)."""
    k = np.asarray(axis, dtype=np.float64)
    k = k / np.linalg.norm(k)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(angle) * kx + (1.0 - math.cos(angle)) * (kx @ kx)


def _vec3(p) -> np.ndarray:
    v = np.asarray(p, dtype=np.float64)
    if v.shape[-1] != 3:
        raise ValueError(f"expected trailing dimension 3, got shape {v.shape}")
    return v


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """``p -> rotation @ p + translation``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise ValueError("transform has non-finite entries")
        if np.max(np.abs(r.T @ r - np.eye(3))) > ORTHO_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > ORTHO_TOL:
            raise ValueError("rotation is not proper (det != +1)")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls()

    def apply(self, p) -> np.ndarray:
        """Transform one point ``(3,)`` or a batch ``(N, 3)``."""
        p = _vec3(p)
        return p @ self.rotation.T + self.translation

    def apply_vector(self, v) -> np.ndarray:
        """Rotate directions without translating them."""
        return _vec3(v) @ self.rotation.T

    def inverse(self) -> RigidTransform:
        rt = self.rotation.T
        return RigidTransform(rt, -(rt @ self.translation))

    def compose(self, other: RigidTransform) -> RigidTransform:
        """``self o other``: apply ``other`` first."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    __matmul__ = compose

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def __repr__(self):
        return f"RigidTransform(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"


def apply(t: RigidTransform, p) -> np.ndarray:
    return t.apply(p)


def inverse(t: RigidTransform) -> RigidTransform:
    return t.inverse()


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    return a.compose(b)


@dataclass(frozen=True, eq=False)
class Box3D:
    """Cuboid with extents ``(dx, dy, dz)`` rotated by ``yaw`` about +z."""

    center: np.ndarray
    dx: float
    dy: float
    dz: float
    yaw: float = 0.0

    def __post_init__(self):
        c = np.array(self.center, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(c)):
            raise ValueError("box center must be finite")
        for name in ("dx", "dy", "dz"):
            v = float(getattr(self, name))
            if not (v > 0.0 and math.isfinite(v)):
                raise ValueError(f"box extent {name} must be positive, got {v}")
            object.__setattr__(self, name, v)
        if not math.isfinite(self.yaw):
            raise ValueError("box yaw must be finite")
        c.flags.writeable = False
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    @property
    def extents(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dz])

    @property
    def volume(self) -> float:
        return self.dx * self.dy * self.dz

    def as_array(self) -> np.ndarray:
        """``[cx, cy, cz, dx, dy, dz, yaw]``."""
        return np.array([*self.center, self.dx, self.dy, self.dz, self.yaw])

    @classmethod
    def from_array(cls, a) -> Box3D:
        a = [float(x) for x in a]
        return cls(np.array(a[:3]), a[3], a[4], a[5], a[6])

    def replace(self, **kw) -> Box3D:
        args = dict(center=self.center, dx=self.dx, dy=self.dy, dz=self.dz, yaw=self.yaw)
        args.update(kw)
        return Box3D(**args)

    def __repr__(self):
        cx, cy, cz = self.center
        return (f"Box3D(center=({cx:.6g}, {cy:.6g}, {cz:.6g}), "
                f"dx={self.dx:.6g}, dy={self.dy:.6g}, dz={self.dz:.6g}, yaw={self.yaw:.6g})")


# Local corner signs: bottom face counter-clockwise seen from +z, starting at
# (-dx/2, -dy/2), then the top face in the same angular order.
_CORNER_SIGNS = np.array([
    [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
    [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1],
], dtype=np.float64)


def box_corners(b: Box3D) -> np.ndarray:
    """Return the ``(8, 3)`` corners in the fixed documented order."""
    local = _CORNER_SIGNS * (0.5 * b.extents)
    return local @ rot_z(b.yaw).T + b.center


def box_local(b: Box3D, p) -> np.ndarray:
    """Express points in the box frame (un-center, then un-yaw)."""
    p = _vec3(p)
    d = p - b.center
    c, s = math.cos(b.yaw), math.sin(b.yaw)
    lx = c * d[..., 0] + s * d[..., 1]
    ly = -s * d[..., 0] + c * d[..., 1]
    return np.stack([lx, ly, d[..., 2]], axis=-1)


def point_in_box(b: Box3D, p, eps: float = 0.0):
    """Boundary-inclusive containment; vectorized over ``(N, 3)`` input."""
    local = box_local(b, p)
    half = 0.5 * b.extents + eps
    inside = np.all(np.abs(local) <= half, axis=-1)
    return bool(inside) if inside.ndim == 0 else inside


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if int(self.width) != self.width or int(self.height) != self.height:
            raise ValueError("image size must be integral")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def inverse_matrix(self) -> np.ndarray:
        return np.array([
            [1.0 / self.fx, 0.0, -self.cx / self.fx],
            [0.0, 1.0 / self.fy, -self.cy / self.fy],
            [0.0, 0.0, 1.0],
        ])

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": int(self.width), "height": int(self.height)}

    @classmethod
    def from_dict(cls, d: dict) -> CameraIntrinsics:
        return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
                   int(d["width"]), int(d["height"]))


def intrinsics_from_fov(fov_h: float, width: int, height: int) -> CameraIntrinsics:
    """Square-pixel pinhole from the horizontal field of view."""
    if not (0.0 < fov_h < math.pi):
        raise ValueError(f"horizontal FoV must lie in (0, pi), got {fov_h}")
    if width < 1 or height < 1:
        raise ValueError("image size must be at least 1x1")
    f = width / (2.0 * math.tan(fov_h / 2.0))
    return CameraIntrinsics(f, f, width / 2.0, height / 2.0, int(width), int(height))


def unproject(k: CameraIntrinsics, u, v, depth) -> np.ndarray:
    """Pixel + z-depth to a camera-frame point (vectorized)."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if np.any(~(depth > 0)):
        raise ValueError("depth must be positive")
    x = (u - k.cx) / k.fx * depth
    y = (v - k.cy) / k.fy * depth
    return np.stack(np.broadcast_arrays(x, y, depth), axis=-1)


def project(k: CameraIntrinsics, p_cam):
    """Camera-frame point to ``(u, v, depth)``; rejects points behind the camera."""
    p = _vec3(p_cam)
    z = p[..., 2]
    if np.any(~(z > 0)):
        raise ValueError("point is behind the camera (z <= 0)")
    u = k.fx * p[..., 0] / z + k.cx
    v = k.fy * p[..., 1] / z + k.cy
    if np.ndim(z) == 0:
        return float(u), float(v), float(z)
    return u, v, z


def camera_to_lidar(p_cam) -> np.ndarray:
    """(x right, y down, z forward) -> (x forward, y left, z up)."""
    p = _vec3(p_cam)
    return np.stack([p[..., 2], -p[..., 0], -p[..., 1]], axis=-1)


def lidar_to_camera(p_lidar) -> np.ndarray:
    p = _vec3(p_lidar)
    return np.stack([-p[..., 1], -p[..., 2], p[..., 0]], axis=-1)


# Rotation that maps camera-frame vectors into the LiDAR frame.
CAMERA_TO_LIDAR = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
