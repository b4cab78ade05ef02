"""MEMS mirror scan trajectory.

The pattern is an approximation of the Cube 1 "eye" pattern: a fast
horizontal sinusoid with one half-period per scan line and a single slow
vertical cosine sweep from top to bottom, sampled uniformly in time.

Direction convention: a beam with azimuth ``a`` and elevation ``e`` points
along ``(1, tan a, tan e)`` in the sensor frame (x forward, y left, z up),
i.e. ``a = atan2(y, x)`` and ``e = atan2(z, x)``. The same tangent-plane
parametrization is used when mapping directions into a depth image, so the
direct and depth-image generation paths share one beam geometry.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import NamedTuple

import numpy as np

from .geometry import CameraIntrinsics


@dataclass(frozen=True)
class ScanConfig:
    num_scanlines: int = 200
    fov_h: float = math.radians(72.0)
    fov_v: float = math.radians(30.0)
    points_per_line: int = 100
    frame_rate: float = 10.0  # metadata only

    def __post_init__(self):
        if int(self.num_scanlines) != self.num_scanlines or self.num_scanlines < 2 or self.num_scanlines % 2:
            raise ValueError(f"num_scanlines must be an even integer >= 2, got {self.num_scanlines}")
        if int(self.points_per_line) != self.points_per_line or self.points_per_line < 2:
            raise ValueError(f"points_per_line must be an integer >= 2, got {self.points_per_line}")
        if not (0.0 < self.fov_h < math.pi):
            raise ValueError(f"fov_h must lie in (0, pi), got {self.fov_h}")
        if not (0.0 < self.fov_v < math.pi):
            raise ValueError(f"fov_v must lie in (0, pi), got {self.fov_v}")

    @property
    def num_points(self) -> int:
        return self.num_scanlines * self.points_per_line

    def to_dict(self) -> dict:
        """Serialize with angles in degrees."""
        d = asdict(self)
        d["fov_h"] = math.degrees(self.fov_h)
        d["fov_v"] = math.degrees(self.fov_v)
        return d

    @classmethod
    def from_dict(cls, d: dict | None) -> ScanConfig:
        d = dict(d or {})
        kw = {}
        for key in ("num_scanlines", "points_per_line"):
            if key in d:
                kw[key] = int(d.pop(key))
        for key in ("fov_h", "fov_v"):
            if key in d:
                kw[key] = math.radians(float(d.pop(key)))
        if "frame_rate" in d:
            kw["frame_rate"] = float(d.pop("frame_rate"))
        if d:
            raise ValueError(f"unknown sensor keys: {sorted(d)}")
        return cls(**kw)


class ScanDirections(NamedTuple):
    """Ordered beam directions of one frame, stored column-wise."""

    azimuth: np.ndarray
    elevation: np.ndarray
    sample_index: np.ndarray

    def __len__(self):
        return len(self.sample_index)

    def unit_vectors(self) -> np.ndarray:
        """Sensor-frame unit beam vectors, ``(N, 3)``."""
        v = np.stack([np.ones_like(self.azimuth), np.tan(self.azimuth), np.tan(self.elevation)], axis=-1)
        return v / np.linalg.norm(v, axis=1, keepdims=True)


def generate_scan_directions(cfg: ScanConfig) -> ScanDirections:
    n = cfg.num_points
    idx = np.arange(n)
    t = idx / (n - 1)
    az = (cfg.fov_h / 2.0) * np.sin(math.pi * cfg.num_scanlines * t)
    el = (cfg.fov_v / 2.0) * np.cos(math.pi * t)
    return ScanDirections(az, el, idx)


def directions_to_angles(points) -> tuple[np.ndarray, np.ndarray]:
    """Recover (azimuth, elevation) from sensor-frame points or rays."""
    p = np.asarray(points, dtype=np.float64)
    return np.arctan2(p[..., 1], p[..., 0]), np.arctan2(p[..., 2], p[..., 0])


def directions_to_pixels(dirs: ScanDirections, k: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Nearest pixel centers ``(u, v)`` of each beam in a forward-looking camera.

    Positive azimuth (left) maps to smaller ``u``; positive elevation (up) to
    smaller ``v``. Rays more than one pixel outside the image raise, anything
    closer is clamped to the border.
    """
    # camera ray at unit depth is (-tan a, -tan e, 1)
    u = k.fx * -np.tan(dirs.azimuth) + k.cx
    v = k.fy * -np.tan(dirs.elevation) + k.cy
    slack = 1.0 + 1e-6
    bad = (u < -slack) | (u > k.width - 1 + slack) | (v < -slack) | (v > k.height - 1 + slack)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(
            f"scan direction {i} maps to pixel ({u[i]:.2f}, {v[i]:.2f}) outside the "
            f"{k.width}x{k.height} image: FoV and intrinsics do not match")
    ui = np.clip(np.floor(u + 0.5), 0, k.width - 1).astype(np.int64)
    vi = np.clip(np.floor(v + 0.5), 0, k.height - 1).astype(np.int64)
    return ui, vi


def pixel_angular_pitch(cfg: ScanConfig, width: int, height: int) -> float:
    """Per-pixel angular pitch used by the depth-path quantization bound."""
    fov_v_eff = 2.0 * math.atan(height / width * math.tan(cfg.fov_h / 2.0))
    return max(cfg.fov_h / width, fov_v_eff / height)
