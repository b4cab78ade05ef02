"""Procedural example scenes: pedestrian crossings and a pathway.

The layouts are plausible reconstructions of public-area recording sites,
not replicas of any real location. Persons walk back and forth along their
route so they stay in view for the whole script.
"""
from __future__ import annotations

import math

import numpy as np

from .rng import Stream
from .scanpattern import ScanConfig
from .scene import (
    MOUNT_PRESETS, BoxPrimitive, Cylinder, GroundPlane, Person, PersonModel, SceneScript, Trajectory,
)
from .geometry import Box3D

LAYOUTS = ("crossing-1", "crossing-2", "crossing-3", "pathway")

# (route start, route end) in ground coordinates of a sensor at the origin
# looking along +x; routes are kept inside the 4 m / 16 deg footprint.
_ROUTES = {
    "crossing-1": ((14.0, -7.5), (14.0, 7.5)),
    "crossing-2": ((11.0, -6.0), (19.0, 7.0)),
    "crossing-3": ((20.0, -9.0), (16.0, 9.0)),
    "pathway": ((9.5, -1.5), (28.0, 2.5)),
}


def _statics(layout: str, rs: Stream) -> list:
    statics = [GroundPlane(0, 0.0, 0.2)]
    # building facade and a few bollards / a bench for background returns
    statics.append(BoxPrimitive(1, Box3D(np.array([45.0, 0.0, 4.0]), 1.0, 60.0, 8.0, 0.0), 0.3))
    for i in range(3):
        y = -10.0 + 10.0 * i + rs.uniform(low=-1.0, high=1.0)
        statics.append(Cylinder(2 + i, (24.0 + rs.uniform(low=-2, high=2), y, 0.0), 0.1, 1.0, 0.8))
    if layout == "pathway":
        statics.append(BoxPrimitive(5, Box3D(np.array([18.0, -4.5, 0.25]), 1.8, 0.5, 0.5, math.radians(10)), 0.4))
    return statics


def _route(layout: str, rs: Stream, lane: float):
    (x0, y0), (x1, y1) = _ROUTES[layout]
    d = np.array([x1 - x0, y1 - y0])
    n = np.array([-d[1], d[0]]) / np.linalg.norm(d)
    jitter = lambda: rs.uniform(low=-0.4, high=0.4)  # noqa: E731
    a = np.array([x0, y0]) + n * lane + jitter() * n
    b = np.array([x1, y1]) + n * lane + jitter() * n
    return a, b


def make_scene(layout: str = "crossing-1", num_persons: int = 6, num_frames: int = 50, frame_step: float = 0.1,
               seed: int = 0, mount: str = "campus", scan: ScanConfig | None = None) -> SceneScript:
    if layout not in _ROUTES:
        raise ValueError(f"unknown layout {layout!r}; choose from {LAYOUTS}")
    rs = Stream(seed, 1 + LAYOUTS.index(layout))
    duration = max(num_frames * frame_step, 1.0)
    persons = []
    for i in range(num_persons):
        lane = rs.uniform(low=-1.5, high=1.5)
        a, b = _route(layout, rs, lane)
        if rs.below(2):
            a, b = b, a
        speed = rs.uniform(low=0.9, high=1.6)
        frac = rs.uniform(low=0.0, high=0.95)
        start = a + frac * (b - a)
        legs = int(math.ceil(speed * duration / np.linalg.norm(b - a))) + 2
        waypoints = [start] + [b if k % 2 == 0 else a for k in range(legs)]
        model = PersonModel(100 + i, rs.uniform(low=1.55, high=1.95), rs.uniform(low=0.2, high=0.3),
                            rs.uniform(low=0.4, high=0.8))
        persons.append(Person(model, Trajectory([tuple(w) for w in waypoints], speed, 0.0)))
    times = [i * frame_step for i in range(num_frames)]
    return SceneScript(_statics(layout, rs), persons, MOUNT_PRESETS[mount], scan or ScanConfig(), times, seed)
