"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each workload runs on both backends; outputs are checked for bit equality
before timings are reported.
"""
import argparse
import math
import time

import numpy as np

from memslidar import _backend
from memslidar.geometry import Box3D, intrinsics_from_fov
from memslidar.presets import make_scene
from memslidar.scanpattern import generate_scan_directions
from memslidar.scene import CAMERA_TO_LIDAR, mount_to_transform, pixel_rays


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def workloads():
    scene = make_scene("crossing-3", num_persons=10, num_frames=1, seed=0)
    snap = scene.at(scene.frame_times[0])
    pose = mount_to_transform(scene.mount)
    origin = pose.translation
    scan = generate_scan_directions(scene.scan).unit_vectors() @ pose.rotation.T
    k = intrinsics_from_fov(math.radians(72), 1024, 768)
    rays = pixel_rays(k).reshape(-1, 3)
    pix = rays @ (pose.rotation @ CAMERA_TO_LIDAR).T
    pix /= np.linalg.norm(pix, axis=1)[:, None]

    rng = np.random.default_rng(0)

    def rows(n):
        return np.array([Box3D(rng.uniform(-2, 2, 3), *rng.uniform(0.3, 2.0, 3),
                               rng.uniform(-math.pi, math.pi)).as_array() for _ in range(n)])
    a, b = rows(200), rows(200)

    def cast(kern, dirs):
        return lambda: kern.cast_rays(origin, dirs, max_range=float(snap.max_range), **snap.packed)
    return [
        ("cast_rays, scan pattern (20k rays)", lambda kern: cast(kern, scan)),
        ("cast_rays, depth image 1024x768", lambda kern: cast(kern, pix)),
        ("iou3d_matrix 200x200", lambda kern: (lambda: kern.iou3d_matrix(a, b))),
    ]


def same(x, y):
    if isinstance(x, tuple):
        return all(same(p, q) for p, q in zip(x, y))
    return np.array_equal(np.asarray(x), np.asarray(y))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    names = _backend.available()
    kerns = {n: _backend.load(n) for n in names}
    print(f"backends: {', '.join(names)}")
    print(f"{'workload':40s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, make in workloads():
        res = {n: best_of(make(kerns[n]), args.repeat) for n in names}
        outs = [r[1] for r in res.values()]
        if not all(same(outs[0], o) for o in outs[1:]):
            raise SystemExit(f"backends disagree on {label}")
        line = f"{label:40s}" + "".join(f"{res[n][0] * 1e3:10.1f}ms" for n in names)
        if len(names) > 1:
            line += f"{res['python'][0] / res['cython'][0]:11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
