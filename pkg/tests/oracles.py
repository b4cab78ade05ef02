"""Independent reference implementations used by the tests.

None of these import the code under test beyond plain data types.
"""
import math

import numpy as np


def box_rows(boxes):
    return [(np.asarray(b.center, dtype=float), b.dx, b.dy, b.dz, b.yaw) for b in boxes]


def _inside(pts, center, dx, dy, dz, yaw):
    q = pts - center
    c, s = math.cos(yaw), math.sin(yaw)
    lx = c * q[:, 0] + s * q[:, 1]
    ly = -s * q[:, 0] + c * q[:, 1]
    return (np.abs(lx) <= dx / 2) & (np.abs(ly) <= dy / 2) & (np.abs(q[:, 2]) <= dz / 2)


def _corners(center, dx, dy, dz, yaw):
    c, s = math.cos(yaw), math.sin(yaw)
    out = []
    for sx in (-1, 1):
        for sy in (-1, 1):
            for sz in (-1, 1):
                x, y, z = sx * dx / 2, sy * dy / 2, sz * dz / 2
                out.append(center + [c * x - s * y, s * x + c * y, z])
    return np.array(out)


def monte_carlo_iou(a, b, n=1_000_000, seed=0, chunk=250_000):
    """IoU by uniform sampling of the bounding box of both boxes."""
    (ca, *ra), (cb, *rb) = box_rows([a, b])
    pts = np.vstack([_corners(ca, *ra), _corners(cb, *rb)])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    rng = np.random.default_rng(seed)
    inter = union = 0
    for start in range(0, n, chunk):
        m = min(chunk, n - start)
        p = lo + (hi - lo) * rng.random((m, 3))
        ia, ib = _inside(p, ca, *ra), _inside(p, cb, *rb)
        inter += int(np.count_nonzero(ia & ib))
        union += int(np.count_nonzero(ia | ib))
    return inter / union if union else 0.0


def axis_aligned_iou(a, b):
    inter = 1.0
    for k, (ea, eb) in enumerate(((a.dx, b.dx), (a.dy, b.dy), (a.dz, b.dz))):
        lo = max(a.center[k] - ea / 2, b.center[k] - eb / 2)
        hi = min(a.center[k] + ea / 2, b.center[k] + eb / 2)
        inter *= max(0.0, hi - lo)
    va, vb = a.dx * a.dy * a.dz, b.dx * b.dy * b.dz
    return inter / (va + vb - inter)


def greedy_flags(dets, gts, iou_fn, threshold):
    """dets: list of (confidence, box); returns [(confidence, is_tp)]."""
    order = sorted(range(len(dets)), key=lambda i: (-dets[i][0], float(np.linalg.norm(dets[i][1].center)), i))
    used = [False] * len(gts)
    out = []
    for i in order:
        best, best_j = -1.0, -1
        for j, g in enumerate(gts):
            if used[j]:
                continue
            v = iou_fn(dets[i][1], g)
            if v > best:
                best, best_j = v, j
        ok = best_j >= 0 and best >= threshold
        if ok:
            used[best_j] = True
        out.append((dets[i][0], ok))
    return out


def brute_force_ap(scored_flags, total_gt):
    """Every-threshold AP: PR points at each distinct confidence, integrated under the envelope."""
    if total_gt == 0:
        return 1.0 if not scored_flags else 0.0
    points = []
    for c in sorted({s for s, _ in scored_flags}, reverse=True):
        kept = [f for s, f in scored_flags if s >= c]
        tp = sum(kept)
        points.append((tp / total_gt, tp / len(kept)))
    ap, prev = 0.0, 0.0
    for r in sorted({r for r, _ in points}):
        env = max(p for rr, p in points if rr >= r)
        ap += (r - prev) * env
        prev = r
    return ap
