"""Pure-Python/numpy implementations of the hot kernels.

These mirror ``_kernels.pyx`` operation for operation so both backends give
the same floating-point results. Primitive arrays are packed as:

* planes    ``(P, 1)``: z0
* boxes     ``(B, 8)``: cx, cy, cz, half_x, half_y, half_z, cos(yaw), sin(yaw)
* cylinders ``(C, 5)``: base_x, base_y, base_z, radius, height
* spheres   ``(S, 4)``: cx, cy, cz, radius

Primitive groups are tested in that order; on exactly equal distances the
earlier primitive wins.
"""
from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

_EPS_T = 1e-9


def cast_rays(origin, dirs, planes, plane_ids, boxes, box_ids, cylinders, cylinder_ids,
              spheres, sphere_ids, max_range):
    """Nearest hit per ray from a shared origin.

    Returns ``(distance, object_id)``; misses get ``inf`` and ``-1``.
    """
    o = np.asarray(origin, dtype=np.float64)
    d = np.ascontiguousarray(dirs, dtype=np.float64)
    n = d.shape[0]
    best = np.full(n, np.inf)
    ids = np.full(n, -1, dtype=np.int64)
    ox, oy, oz = float(o[0]), float(o[1]), float(o[2])
    dx, dy, dz = d[:, 0], d[:, 1], d[:, 2]

    def take(t, oid):
        upd = t < best
        best[upd] = t[upd]
        ids[upd] = oid

    with np.errstate(divide="ignore", invalid="ignore"):
        nz = dz != 0.0
        for row, oid in zip(np.asarray(planes, dtype=np.float64).reshape(-1, 1), plane_ids):
            t = np.where(nz, (row[0] - oz) / dz, np.inf)
            t[~(t > _EPS_T)] = np.inf
            take(t, oid)

        for row, oid in zip(np.asarray(boxes, dtype=np.float64).reshape(-1, 8), box_ids):
            cx, cy, cz, hx, hy, hz, c, s = (float(x) for x in row)
            px, py, pz = ox - cx, oy - cy, oz - cz
            lx = c * px + s * py
            ly = -s * px + c * py
            ldx = c * dx + s * dy
            ldy = -s * dx + c * dy
            tmin = np.full(n, -np.inf)
            tmax = np.full(n, np.inf)
            miss = np.zeros(n, dtype=bool)
            for lp, ld, h in ((lx, ldx, hx), (ly, ldy, hy), (pz, dz, hz)):
                zero = ld == 0.0
                if abs(lp) > h:
                    miss |= zero
                t1 = (-h - lp) / ld
                t2 = (h - lp) / ld
                lo = np.where(zero, -np.inf, np.minimum(t1, t2))
                hi = np.where(zero, np.inf, np.maximum(t1, t2))
                tmin = np.maximum(tmin, lo)
                tmax = np.minimum(tmax, hi)
            miss |= tmax < tmin
            t = np.where(tmin > _EPS_T, tmin, np.where(tmax > _EPS_T, tmax, np.inf))
            t[miss] = np.inf
            take(t, oid)

        a = dx * dx + dy * dy
        for row, oid in zip(np.asarray(cylinders, dtype=np.float64).reshape(-1, 5), cylinder_ids):
            bx, by, bz, r, h = (float(x) for x in row)
            top = bz + h
            ocx, ocy = ox - bx, oy - by
            b = ocx * dx + ocy * dy
            c = ocx * ocx + ocy * ocy - r * r
            disc = b * b - a * c
            ok = (a > 0.0) & (disc >= 0.0)
            sq = np.sqrt(np.where(ok, disc, 0.0))
            cand = np.full(n, np.inf)
            for t in ((-b - sq) / a, (-b + sq) / a):
                z = oz + t * dz
                good = ok & (t > _EPS_T) & (z >= bz) & (z <= top)
                cand = np.where(good & (t < cand), t, cand)
            for zc in (bz, top):
                t = (zc - oz) / dz
                x = ox + t * dx - bx
                y = oy + t * dy - by
                good = nz & (t > _EPS_T) & (x * x + y * y <= r * r)
                cand = np.where(good & (t < cand), t, cand)
            take(cand, oid)

        for row, oid in zip(np.asarray(spheres, dtype=np.float64).reshape(-1, 4), sphere_ids):
            cx, cy, cz, r = (float(x) for x in row)
            ocx, ocy, ocz = ox - cx, oy - cy, oz - cz
            b = ocx * dx + ocy * dy + ocz * dz
            c = ocx * ocx + ocy * ocy + ocz * ocz - r * r
            disc = b * b - c
            ok = disc >= 0.0
            sq = np.sqrt(np.where(ok, disc, 0.0))
            t1 = -b - sq
            t2 = -b + sq
            t = np.where(t1 > _EPS_T, t1, np.where(t2 > _EPS_T, t2, np.inf))
            t[~ok] = np.inf
            take(t, oid)

    far = best > max_range
    best[far] = np.inf
    ids[far] = -1
    return best, ids


def _rect(cx, cy, dx, dy, yaw):
    c, s = math.cos(yaw), math.sin(yaw)
    hx, hy = 0.5 * dx, 0.5 * dy
    pts = []
    for sx, sy in ((-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)):
        lx, ly = sx * hx, sy * hy
        pts.append((cx + c * lx - s * ly, cy + s * lx + c * ly))
    return pts


def bev_intersection_area(a, b):
    """Area of the intersection of two yaw-rotated rectangles.

    ``a`` and ``b`` are ``(cx, cy, dx, dy, yaw)``. Coordinates are shifted to
    ``a``'s center before clipping to limit cancellation.
    """
    ax, ay = float(a[0]), float(a[1])
    poly = _rect(0.0, 0.0, float(a[2]), float(a[3]), float(a[4]))
    clip = _rect(float(b[0]) - ax, float(b[1]) - ay, float(b[2]), float(b[3]), float(b[4]))
    tol = 1e-12 * max(float(a[2]), float(a[3]), float(b[2]), float(b[3]))
    for i in range(4):
        ex0, ey0 = clip[i]
        ex1, ey1 = clip[(i + 1) % 4]
        ux, uy = ex1 - ex0, ey1 - ey0
        out = []
        m = len(poly)
        for j in range(m):
            px, py = poly[j]
            qx, qy = poly[(j + 1) % m]
            sp = ux * (py - ey0) - uy * (px - ex0)
            sq = ux * (qy - ey0) - uy * (qx - ex0)
            p_in = sp >= -tol
            q_in = sq >= -tol
            if p_in:
                out.append((px, py))
            if p_in != q_in:
                t = sp / (sp - sq)
                out.append((px + t * (qx - px), py + t * (qy - py)))
        poly = out
        if len(poly) < 3:
            return 0.0
    area = 0.0
    m = len(poly)
    for j in range(m):
        px, py = poly[j]
        qx, qy = poly[(j + 1) % m]
        area += px * qy - qx * py
    area = abs(area) * 0.5
    if area < 1e-12:
        return 0.0
    return min(area, float(a[2]) * float(a[3]), float(b[2]) * float(b[3]))


def iou3d_pair(a, b):
    """Rotated 3D IoU of two ``[cx, cy, cz, dx, dy, dz, yaw]`` rows."""
    if all(float(a[i]) == float(b[i]) for i in range(7)):
        return 1.0
    za0, za1 = a[2] - 0.5 * a[5], a[2] + 0.5 * a[5]
    zb0, zb1 = b[2] - 0.5 * b[5], b[2] + 0.5 * b[5]
    h = min(za1, zb1) - max(za0, zb0)
    if h <= 0.0:
        return 0.0
    area = bev_intersection_area((a[0], a[1], a[3], a[4], a[6]), (b[0], b[1], b[3], b[4], b[6]))
    inter = area * h
    if inter <= 0.0:
        return 0.0
    union = a[3] * a[4] * a[5] + b[3] * b[4] * b[5] - inter
    return min(1.0, max(0.0, inter / union))


def iou3d_matrix(boxes_a, boxes_b):
    A = np.asarray(boxes_a, dtype=np.float64).reshape(-1, 7)
    B = np.asarray(boxes_b, dtype=np.float64).reshape(-1, 7)
    out = np.zeros((A.shape[0], B.shape[0]))
    al, bl = A.tolist(), B.tolist()
    for i, a in enumerate(al):
        for j, b in enumerate(bl):
            out[i, j] = iou3d_pair(a, b)
    return out
