# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled ray casting and rotated-box IoU kernels.

Operation order matches ``_kernels_py`` so both backends agree bit for bit.
See that module for the packed primitive layouts.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cos, sin, fabs, INFINITY

cnp.import_array()

BACKEND = "cython"

cdef double EPS_T = 1e-9


cdef inline double _box_hit(double ox, double oy, double oz, double dx, double dy, double dz,
                            const double[:, ::1] boxes, Py_ssize_t k) nogil:
    cdef double cx = boxes[k, 0], cy = boxes[k, 1], cz = boxes[k, 2]
    cdef double hx = boxes[k, 3], hy = boxes[k, 4], hz = boxes[k, 5]
    cdef double c = boxes[k, 6], s = boxes[k, 7]
    cdef double px = ox - cx, py = oy - cy, pz = oz - cz
    cdef double lx = c * px + s * py
    cdef double ly = -s * px + c * py
    cdef double ldx = c * dx + s * dy
    cdef double ldy = -s * dx + c * dy
    cdef double tmin = -INFINITY, tmax = INFINITY
    cdef double lp[3]
    cdef double ld[3]
    cdef double hh[3]
    cdef double t1, t2, lo, hi
    cdef int ax
    lp[0] = lx; lp[1] = ly; lp[2] = pz
    ld[0] = ldx; ld[1] = ldy; ld[2] = dz
    hh[0] = hx; hh[1] = hy; hh[2] = hz
    for ax in range(3):
        if ld[ax] == 0.0:
            if fabs(lp[ax]) > hh[ax]:
                return INFINITY
            continue
        t1 = (-hh[ax] - lp[ax]) / ld[ax]
        t2 = (hh[ax] - lp[ax]) / ld[ax]
        if t1 < t2:
            lo = t1; hi = t2
        else:
            lo = t2; hi = t1
        if lo > tmin:
            tmin = lo
        if hi < tmax:
            tmax = hi
    if tmax < tmin:
        return INFINITY
    if tmin > EPS_T:
        return tmin
    if tmax > EPS_T:
        return tmax
    return INFINITY


cdef inline double _cylinder_hit(double ox, double oy, double oz, double dx, double dy, double dz,
                                 const double[:, ::1] cyl, Py_ssize_t k) nogil:
    cdef double bx = cyl[k, 0], by = cyl[k, 1], bz = cyl[k, 2], r = cyl[k, 3], h = cyl[k, 4]
    cdef double top = bz + h
    cdef double a = dx * dx + dy * dy
    cdef double ocx = ox - bx, ocy = oy - by
    cdef double b = ocx * dx + ocy * dy
    cdef double c = ocx * ocx + ocy * ocy - r * r
    cdef double disc = b * b - a * c
    cdef double cand = INFINITY
    cdef double sq, t, z, x, y, zc
    cdef int m
    if a > 0.0 and disc >= 0.0:
        sq = sqrt(disc)
        for m in range(2):
            if m == 0:
                t = (-b - sq) / a
            else:
                t = (-b + sq) / a
            z = oz + t * dz
            if t > EPS_T and z >= bz and z <= top and t < cand:
                cand = t
    if dz != 0.0:
        for m in range(2):
            zc = bz if m == 0 else top
            t = (zc - oz) / dz
            x = ox + t * dx - bx
            y = oy + t * dy - by
            if t > EPS_T and x * x + y * y <= r * r and t < cand:
                cand = t
    return cand


cdef inline double _sphere_hit(double ox, double oy, double oz, double dx, double dy, double dz,
                               const double[:, ::1] sph, Py_ssize_t k) nogil:
    cdef double ocx = ox - sph[k, 0], ocy = oy - sph[k, 1], ocz = oz - sph[k, 2], r = sph[k, 3]
    cdef double b = ocx * dx + ocy * dy + ocz * dz
    cdef double c = ocx * ocx + ocy * ocy + ocz * ocz - r * r
    cdef double disc = b * b - c
    cdef double sq, t1, t2
    if not (disc >= 0.0):
        return INFINITY
    sq = sqrt(disc)
    t1 = -b - sq
    t2 = -b + sq
    if t1 > EPS_T:
        return t1
    if t2 > EPS_T:
        return t2
    return INFINITY


def cast_rays(origin, dirs, planes, plane_ids, boxes, box_ids, cylinders, cylinder_ids,
              spheres, sphere_ids, double max_range):
    cdef const double[::1] o = np.ascontiguousarray(origin, dtype=np.float64).reshape(3)
    cdef const double[:, ::1] d = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    cdef const double[::1] pl = np.ascontiguousarray(planes, dtype=np.float64).reshape(-1)
    cdef const double[:, ::1] bx = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 8)
    cdef const double[:, ::1] cy = np.ascontiguousarray(cylinders, dtype=np.float64).reshape(-1, 5)
    cdef const double[:, ::1] sp = np.ascontiguousarray(spheres, dtype=np.float64).reshape(-1, 4)
    cdef const long long[::1] pl_id = np.ascontiguousarray(plane_ids, dtype=np.int64).reshape(-1)
    cdef const long long[::1] bx_id = np.ascontiguousarray(box_ids, dtype=np.int64).reshape(-1)
    cdef const long long[::1] cy_id = np.ascontiguousarray(cylinder_ids, dtype=np.int64).reshape(-1)
    cdef const long long[::1] sp_id = np.ascontiguousarray(sphere_ids, dtype=np.int64).reshape(-1)
    cdef Py_ssize_t n = d.shape[0]
    out_t = np.empty(n, dtype=np.float64)
    out_id = np.empty(n, dtype=np.int64)
    cdef double[::1] best = out_t
    cdef long long[::1] ids = out_id
    cdef double ox = o[0], oy = o[1], oz = o[2]
    cdef double dx, dy, dz, t, bt
    cdef long long bid
    cdef Py_ssize_t i, k
    with nogil:
        for i in range(n):
            dx = d[i, 0]; dy = d[i, 1]; dz = d[i, 2]
            bt = INFINITY
            bid = -1
            if dz != 0.0:
                for k in range(pl.shape[0]):
                    t = (pl[k] - oz) / dz
                    if t > EPS_T and t < bt:
                        bt = t; bid = pl_id[k]
            for k in range(bx.shape[0]):
                t = _box_hit(ox, oy, oz, dx, dy, dz, bx, k)
                if t < bt:
                    bt = t; bid = bx_id[k]
            for k in range(cy.shape[0]):
                t = _cylinder_hit(ox, oy, oz, dx, dy, dz, cy, k)
                if t < bt:
                    bt = t; bid = cy_id[k]
            for k in range(sp.shape[0]):
                t = _sphere_hit(ox, oy, oz, dx, dy, dz, sp, k)
                if t < bt:
                    bt = t; bid = sp_id[k]
            if bt > max_range:
                bt = INFINITY; bid = -1
            best[i] = bt
            ids[i] = bid
    return out_t, out_id


cdef int _rect(double cx, double cy, double dx, double dy, double yaw, double* px, double* py) nogil:
    cdef double c = cos(yaw), s = sin(yaw)
    cdef double hx = 0.5 * dx, hy = 0.5 * dy
    cdef double sx[4]
    cdef double sy[4]
    cdef double lx, ly
    cdef int j
    sx[0] = -1.0; sx[1] = 1.0; sx[2] = 1.0; sx[3] = -1.0
    sy[0] = -1.0; sy[1] = -1.0; sy[2] = 1.0; sy[3] = 1.0
    for j in range(4):
        lx = sx[j] * hx
        ly = sy[j] * hy
        px[j] = cx + c * lx - s * ly
        py[j] = cy + s * lx + c * ly
    return 4


cdef double _bev_area(double ax, double ay, double adx, double ady, double ayaw,
                      double bx, double by, double bdx, double bdy, double byaw) nogil:
    cdef double px[16]
    cdef double py[16]
    cdef double qx[16]
    cdef double qy[16]
    cdef double ex[4]
    cdef double ey[4]
    cdef double tol, ex0, ey0, ux, uy, sp, sq, t, area, pxj, pyj, qxj, qyj
    cdef int m, cnt, i, j, jn
    cdef bint p_in, q_in
    m = _rect(0.0, 0.0, adx, ady, ayaw, px, py)
    _rect(bx - ax, by - ay, bdx, bdy, byaw, ex, ey)
    tol = adx
    if ady > tol:
        tol = ady
    if bdx > tol:
        tol = bdx
    if bdy > tol:
        tol = bdy
    tol = 1e-12 * tol
    for i in range(4):
        ex0 = ex[i]; ey0 = ey[i]
        ux = ex[(i + 1) % 4] - ex0
        uy = ey[(i + 1) % 4] - ey0
        cnt = 0
        for j in range(m):
            jn = (j + 1) % m
            pxj = px[j]; pyj = py[j]; qxj = px[jn]; qyj = py[jn]
            sp = ux * (pyj - ey0) - uy * (pxj - ex0)
            sq = ux * (qyj - ey0) - uy * (qxj - ex0)
            p_in = sp >= -tol
            q_in = sq >= -tol
            if p_in:
                qx[cnt] = pxj; qy[cnt] = pyj; cnt += 1
            if p_in != q_in:
                t = sp / (sp - sq)
                qx[cnt] = pxj + t * (qxj - pxj)
                qy[cnt] = pyj + t * (qyj - pyj)
                cnt += 1
        m = cnt
        if m < 3:
            return 0.0
        for j in range(m):
            px[j] = qx[j]; py[j] = qy[j]
    area = 0.0
    for j in range(m):
        jn = (j + 1) % m
        area += px[j] * py[jn] - px[jn] * py[j]
    area = fabs(area) * 0.5
    if area < 1e-12:
        return 0.0
    if area > adx * ady:
        area = adx * ady
    if area > bdx * bdy:
        area = bdx * bdy
    return area


def bev_intersection_area(a, b):
    return _bev_area(a[0], a[1], a[2], a[3], a[4], b[0], b[1], b[2], b[3], b[4])


cdef double _iou_pair(const double[:, ::1] A, Py_ssize_t i, const double[:, ::1] B, Py_ssize_t j) nogil:
    cdef int k
    cdef bint same = True
    cdef double za0, za1, zb0, zb1, h, area, inter, union, lo, hi, r
    for k in range(7):
        if A[i, k] != B[j, k]:
            same = False
            break
    if same:
        return 1.0
    za0 = A[i, 2] - 0.5 * A[i, 5]
    za1 = A[i, 2] + 0.5 * A[i, 5]
    zb0 = B[j, 2] - 0.5 * B[j, 5]
    zb1 = B[j, 2] + 0.5 * B[j, 5]
    hi = za1 if za1 < zb1 else zb1
    lo = za0 if za0 > zb0 else zb0
    h = hi - lo
    if h <= 0.0:
        return 0.0
    area = _bev_area(A[i, 0], A[i, 1], A[i, 3], A[i, 4], A[i, 6],
                     B[j, 0], B[j, 1], B[j, 3], B[j, 4], B[j, 6])
    inter = area * h
    if inter <= 0.0:
        return 0.0
    union = A[i, 3] * A[i, 4] * A[i, 5] + B[j, 3] * B[j, 4] * B[j, 5] - inter
    r = inter / union
    if r > 1.0:
        return 1.0
    if r < 0.0:
        return 0.0
    return r


def iou3d_pair(a, b):
    A = np.ascontiguousarray(a, dtype=np.float64).reshape(1, 7)
    B = np.ascontiguousarray(b, dtype=np.float64).reshape(1, 7)
    return _iou_pair(A, 0, B, 0)


def iou3d_matrix(boxes_a, boxes_b):
    cdef const double[:, ::1] A = np.ascontiguousarray(boxes_a, dtype=np.float64).reshape(-1, 7)
    cdef const double[:, ::1] B = np.ascontiguousarray(boxes_b, dtype=np.float64).reshape(-1, 7)
    out = np.zeros((A.shape[0], B.shape[0]), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(A.shape[0]):
            for j in range(B.shape[0]):
                o[i, j] = _iou_pair(A, i, B, j)
    return out
