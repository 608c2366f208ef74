# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the routines in ``_pykernels``.

Operation order matches the Python reference exactly; build without
floating-point contraction so results agree bit for bit.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, fabs, floor, ceil

cnp.import_array()

cdef double ON_EDGE_EPS = 1e-9
cdef double SLIVER_AREA = 1e-12
cdef double DEDUP_EPS = 1e-9
cdef enum:
    MAXV = 64

cdef enum:
    NEGATIVE = 0
    POSITIVE = 1
    IGNORE = 2


cdef inline void _corners(const double* b, double* xs, double* ys) noexcept nogil:
    cdef double c = cos(b[4])
    cdef double s = sin(b[4])
    cdef double ux = 0.5 * b[2] * c
    cdef double uy = 0.5 * b[2] * s
    cdef double vx = -0.5 * b[3] * s
    cdef double vy = 0.5 * b[3] * c
    xs[0] = b[0] - ux - vx
    ys[0] = b[1] - uy - vy
    xs[1] = b[0] + ux - vx
    ys[1] = b[1] + uy - vy
    xs[2] = b[0] + ux + vx
    ys[2] = b[1] + uy + vy
    xs[3] = b[0] - ux + vx
    ys[3] = b[1] - uy + vy


cdef inline int _push(double* ox, double* oy, int n, double x, double y) noexcept nogil:
    if n > 0 and fabs(ox[n - 1] - x) <= DEDUP_EPS and fabs(oy[n - 1] - y) <= DEDUP_EPS:
        return n
    if n >= MAXV:
        return n
    ox[n] = x
    oy[n] = y
    return n + 1


cdef int _clip(double* sx, double* sy, int ns, const double* cx, const double* cy, int nc,
               double* ox, double* oy) noexcept nogil:
    """Clip polygon s by convex polygon c; result in (ox, oy). Buffers hold MAXV points."""
    cdef double bufx[MAXV]
    cdef double bufy[MAXV]
    cdef int n = ns
    cdef int i, k, m
    cdef double ax, ay, bx, by, ex, ey, inv_len, px, py, dp, qx, qy, dq, t
    for k in range(ns):
        ox[k] = sx[k]
        oy[k] = sy[k]
    for i in range(nc):
        if n == 0:
            break
        ax = cx[i]
        ay = cy[i]
        bx = cx[(i + 1) % nc]
        by = cy[(i + 1) % nc]
        ex = bx - ax
        ey = by - ay
        inv_len = 1.0 / sqrt(ex * ex + ey * ey)
        for k in range(n):
            bufx[k] = ox[k]
            bufy[k] = oy[k]
        m = 0
        px = bufx[n - 1]
        py = bufy[n - 1]
        dp = (ex * (py - ay) - ey * (px - ax)) * inv_len
        for k in range(n):
            qx = bufx[k]
            qy = bufy[k]
            dq = (ex * (qy - ay) - ey * (qx - ax)) * inv_len
            if dq >= -ON_EDGE_EPS:
                if dp < -ON_EDGE_EPS:
                    t = dp / (dp - dq)
                    m = _push(ox, oy, m, px + t * (qx - px), py + t * (qy - py))
                m = _push(ox, oy, m, qx, qy)
            elif dp >= -ON_EDGE_EPS:
                t = dp / (dp - dq)
                m = _push(ox, oy, m, px + t * (qx - px), py + t * (qy - py))
            px = qx
            py = qy
            dp = dq
        if m > 1 and fabs(ox[m - 1] - ox[0]) <= DEDUP_EPS and fabs(oy[m - 1] - oy[0]) <= DEDUP_EPS:
            m -= 1
        n = m
    return n


cdef inline double _area(const double* xs, const double* ys, int n) noexcept nogil:
    cdef double acc = 0.0
    cdef double area
    cdef int i
    if n < 3:
        return 0.0
    for i in range(1, n - 1):
        acc += (xs[i] - xs[0]) * (ys[i + 1] - ys[0]) - (xs[i + 1] - xs[0]) * (ys[i] - ys[0])
    area = 0.5 * acc
    if area < SLIVER_AREA:
        return 0.0
    return area


cdef inline bint _greater(const double* a, const double* b) noexcept nogil:
    cdef int k
    for k in range(5):
        if a[k] > b[k]:
            return True
        if a[k] < b[k]:
            return False
    return False


cdef double _inter(const double* a, const double* b) noexcept nogil:
    cdef double ax[MAXV]
    cdef double ay[MAXV]
    cdef double bx[4]
    cdef double by[4]
    cdef double ox[MAXV]
    cdef double oy[MAXV]
    cdef int n
    if _greater(a, b):
        a, b = b, a
    _corners(a, ax, ay)
    _corners(b, bx, by)
    n = _clip(ax, ay, 4, bx, by, 4, ox, oy)
    return _area(ox, oy, n)


cdef double _iou(const double* a, const double* b) noexcept nogil:
    cdef double inter, union, iou
    if _greater(a, b):
        a, b = b, a
    if a[0] == b[0] and a[1] == b[1] and a[2] == b[2] and a[3] == b[3] and a[4] == b[4]:
        return 1.0
    inter = _inter(a, b)
    if inter <= 0.0:
        return 0.0
    union = a[2] * a[3] + b[2] * b[3] - inter
    if union <= 0.0:
        return 0.0
    iou = inter / union
    if iou > 1.0:
        return 1.0
    return iou


cdef void _intercept(const double* p, const double* g, double* out) noexcept nogil:
    cdef double wp = p[2]
    cdef double xg = g[0], yg = g[1], wg = g[2], hg = g[3], tg = g[4]
    cdef double c, s, ax, ay, bx, by, abx, aby, z, w1, w2, mid
    if wp >= wg:
        out[0] = xg
        out[1] = yg
        out[2] = wg
        out[3] = hg
        out[4] = tg
        return
    c = cos(tg)
    s = sin(tg)
    ax = xg - c * wg / 2
    ay = yg - s * wg / 2
    bx = xg + c * wg / 2
    by = yg + s * wg / 2
    abx = bx - ax
    aby = by - ay
    z = ((p[0] - ax) * abx + (p[1] - ay) * aby) / sqrt(abx * abx + aby * aby)
    w1 = z - wp / 2
    w2 = z + wp / 2
    if w1 <= 0:
        w1 = 0.0
        w2 = wp
    elif w2 >= wg:
        w2 = wg
        w1 = wg - wp
    mid = (w2 + w1) / 2
    out[0] = ax + c * mid
    out[1] = ay + s * mid
    out[2] = w2 - w1
    out[3] = hg
    out[4] = tg


cdef double _liiou(const double* p, const double* g) noexcept nogil:
    cdef double cut[5]
    if p[2] >= g[2]:
        return _iou(p, g)
    _intercept(p, g, cut)
    return _iou(p, cut)


cdef void _load(b, double* out) except *:
    cdef int k
    for k in range(5):
        out[k] = <double>b[k]


def box_corners(double cx, double cy, double w, double h, double theta):
    cdef double b[5]
    cdef double xs[4]
    cdef double ys[4]
    b[0] = cx; b[1] = cy; b[2] = w; b[3] = h; b[4] = theta
    _corners(b, xs, ys)
    return [(xs[0], ys[0]), (xs[1], ys[1]), (xs[2], ys[2]), (xs[3], ys[3])]


def clip_convex(subject, clipper):
    cdef double sx[MAXV]
    cdef double sy[MAXV]
    cdef double cx[MAXV]
    cdef double cy[MAXV]
    cdef double ox[MAXV]
    cdef double oy[MAXV]
    cdef int ns = len(subject), nc = len(clipper), n, k
    if ns > MAXV or nc > MAXV:
        raise ValueError("polygon has too many vertices")
    if ns == 0:
        return []
    for k in range(ns):
        sx[k] = subject[k][0]
        sy[k] = subject[k][1]
    for k in range(nc):
        cx[k] = clipper[k][0]
        cy[k] = clipper[k][1]
    n = _clip(sx, sy, ns, cx, cy, nc, ox, oy)
    return [(ox[k], oy[k]) for k in range(n)]


def polygon_area(pts):
    cdef double xs[MAXV]
    cdef double ys[MAXV]
    cdef int n = len(pts), k
    if n > MAXV:
        raise ValueError("polygon has too many vertices")
    for k in range(n):
        xs[k] = pts[k][0]
        ys[k] = pts[k][1]
    return _area(xs, ys, n)


def rect_inter_area(a, b):
    cdef double ba[5]
    cdef double bb[5]
    _load(a, ba)
    _load(b, bb)
    return _inter(ba, bb)


def rect_iou(a, b):
    cdef double ba[5]
    cdef double bb[5]
    _load(a, ba)
    _load(b, bb)
    return _iou(ba, bb)


def convex_iou(pa, pb):
    cdef double ax[MAXV]
    cdef double ay[MAXV]
    cdef double bx[MAXV]
    cdef double by[MAXV]
    cdef double ox[MAXV]
    cdef double oy[MAXV]
    cdef int na, nb, n, k
    cdef double area_a, area_b, inter, union, iou
    if tuple(map(tuple, pa)) > tuple(map(tuple, pb)):
        pa, pb = pb, pa
    na = len(pa)
    nb = len(pb)
    if na > MAXV or nb > MAXV:
        raise ValueError("polygon has too many vertices")
    for k in range(na):
        ax[k] = pa[k][0]
        ay[k] = pa[k][1]
    for k in range(nb):
        bx[k] = pb[k][0]
        by[k] = pb[k][1]
    area_a = _area(ax, ay, na)
    area_b = _area(bx, by, nb)
    if na == 0:
        return 0.0
    n = _clip(ax, ay, na, bx, by, nb, ox, oy)
    inter = _area(ox, oy, n)
    if inter <= 0.0:
        return 0.0
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    iou = inter / union
    if iou > 1.0:
        return 1.0
    return iou


def intercept_gt(p, g):
    cdef double bp[5]
    cdef double bg[5]
    cdef double out[5]
    _load(p, bp)
    _load(g, bg)
    _intercept(bp, bg, out)
    return (out[0], out[1], out[2], out[3], out[4])


def liiou(p, g):
    cdef double bp[5]
    cdef double bg[5]
    _load(p, bp)
    _load(g, bg)
    return _liiou(bp, bg)


def iou_matrix(a, b):
    cdef double[:, ::1] A = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 5)
    cdef double[:, ::1] B = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 5)
    out_arr = np.zeros((A.shape[0], B.shape[0]))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(A.shape[0]):
            for j in range(B.shape[0]):
                out[i, j] = _iou(&A[i, 0], &B[j, 0])
    return out_arr


def liiou_matrix(proposals, gts):
    cdef double[:, ::1] P = np.ascontiguousarray(proposals, dtype=np.float64).reshape(-1, 5)
    cdef double[:, ::1] G = np.ascontiguousarray(gts, dtype=np.float64).reshape(-1, 5)
    out_arr = np.zeros((P.shape[0], G.shape[0]))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(P.shape[0]):
            for j in range(G.shape[0]):
                out[i, j] = _liiou(&P[i, 0], &G[j, 0])
    return out_arr


def nms_sorted(boxes, double threshold):
    cdef double[:, ::1] B = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 5)
    cdef Py_ssize_t n = B.shape[0], i, j
    keep_arr = np.zeros(n, dtype=bool)
    sup_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.npy_bool[::1] keep = keep_arr
    cdef unsigned char[::1] sup = sup_arr
    with nogil:
        for i in range(n):
            if sup[i]:
                continue
            keep[i] = True
            for j in range(i + 1, n):
                if not sup[j] and _iou(&B[i, 0], &B[j, 0]) > threshold:
                    sup[j] = 1
    return keep_arr


cdef inline void _window(const double* b, double stride, Py_ssize_t gh, Py_ssize_t gw,
                         Py_ssize_t* i0, Py_ssize_t* i1, Py_ssize_t* j0, Py_ssize_t* j1) noexcept nogil:
    cdef double xs[4]
    cdef double ys[4]
    cdef double xmin, xmax, ymin, ymax
    cdef int k
    _corners(b, xs, ys)
    xmin = xs[0]; xmax = xs[0]; ymin = ys[0]; ymax = ys[0]
    for k in range(1, 4):
        if xs[k] < xmin: xmin = xs[k]
        if xs[k] > xmax: xmax = xs[k]
        if ys[k] < ymin: ymin = ys[k]
        if ys[k] > ymax: ymax = ys[k]
    j0[0] = <Py_ssize_t>floor(xmin / stride - 0.5)
    j1[0] = <Py_ssize_t>ceil(xmax / stride - 0.5)
    i0[0] = <Py_ssize_t>floor(ymin / stride - 0.5)
    i1[0] = <Py_ssize_t>ceil(ymax / stride - 0.5)
    if j0[0] < 0: j0[0] = 0
    if i0[0] < 0: i0[0] = 0
    if j1[0] > gw - 1: j1[0] = gw - 1
    if i1[0] > gh - 1: i1[0] = gh - 1


cdef inline bint _contains(const double* b, double c, double s, double x, double y) noexcept nogil:
    cdef double dx = x - b[0]
    cdef double dy = y - b[1]
    cdef double along = dx * c + dy * s
    cdef double across = dy * c - dx * s
    return fabs(along) <= 0.5 * b[2] and fabs(across) <= 0.5 * b[3]


def paint_level(pos_boxes, ign_boxes, order, double stride, Py_ssize_t grid_h, Py_ssize_t grid_w):
    cdef double[:, ::1] P = np.ascontiguousarray(pos_boxes, dtype=np.float64).reshape(-1, 5)
    cdef double[:, ::1] G = np.ascontiguousarray(ign_boxes, dtype=np.float64).reshape(-1, 5)
    cdef Py_ssize_t[::1] O = np.ascontiguousarray(order, dtype=np.intp).reshape(-1)
    state_arr = np.zeros((grid_h, grid_w), dtype=np.int8)
    owner_arr = np.full((grid_h, grid_w), -1, dtype=np.int32)
    cdef signed char[:, ::1] state = state_arr
    cdef int[:, ::1] owner = owner_arr
    cdef Py_ssize_t k, m, i, j, i0, i1, j0, j1
    cdef double c, s, x, y
    with nogil:
        for k in range(G.shape[0]):
            _window(&G[k, 0], stride, grid_h, grid_w, &i0, &i1, &j0, &j1)
            c = cos(G[k, 4])
            s = sin(G[k, 4])
            for i in range(i0, i1 + 1):
                y = (i + 0.5) * stride
                for j in range(j0, j1 + 1):
                    x = (j + 0.5) * stride
                    if _contains(&G[k, 0], c, s, x, y):
                        state[i, j] = IGNORE
        for m in range(O.shape[0]):
            k = O[m]
            _window(&P[k, 0], stride, grid_h, grid_w, &i0, &i1, &j0, &j1)
            c = cos(P[k, 4])
            s = sin(P[k, 4])
            for i in range(i0, i1 + 1):
                y = (i + 0.5) * stride
                for j in range(j0, j1 + 1):
                    x = (j + 0.5) * stride
                    if _contains(&P[k, 0], c, s, x, y):
                        state[i, j] = POSITIVE
                        owner[i, j] = <int>k
    return state_arr, owner_arr
