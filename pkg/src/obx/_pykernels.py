"""Pure-Python implementations of the hot kernels.

Every routine here has a twin in ``_ckernels.pyx`` that performs the same
floating-point operations in the same order, so both backends agree to the
last bit on the same platform. Boxes are plain ``(cx, cy, w, h, theta)``
sequences with ``theta`` in radians.
"""
import math

import numpy as np

ON_EDGE_EPS = 1e-9
SLIVER_AREA = 1e-12
DEDUP_EPS = 1e-9

NEGATIVE = 0
POSITIVE = 1
IGNORE = 2


def box_corners(cx, cy, w, h, theta):
    """Counter-clockwise corners starting at (-w/2, -h/2) in the box frame."""
    c = math.cos(theta)
    s = math.sin(theta)
    ux = 0.5 * w * c
    uy = 0.5 * w * s
    vx = -0.5 * h * s
    vy = 0.5 * h * c
    return [
        (cx - ux - vx, cy - uy - vy),
        (cx + ux - vx, cy + uy - vy),
        (cx + ux + vx, cy + uy + vy),
        (cx - ux + vx, cy - uy + vy),
    ]


def _push(out, x, y):
    if out:
        lx, ly = out[-1]
        if abs(lx - x) <= DEDUP_EPS and abs(ly - y) <= DEDUP_EPS:
            return
    out.append((x, y))


def clip_convex(subject, clipper):
    """Sutherland-Hodgman clip of ``subject`` by the convex CCW ``clipper``."""
    out = list(subject)
    n = len(clipper)
    for i in range(n):
        if not out:
            break
        ax, ay = clipper[i]
        bx, by = clipper[(i + 1) % n]
        ex = bx - ax
        ey = by - ay
        inv_len = 1.0 / math.sqrt(ex * ex + ey * ey)
        inp = out
        out = []
        px, py = inp[-1]
        dp = (ex * (py - ay) - ey * (px - ax)) * inv_len
        for qx, qy in inp:
            dq = (ex * (qy - ay) - ey * (qx - ax)) * inv_len
            if dq >= -ON_EDGE_EPS:
                if dp < -ON_EDGE_EPS:
                    t = dp / (dp - dq)
                    _push(out, px + t * (qx - px), py + t * (qy - py))
                _push(out, qx, qy)
            elif dp >= -ON_EDGE_EPS:
                t = dp / (dp - dq)
                _push(out, px + t * (qx - px), py + t * (qy - py))
            px = qx
            py = qy
            dp = dq
        if len(out) > 1:
            fx, fy = out[0]
            lx, ly = out[-1]
            if abs(lx - fx) <= DEDUP_EPS and abs(ly - fy) <= DEDUP_EPS:
                out.pop()
    return out


def polygon_area(pts):
    n = len(pts)
    if n < 3:
        return 0.0
    acc = 0.0
    x0, y0 = pts[0]
    for i in range(1, n - 1):
        x1, y1 = pts[i]
        x2, y2 = pts[i + 1]
        acc += (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    area = 0.5 * acc
    if area < SLIVER_AREA:
        return 0.0
    return area


def _ordered(a, b):
    # fixed argument order makes every pairwise result exactly symmetric
    if tuple(a) > tuple(b):
        return b, a
    return a, b


def rect_inter_area(a, b):
    a, b = _ordered(a, b)
    pa = box_corners(a[0], a[1], a[2], a[3], a[4])
    pb = box_corners(b[0], b[1], b[2], b[3], b[4])
    return polygon_area(clip_convex(pa, pb))


def rect_iou(a, b):
    a, b = _ordered(a, b)
    if a[0] == b[0] and a[1] == b[1] and a[2] == b[2] and a[3] == b[3] and a[4] == b[4]:
        return 1.0
    inter = rect_inter_area(a, b)
    if inter <= 0.0:
        return 0.0
    union = a[2] * a[3] + b[2] * b[3] - inter
    if union <= 0.0:
        return 0.0
    iou = inter / union
    return 1.0 if iou > 1.0 else iou


def convex_iou(pa, pb):
    """IoU of two convex CCW polygons given as lists of points."""
    if tuple(map(tuple, pa)) > tuple(map(tuple, pb)):
        pa, pb = pb, pa
    area_a = polygon_area(pa)
    area_b = polygon_area(pb)
    inter = polygon_area(clip_convex(pa, pb))
    if inter <= 0.0:
        return 0.0
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    iou = inter / union
    return 1.0 if iou > 1.0 else iou


def intercept_gt(p, g):
    """Cut a proposal-length piece out of ``g`` along its long axis."""
    wp = p[2]
    xg, yg, wg, hg, tg = g[0], g[1], g[2], g[3], g[4]
    if wp >= wg:
        return (xg, yg, wg, hg, tg)
    c = math.cos(tg)
    s = math.sin(tg)
    ax = xg - c * wg / 2
    ay = yg - s * wg / 2
    bx = xg + c * wg / 2
    by = yg + s * wg / 2
    abx = bx - ax
    aby = by - ay
    z = ((p[0] - ax) * abx + (p[1] - ay) * aby) / math.sqrt(abx * abx + aby * aby)
    w1 = z - wp / 2
    w2 = z + wp / 2
    if w1 <= 0:
        w1 = 0.0
        w2 = wp
    elif w2 >= wg:
        w2 = wg
        w1 = wg - wp
    mid = (w2 + w1) / 2
    return (ax + c * mid, ay + s * mid, w2 - w1, hg, tg)


def liiou(p, g):
    if p[2] >= g[2]:
        return rect_iou(p, g)
    return rect_iou(p, intercept_gt(p, g))


def iou_matrix(a, b):
    a = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 5)
    b = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 5)
    out = np.zeros((a.shape[0], b.shape[0]))
    bl = [tuple(r) for r in b.tolist()]
    for i, ra in enumerate(a.tolist()):
        for j, rb in enumerate(bl):
            out[i, j] = rect_iou(ra, rb)
    return out


def liiou_matrix(proposals, gts):
    p = np.ascontiguousarray(proposals, dtype=np.float64).reshape(-1, 5)
    g = np.ascontiguousarray(gts, dtype=np.float64).reshape(-1, 5)
    out = np.zeros((p.shape[0], g.shape[0]))
    gl = [tuple(r) for r in g.tolist()]
    for i, rp in enumerate(p.tolist()):
        for j, rg in enumerate(gl):
            out[i, j] = liiou(rp, rg)
    return out


def nms_sorted(boxes, threshold):
    """Greedy suppression over boxes already sorted by descending score.

    Returns a boolean keep mask.
    """
    boxes = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 5)
    n = boxes.shape[0]
    rows = boxes.tolist()
    keep = np.zeros(n, dtype=bool)
    suppressed = [False] * n
    for i in range(n):
        if suppressed[i]:
            continue
        keep[i] = True
        ri = rows[i]
        for j in range(i + 1, n):
            if not suppressed[j] and rect_iou(ri, rows[j]) > threshold:
                suppressed[j] = True
    return keep


def _pixel_window(box, stride, grid_h, grid_w):
    pts = box_corners(*box)
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    # one cell of slack: the containment test alone decides boundary pixels
    j0 = max(int(math.floor(min(xs) / stride - 0.5)), 0)
    j1 = min(int(math.ceil(max(xs) / stride - 0.5)), grid_w - 1)
    i0 = max(int(math.floor(min(ys) / stride - 0.5)), 0)
    i1 = min(int(math.ceil(max(ys) / stride - 0.5)), grid_h - 1)
    return i0, i1, j0, j1


def _inside_window(box, stride, i0, i1, j0, j1):
    cx, cy, w, h, theta = box
    c = math.cos(theta)
    s = math.sin(theta)
    xs = (np.arange(j0, j1 + 1) + 0.5) * stride
    ys = (np.arange(i0, i1 + 1) + 0.5) * stride
    dx = xs[None, :] - cx
    dy = ys[:, None] - cy
    along = dx * c + dy * s
    across = dy * c - dx * s
    return (np.abs(along) <= 0.5 * w) & (np.abs(across) <= 0.5 * h)


def paint_level(pos_boxes, ign_boxes, order, stride, grid_h, grid_w):
    """Rasterise shrunk boxes onto one pyramid level.

    ``order`` lists box indices from lowest to highest positive priority;
    later boxes overwrite earlier positive claims.
    """
    pos_boxes = np.asarray(pos_boxes, dtype=np.float64).reshape(-1, 5)
    ign_boxes = np.asarray(ign_boxes, dtype=np.float64).reshape(-1, 5)
    state = np.zeros((grid_h, grid_w), dtype=np.int8)
    owner = np.full((grid_h, grid_w), -1, dtype=np.int32)
    for k in range(ign_boxes.shape[0]):
        box = tuple(ign_boxes[k].tolist())
        i0, i1, j0, j1 = _pixel_window(box, stride, grid_h, grid_w)
        if i0 > i1 or j0 > j1:
            continue
        m = _inside_window(box, stride, i0, i1, j0, j1)
        state[i0:i1 + 1, j0:j1 + 1][m] = IGNORE
    for k in order:
        box = tuple(pos_boxes[k].tolist())
        i0, i1, j0, j1 = _pixel_window(box, stride, grid_h, grid_w)
        if i0 > i1 or j0 > j1:
            continue
        m = _inside_window(box, stride, i0, i1, j0, j1)
        state[i0:i1 + 1, j0:j1 + 1][m] = POSITIVE
        owner[i0:i1 + 1, j0:j1 + 1][m] = k
    return state, owner
