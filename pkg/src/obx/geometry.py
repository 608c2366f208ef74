"""Oriented boxes, quadrilaterals and exact rotated-rectangle overlap.

Angles are radians. A box's ``theta`` is the direction of its long side,
kept in ``[0, pi)``; ``w`` is always the long side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import kernels

HALF_PI = 0.5 * math.pi
DEGENERATE_AREA = 1e-12


class DegenerateGeometryError(ValueError):
    """Raised for zero-area inputs that have no well-defined rectangle."""


class Point2(NamedTuple):
    x: float
    y: float


def canonical_angle(theta: float, period: float = math.pi) -> float:
    """Reduce ``theta`` into ``[0, period)``."""
    t = math.fmod(theta, period)
    if t < 0.0:
        t += period
    if t >= period:
        # -tiny + period rounds up to period
        t = 0.0
    return t


def angle_distance(a: float, b: float, period: float = math.pi) -> float:
    """Smallest absolute difference between two angles modulo ``period``."""
    d = math.fmod(abs(a - b), period)
    return min(d, period - d)


@dataclass(frozen=True)
class OrientedBox:
    """Rotated rectangle ``(cx, cy, w, h, theta)``.

    Construction canonicalises: if ``w < h`` the sides are swapped and the
    angle turned by a quarter turn, then the angle is reduced mod pi.
    """

    cx: float
    cy: float
    w: float
    h: float
    theta: float = 0.0

    def __post_init__(self):
        cx, cy, w, h, theta = (float(v) for v in (self.cx, self.cy, self.w, self.h, self.theta))
        if not all(math.isfinite(v) for v in (cx, cy, w, h, theta)):
            raise ValueError(f"non-finite box parameters {(cx, cy, w, h, theta)}")
        if w <= 0.0 or h <= 0.0:
            raise ValueError(f"box sides must be positive, got w={w}, h={h}")
        if w < h:
            w, h = h, w
            theta += HALF_PI
        object.__setattr__(self, "cx", cx)
        object.__setattr__(self, "cy", cy)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "theta", canonical_angle(theta))

    def __iter__(self):
        return iter((self.cx, self.cy, self.w, self.h, self.theta))

    def __len__(self):
        return 5

    def __getitem__(self, i):
        return (self.cx, self.cy, self.w, self.h, self.theta)[i]

    @classmethod
    def from_array(cls, row) -> "OrientedBox":
        cx, cy, w, h, theta = (float(v) for v in row)
        return cls(cx, cy, w, h, theta)

    @classmethod
    def from_degrees(cls, cx, cy, w, h, theta_deg) -> "OrientedBox":
        return cls(cx, cy, w, h, math.radians(theta_deg))

    def as_tuple(self) -> tuple:
        return (self.cx, self.cy, self.w, self.h, self.theta)

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> Point2:
        return Point2(self.cx, self.cy)

    def corners(self) -> list[Point2]:
        return [Point2(*p) for p in kernels.box_corners(*self.as_tuple())]


def boxes_to_array(boxes: Iterable) -> np.ndarray:
    """Stack boxes (or 5-sequences) into an ``(N, 5)`` float array."""
    rows = [tuple(b) for b in boxes]
    if not rows:
        return np.zeros((0, 5))
    return np.asarray(rows, dtype=np.float64).reshape(-1, 5)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def signed_area(points: Sequence) -> float:
    acc = 0.0
    n = len(points)
    for i in range(n):
        x0, y0 = points[i]
        x1, y1 = points[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return 0.5 * acc


def _segments_cross(p1, p2, p3, p4) -> bool:
    d1 = _cross(p3, p4, p1)
    d2 = _cross(p3, p4, p2)
    d3 = _cross(p1, p2, p3)
    d4 = _cross(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and 0 not in (d1, d2, d3, d4)


def _normalize_quad(points) -> tuple:
    pts = [Point2(float(x), float(y)) for x, y in points]
    if len(pts) != 4:
        raise ValueError(f"a quad needs 4 vertices, got {len(pts)}")
    if not all(math.isfinite(v) for p in pts for v in p):
        raise ValueError("non-finite quad vertex")
    if _segments_cross(pts[0], pts[1], pts[2], pts[3]) or _segments_cross(pts[1], pts[2], pts[3], pts[0]):
        # bow-tie ordering: re-order around the centroid
        mx = sum(p.x for p in pts) / 4
        my = sum(p.y for p in pts) / 4
        pts.sort(key=lambda p: math.atan2(p.y - my, p.x - mx))
    area = signed_area(pts)
    if abs(area) <= DEGENERATE_AREA:
        raise DegenerateGeometryError("quad has zero area")
    if area < 0:
        pts.reverse()
    start = min(range(4), key=lambda i: (pts[i].y, pts[i].x))
    return tuple(pts[start:] + pts[:start])


@dataclass(frozen=True)
class Quad:
    """Four-vertex polygon, stored counter-clockwise from its lowest-y vertex."""

    vertices: tuple

    def __post_init__(self):
        object.__setattr__(self, "vertices", _normalize_quad(self.vertices))

    @classmethod
    def from_flat(cls, values: Sequence[float]) -> "Quad":
        v = [float(x) for x in values]
        if len(v) != 8:
            raise ValueError(f"expected 8 coordinates, got {len(v)}")
        return cls(tuple(zip(v[0::2], v[1::2])))

    def flat(self) -> tuple:
        return tuple(c for p in self.vertices for c in p)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=np.float64)

    @property
    def area(self) -> float:
        return signed_area(self.vertices)


def convex_hull(points: Iterable) -> list[Point2]:
    """Monotone-chain hull, counter-clockwise, collinear points dropped."""
    pts = sorted(set((float(x), float(y)) for x, y in points))
    if len(pts) <= 2:
        return [Point2(*p) for p in pts]
    lower: list = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return [Point2(*p) for p in lower[:-1] + upper[:-1]]


def min_area_rect(points: Iterable) -> OrientedBox:
    """Minimum-area enclosing rectangle by rotating calipers over hull edges."""
    hull = convex_hull(points)
    if len(hull) < 3 or abs(signed_area(hull)) <= DEGENERATE_AREA:
        raise DegenerateGeometryError("points are collinear; no enclosing rectangle has positive area")
    hx = np.array([p.x for p in hull])
    hy = np.array([p.y for p in hull])
    best = None
    n = len(hull)
    for i in range(n):
        ex = hx[(i + 1) % n] - hx[i]
        ey = hy[(i + 1) % n] - hy[i]
        norm = math.hypot(ex, ey)
        ux, uy = ex / norm, ey / norm
        along = hx * ux + hy * uy
        across = hy * ux - hx * uy
        a0, a1 = along.min(), along.max()
        b0, b1 = across.min(), across.max()
        area = (a1 - a0) * (b1 - b0)
        if best is None or area < best[0]:
            best = (area, ux, uy, a0, a1, b0, b1)
    _, ux, uy, a0, a1, b0, b1 = best
    ma = 0.5 * (a0 + a1)
    mb = 0.5 * (b0 + b1)
    cx = ma * ux - mb * uy
    cy = ma * uy + mb * ux
    la = a1 - a0
    lb = b1 - b0
    if la >= lb:
        return OrientedBox(cx, cy, la, lb, math.atan2(uy, ux))
    return OrientedBox(cx, cy, lb, la, math.atan2(ux, -uy))


def box_to_quad(box: OrientedBox) -> Quad:
    return Quad(tuple(kernels.box_corners(*tuple(box))))


def quad_to_box(quad: Quad) -> OrientedBox:
    """Smallest rectangle containing the quad's vertices."""
    return min_area_rect(quad.vertices)


def rect_intersection_area(a: OrientedBox, b: OrientedBox) -> float:
    return kernels.rect_inter_area(tuple(a), tuple(b))


def rotated_iou(a: OrientedBox, b: OrientedBox) -> float:
    """Exact IoU of two rotated rectangles; exactly symmetric."""
    return kernels.rect_iou(tuple(a), tuple(b))


def intersection_polygon(a: OrientedBox, b: OrientedBox) -> list[Point2]:
    """Vertices of ``a`` intersected with ``b`` (empty when disjoint)."""
    ta, tb = tuple(a), tuple(b)
    if ta > tb:
        ta, tb = tb, ta
    pts = kernels.clip_convex(kernels.box_corners(*ta), kernels.box_corners(*tb))
    if kernels.polygon_area(pts) <= 0.0:
        return []
    return [Point2(*p) for p in pts]


def pairwise_iou(a, b) -> np.ndarray:
    """``(N, M)`` rotated IoU matrix between two box collections."""
    return kernels.iou_matrix(boxes_to_array(a), boxes_to_array(b))


def quad_iou(a: Quad, b: Quad) -> float:
    """IoU of the convex hulls of two quads by polygon clipping."""
    return kernels.convex_iou([tuple(p) for p in convex_hull(a.vertices)],
                              [tuple(p) for p in convex_hull(b.vertices)])


def _row_spans(box, ys):
    """Per grid row, the x-interval ``[lo, hi]`` covered by ``box`` (empty when lo > hi).

    Each of the two slab conditions ``|a x + b| <= r`` is linear in x, so the
    inside set of a row is an interval.
    """
    cx, cy, w, h, theta = box
    c, s = math.cos(theta), math.sin(theta)
    dy = ys - cy
    lo = np.full(ys.shape, -np.inf)
    hi = np.full(ys.shape, np.inf)
    # |dx c + dy s| <= w/2  and  |dy c - dx s| <= h/2
    for a, b, r in ((c, dy * s, w / 2), (-s, dy * c, h / 2)):
        if abs(a) < 1e-15:
            dead = np.abs(b) > r
            lo = np.where(dead, np.inf, lo)
            hi = np.where(dead, -np.inf, hi)
            continue
        e1 = (-r - b) / a
        e2 = (r - b) / a
        lo = np.maximum(lo, np.minimum(e1, e2))
        hi = np.minimum(hi, np.maximum(e1, e2))
    return lo + cx, hi + cx


def _count_centres(lo, hi, x0, step, n):
    # cell centres x0 + (k + 0.5) step, k in [0, n), falling in [lo, hi]
    with np.errstate(invalid="ignore"):
        k_lo = np.clip(np.ceil((lo - x0) / step - 0.5), 0, n)
        k_hi = np.clip(np.floor((hi - x0) / step - 0.5), -1, n - 1)
    return np.maximum(k_hi - k_lo + 1, 0)


def raster_iou_oracle(a: OrientedBox, b: OrientedBox, resolution: int = 512) -> float:
    """IoU by counting cell centres of a ``resolution`` x ``resolution`` grid.

    The grid spans the axis-aligned extent of both boxes; each row is counted
    from the analytic x-span of each box. Shares no code with the clipping
    path, so it serves as an independent check.
    """
    if resolution < 64:
        raise ValueError("resolution must be at least 64")
    lo_x, hi_x, lo_y, hi_y = math.inf, -math.inf, math.inf, -math.inf
    for cx, cy, w, h, theta in (tuple(a), tuple(b)):
        ex = abs(w / 2 * math.cos(theta)) + abs(h / 2 * math.sin(theta))
        ey = abs(w / 2 * math.sin(theta)) + abs(h / 2 * math.cos(theta))
        lo_x, hi_x = min(lo_x, cx - ex), max(hi_x, cx + ex)
        lo_y, hi_y = min(lo_y, cy - ey), max(hi_y, cy + ey)
    step = (hi_x - lo_x) / resolution
    ys = lo_y + (np.arange(resolution) + 0.5) * ((hi_y - lo_y) / resolution)
    la, ha = _row_spans(tuple(a), ys)
    lb, hb = _row_spans(tuple(b), ys)
    na = _count_centres(la, ha, lo_x, step, resolution).sum()
    nb = _count_centres(lb, hb, lo_x, step, resolution).sum()
    ni = _count_centres(np.maximum(la, lb), np.minimum(ha, hb), lo_x, step, resolution).sum()
    union = na + nb - ni
    if union == 0:
        return 0.0
    return float(ni / union)
