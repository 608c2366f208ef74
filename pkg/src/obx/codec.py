"""Regression targets: anchor-free RPN label grids and rotated-frame R-CNN codecs.

RPN grids live on pyramid levels ``k`` with stride ``2 * 2**k``. Each object is
routed to one level by its short side, pixels inside the box shrunk by ``r2``
become positives, the ring out to the ``r1`` shrink is ignored. Positive
pixels carry 8 regression channels: centre offsets, log sizes and the angle
embedding.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .angle import ApeConfig, ape_decode_array, ape_encode_array
from .geometry import OrientedBox, Point2, Quad, boxes_to_array

CHANNELS = ("t_x", "t_y", "t_w", "t_h", "u1_x", "u1_y", "u2_x", "u2_y")


class ClassState(enum.IntEnum):
    # codes shared with the paint_level kernels
    NEGATIVE = 0
    POSITIVE = 1
    IGNORE = 2


@dataclass(frozen=True)
class CodecConfig:
    r1: float = 0.1
    r2: float = 0.25
    k0: int = 4
    n_norm: float = 6.0
    level_min: int = 2
    level_max: int = 6
    pre_nms_top_n: int = 2000

    def __post_init__(self):
        if not 0 <= self.r1 < self.r2 < 0.5:
            raise ValueError("need 0 <= r1 < r2 < 0.5")
        if not self.level_min <= self.k0 <= self.level_max:
            raise ValueError("need level_min <= k0 <= level_max")
        if not self.n_norm > 0:
            raise ValueError("n_norm must be positive")

    @property
    def levels(self) -> range:
        return range(self.level_min, self.level_max + 1)


def assign_level(h_short: float, cfg: CodecConfig = CodecConfig()) -> int:
    """Pyramid level for an object with short side ``h_short``."""
    if not h_short > 0:
        raise ValueError("short side must be positive")
    k = math.floor(cfg.k0 + math.log2(h_short / 128))
    return min(max(k, cfg.level_min), cfg.level_max)


def stride_of(k: int, cfg: CodecConfig = CodecConfig()) -> float:
    if not cfg.level_min <= k <= cfg.level_max:
        raise ValueError(f"level {k} outside [{cfg.level_min}, {cfg.level_max}]")
    return 2.0 * 2 ** k


def grid_shape(image_size: tuple[int, int], k: int, cfg: CodecConfig = CodecConfig()) -> tuple[int, int]:
    """``(rows, cols)`` of level ``k`` for an image of ``(width, height)``."""
    s = stride_of(k, cfg)
    width, height = image_size
    return int(math.ceil(height / s)), int(math.ceil(width / s))


def shrink_box(box: OrientedBox, r: float) -> OrientedBox:
    """EAST-style shrink of a rectangle: each side loses ``2 r h``.

    For a rectangle every vertex's shorter adjacent edge is the short side,
    so both dimensions shrink by the same amount. Sides never drop below one
    pixel.
    """
    if not 0 <= r < 0.5:
        raise ValueError("shrink ratio must lie in [0, 0.5)")
    cut = 2 * r * box.h
    return OrientedBox(box.cx, box.cy, max(box.w - cut, 1.0), max(box.h - cut, 1.0), box.theta)


@dataclass
class LevelGrids:
    level: int
    stride: float
    class_state: np.ndarray  # (H, W) int8 ClassState codes
    regression: np.ndarray  # (8, H, W) float64, CHANNELS order
    gt_index: np.ndarray  # (H, W) int32, -1 off positives

    @property
    def shape(self) -> tuple[int, int]:
        return self.class_state.shape


@dataclass
class LabelGridSet:
    image_size: tuple[int, int]
    levels: dict[int, LevelGrids] = field(default_factory=dict)
    labels: tuple = ()

    def positive_pixels(self, gt: int):
        """Yield ``(level, row, col)`` for every positive pixel owned by ``gt``."""
        for k, g in self.levels.items():
            for i, j in zip(*np.nonzero((g.class_state == ClassState.POSITIVE) & (g.gt_index == gt))):
                yield k, int(i), int(j)


def encode_rpn_grids(annotations: Sequence, image_size: tuple[int, int],
                     cfg: CodecConfig = CodecConfig(), ape_cfg: ApeConfig = ApeConfig()) -> LabelGridSet:
    """Build per-level label grids from ``(OrientedBox, label)`` pairs.

    Where objects compete, POSITIVE beats IGNORE beats NEGATIVE, and between
    two positive claims the smaller box wins (lower index on equal area).
    """
    boxes = [a[0] for a in annotations]
    labels = tuple(a[1] for a in annotations)
    arr = boxes_to_array(boxes)
    level_of = np.array([assign_level(b.h, cfg) for b in boxes], dtype=np.int64)
    out = LabelGridSet(tuple(image_size), {}, labels)
    for k in cfg.levels:
        s = stride_of(k, cfg)
        gh, gw = grid_shape(image_size, k, cfg)
        members = np.flatnonzero(level_of == k)
        pos = boxes_to_array(shrink_box(boxes[i], cfg.r2) for i in members)
        ign = boxes_to_array(shrink_box(boxes[i], cfg.r1) for i in members)
        order = sorted(range(len(members)), key=lambda m: (-boxes[members[m]].area, -members[m]))
        state, owner = kernels.paint_level(pos, ign, np.asarray(order, dtype=np.intp), s, gh, gw)
        gt_index = np.where(owner >= 0, members[np.maximum(owner, 0)] if len(members) else -1, -1)
        gt_index = gt_index.astype(np.int32)
        reg = np.zeros((8, gh, gw))
        ii, jj = np.nonzero(state == ClassState.POSITIVE)
        if ii.size:
            b = arr[gt_index[ii, jj]]
            n = cfg.n_norm
            reg[0, ii, jj] = (b[:, 0] / s - jj) / n
            reg[1, ii, jj] = (b[:, 1] / s - ii) / n
            reg[2, ii, jj] = np.log((b[:, 2] / s) / n)
            reg[3, ii, jj] = np.log((b[:, 3] / s) / n)
            reg[4:8, ii, jj] = ape_encode_array(b[:, 4], b[:, 2], b[:, 3], ape_cfg).T
        out.levels[k] = LevelGrids(k, s, state.astype(np.int8), reg, gt_index)
    return out


def grids_as_outputs(grids: LabelGridSet) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Turn label grids into decoder input: score 1 on positives, 0 elsewhere."""
    return {
        k: ((g.class_state == ClassState.POSITIVE).astype(np.float64), g.regression)
        for k, g in grids.levels.items()
    }


@dataclass
class DecodedBoxes:
    boxes: np.ndarray  # (N, 5)
    scores: np.ndarray
    levels: np.ndarray
    rows: np.ndarray
    cols: np.ndarray

    def __len__(self):
        return len(self.scores)


def decode_rpn_arrays(outputs: Mapping[int, tuple], score_threshold: float,
                      cfg: CodecConfig = CodecConfig(), ape_cfg: ApeConfig = ApeConfig()) -> DecodedBoxes:
    """Decode score + regression grids into boxes, highest score first.

    At most ``cfg.pre_nms_top_n`` pixels per level are kept. Pixels whose
    embedding cannot be decoded are dropped.
    """
    parts = []
    for k in sorted(outputs):
        score, reg = outputs[k]
        score = np.asarray(score, dtype=np.float64)
        reg = np.asarray(reg, dtype=np.float64)
        if score.ndim != 2 or reg.shape != (8,) + score.shape:
            raise ValueError(f"level {k}: score {score.shape} and regression {reg.shape} do not match")
        s = stride_of(k, cfg)
        flat = np.flatnonzero(score.ravel() > score_threshold)
        if flat.size > cfg.pre_nms_top_n:
            keep = np.argsort(-score.ravel()[flat], kind="stable")[: cfg.pre_nms_top_n]
            flat = np.sort(flat[keep])
        ii, jj = np.unravel_index(flat, score.shape)
        t = reg[:, ii, jj]
        n = cfg.n_norm
        cx = (t[0] * n + jj) * s
        cy = (t[1] * n + ii) * s
        w = np.exp(t[2]) * n * s
        h = np.exp(t[3]) * n * s
        theta = ape_decode_array(t[4:8].T, ape_cfg)
        ok = np.isfinite(theta) & np.isfinite(w) & np.isfinite(h) & (w > 0) & (h > 0)
        swap = w < h
        w2 = np.where(swap, h, w)
        h2 = np.where(swap, w, h)
        theta = np.mod(np.where(swap, theta + 0.5 * np.pi, theta), np.pi)
        theta = np.where(theta >= np.pi, 0.0, theta)
        boxes = np.stack([cx, cy, w2, h2, theta], axis=-1)[ok]
        parts.append((boxes, score[ii, jj][ok], np.full(ok.sum(), k), ii[ok], jj[ok]))
    if not parts:
        return DecodedBoxes(np.zeros((0, 5)), np.zeros(0), np.zeros(0, int), np.zeros(0, int), np.zeros(0, int))
    boxes, scores, levels, rows, cols = (np.concatenate(x) for x in zip(*parts))
    order = np.argsort(-scores, kind="stable")
    return DecodedBoxes(boxes[order], scores[order], levels[order], rows[order], cols[order])


def decode_rpn_grids(outputs: Mapping[int, tuple], score_threshold: float,
                     cfg: CodecConfig = CodecConfig(), ape_cfg: ApeConfig = ApeConfig()) -> list:
    """Same as :func:`decode_rpn_arrays`, as a list of ``(OrientedBox, score)``."""
    d = decode_rpn_arrays(outputs, score_threshold, cfg, ape_cfg)
    return [(OrientedBox.from_array(b), float(sc)) for b, sc in zip(d.boxes, d.scores)]


def rotated_affine(center, theta: float) -> np.ndarray:
    """3x3 matrix rotating the plane by ``theta`` about ``center``.

    Applied to image coordinates it yields coordinates in the frame whose
    x axis runs along a box's long side; ``rotated_affine(center, -theta)``
    maps back.
    """
    xc, yc = float(center[0]), float(center[1])
    c, s = math.cos(theta), math.sin(theta)
    return np.array([
        [c, s, (1 - c) * xc - yc * s],
        [-s, c, (1 - c) * yc + xc * s],
        [0.0, 0.0, 1.0],
    ])


def _affine_batch(xc, yc, theta):
    c, s = np.cos(theta), np.sin(theta)
    m = np.zeros(np.shape(theta) + (2, 3))
    m[..., 0, 0] = c
    m[..., 0, 1] = s
    m[..., 0, 2] = (1 - c) * xc - yc * s
    m[..., 1, 0] = -s
    m[..., 1, 1] = c
    m[..., 1, 2] = (1 - c) * yc + xc * s
    return m


def _apply(m, x, y):
    return (m[..., 0, 0] * x + m[..., 0, 1] * y + m[..., 0, 2],
            m[..., 1, 0] * x + m[..., 1, 1] * y + m[..., 1, 2])


def encode_rcnn_stage1(proposal, gt) -> np.ndarray:
    """Centre offsets and log size ratios of ``gt`` in the proposal's frame.

    Accepts single boxes or ``(N, 5)`` arrays; returns ``(..., 4)``.
    """
    p = np.asarray(tuple(proposal) if isinstance(proposal, OrientedBox) else proposal, dtype=np.float64)
    g = np.asarray(tuple(gt) if isinstance(gt, OrientedBox) else gt, dtype=np.float64)
    m = _affine_batch(p[..., 0], p[..., 1], p[..., 4])
    x, y = _apply(m, g[..., 0], g[..., 1])
    return np.stack([
        (x - p[..., 0]) / p[..., 2],
        (y - p[..., 1]) / p[..., 3],
        np.log(g[..., 2] / p[..., 2]),
        np.log(g[..., 3] / p[..., 3]),
    ], axis=-1)


def decode_rcnn_stage1(targets, proposal):
    """Inverse of :func:`encode_rcnn_stage1`; the angle is the proposal's.

    Returns an :class:`OrientedBox` for a single proposal, else an
    ``(N, 5)`` array (not canonicalised).
    """
    single = isinstance(proposal, OrientedBox)
    p = np.asarray(tuple(proposal) if single else proposal, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    m = _affine_batch(p[..., 0], p[..., 1], -p[..., 4])
    x, y = _apply(m, t[..., 0] * p[..., 2] + p[..., 0], t[..., 1] * p[..., 3] + p[..., 1])
    out = np.stack([x, y, p[..., 2] * np.exp(t[..., 2]), p[..., 3] * np.exp(t[..., 3]), p[..., 4]], axis=-1)
    if single:
        return OrientedBox.from_array(out)
    return out


def encode_rcnn_stage2(proposal, gt_quad) -> np.ndarray:
    """Quad vertices in the proposal's frame, normalised by its sides.

    Output is ``(..., 8)`` as ``(tx1, ty1, ..., tx4, ty4)``.
    """
    p = np.asarray(tuple(proposal) if isinstance(proposal, OrientedBox) else proposal, dtype=np.float64)
    q = gt_quad.as_array() if isinstance(gt_quad, Quad) else np.asarray(gt_quad, dtype=np.float64)
    m = _affine_batch(p[..., 0], p[..., 1], p[..., 4])[..., None, :, :]
    x, y = _apply(m, q[..., 0], q[..., 1])
    tx = (x - p[..., None, 0]) / p[..., None, 2]
    ty = (y - p[..., None, 1]) / p[..., None, 3]
    return np.stack([tx, ty], axis=-1).reshape(q.shape[:-2] + (8,))


def decode_rcnn_stage2(targets, proposal):
    """Inverse of :func:`encode_rcnn_stage2`: a :class:`Quad` or ``(N, 4, 2)`` array."""
    single = isinstance(proposal, OrientedBox)
    p = np.asarray(tuple(proposal) if single else proposal, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64).reshape(np.shape(targets)[:-1] + (4, 2))
    m = _affine_batch(p[..., 0], p[..., 1], -p[..., 4])[..., None, :, :]
    xr = t[..., 0] * p[..., None, 2] + p[..., None, 0]
    yr = t[..., 1] * p[..., None, 3] + p[..., None, 1]
    x, y = _apply(m, xr, yr)
    pts = np.stack([x, y], axis=-1)
    if single:
        return Quad(tuple(map(tuple, pts)))
    return pts


def rotated_crop(feature, box: OrientedBox, out_h: int, out_w: int, spatial_scale: float = 1.0) -> np.ndarray:
    """Bilinearly sample an ``out_h`` x ``out_w`` grid spanning a rotated box.

    ``feature`` is ``(C, H, W)`` or ``(H, W)``; cell ``(i, j)`` of the map is
    centred at ``((j + 0.5), (i + 0.5)) / spatial_scale`` in image
    coordinates. Output column ``j`` runs along the box's long side. Taps
    falling outside the map read zero.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be at least 1x1")
    f = np.asarray(feature, dtype=np.float64)
    squeeze = f.ndim == 2
    if squeeze:
        f = f[None]
    _, fh, fw = f.shape
    cx, cy, w, h, theta = tuple(box)
    u = ((np.arange(out_w) + 0.5) / out_w - 0.5) * w
    v = ((np.arange(out_h) + 0.5) / out_h - 0.5) * h
    # sample points in the box frame, mapped back to the image
    m = rotated_affine((cx, cy), -theta)
    fx_r, fy_r = np.broadcast_arrays(cx + u[None, :], cy + v[:, None])
    px = m[0, 0] * fx_r + m[0, 1] * fy_r + m[0, 2]
    py = m[1, 0] * fx_r + m[1, 1] * fy_r + m[1, 2]
    gx = px * spatial_scale - 0.5
    gy = py * spatial_scale - 0.5
    x0 = np.floor(gx).astype(np.int64)
    y0 = np.floor(gy).astype(np.int64)
    lx = gx - x0
    ly = gy - y0
    out = np.zeros((f.shape[0], out_h, out_w))
    for dy, wy in ((0, 1 - ly), (1, ly)):
        for dx, wx in ((0, 1 - lx), (1, lx)):
            yy = y0 + dy
            xx = x0 + dx
            valid = (yy >= 0) & (yy < fh) & (xx >= 0) & (xx < fw)
            vals = f[:, np.clip(yy, 0, fh - 1), np.clip(xx, 0, fw - 1)]
            out += np.where(valid, wy * wx, 0.0) * vals
    return out[0] if squeeze else out


def image_to_frame(point, proposal: OrientedBox) -> Point2:
    """Map an image point into a proposal's rotated frame."""
    m = rotated_affine((proposal.cx, proposal.cy), proposal.theta)
    x, y, _ = m @ np.array([point[0], point[1], 1.0])
    return Point2(float(x), float(y))
