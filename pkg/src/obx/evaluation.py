"""Rotated NMS and oriented-box average precision."""
from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .geometry import Quad, boxes_to_array, quad_iou, quad_to_box


class APMetric(enum.Enum):
    VOC07_11POINT = "voc07"
    CONTINUOUS = "cont"


class OverlapMode(enum.Enum):
    RECT = "rect"  # rotated IoU of the min-area rectangles of both quads
    POLY = "poly"  # convex-hull polygon clipping of the quads themselves


@dataclass(frozen=True)
class Detection:
    image_id: str
    class_id: int
    score: float
    quad: Quad


@dataclass(frozen=True)
class Annotation:
    image_id: str
    class_id: int
    quad: Quad
    difficult: bool = False


def _overlaps(quad: Quad, others: Sequence[Quad], mode: OverlapMode, box_cache: dict) -> np.ndarray:
    if mode is OverlapMode.POLY:
        return np.array([quad_iou(quad, q) for q in others])

    def box(q):
        b = box_cache.get(q)
        if b is None:
            b = box_cache[q] = tuple(quad_to_box(q))
        return b

    return kernels.iou_matrix(boxes_to_array([box(quad)]), boxes_to_array(box(q) for q in others))[0]


def rotated_nms(dets: Sequence[Detection], iou_threshold: float = 0.5,
                overlap: OverlapMode = OverlapMode.RECT) -> list[Detection]:
    """Greedy per-image, per-class suppression.

    A detection is dropped when its overlap with an already kept, higher
    scored detection exceeds ``iou_threshold``. The survivors come back in
    descending score order, ties in input order.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError("iou_threshold must lie in (0, 1)")
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    groups: dict = defaultdict(list)
    for i in order:
        groups[(dets[i].image_id, dets[i].class_id)].append(i)
    kept: list[int] = []
    for idx in groups.values():
        if overlap is OverlapMode.RECT:
            boxes = boxes_to_array(quad_to_box(dets[i].quad) for i in idx)
            mask = kernels.nms_sorted(boxes, iou_threshold)
            kept.extend(i for i, k in zip(idx, mask) if k)
        else:
            survivors: list[int] = []
            for i in idx:
                if all(quad_iou(dets[i].quad, dets[j].quad) <= iou_threshold for j in survivors):
                    survivors.append(i)
            kept.extend(survivors)
    kept.sort(key=lambda i: (-dets[i].score, i))
    return [dets[i] for i in kept]


def tile_origins(width: int, height: int, tile: int = 1024, stride: int = 256) -> list[tuple[int, int]]:
    """Top-left corners of ``tile`` x ``tile`` windows stepping by ``stride``.

    The last window in each direction is pushed flush with the image edge.
    """
    def axis(n):
        if n <= tile:
            return [0]
        xs = list(range(0, n - tile + 1, stride))
        if xs[-1] != n - tile:
            xs.append(n - tile)
        return xs

    return [(x, y) for y in axis(height) for x in axis(width)]


def offset_detection(det: Detection, dx: float, dy: float, image_id: str | None = None) -> Detection:
    quad = Quad(tuple((x + dx, y + dy) for x, y in det.quad.vertices))
    return replace(det, quad=quad, image_id=det.image_id if image_id is None else image_id)


def merge_tiles(tiles: Iterable[tuple[str, tuple[float, float], Sequence[Detection]]],
                iou_threshold: float = 0.1, overlap: OverlapMode = OverlapMode.RECT) -> list[Detection]:
    """Shift per-tile detections to whole-image coordinates and run NMS across tiles.

    ``tiles`` yields ``(image_id, (x0, y0), detections)``.
    """
    merged = [offset_detection(d, x0, y0, image_id)
              for image_id, (x0, y0), dets in tiles for d in dets]
    return rotated_nms(merged, iou_threshold, overlap)


def voc_ap(recall: np.ndarray, precision: np.ndarray, metric: APMetric = APMetric.VOC07_11POINT) -> float:
    """Area under a precision-recall curve.

    VOC07 averages the interpolated precision at recall 0, 0.1, ..., 1;
    CONTINUOUS integrates the monotone precision envelope.
    """
    recall = np.asarray(recall, dtype=np.float64)
    precision = np.asarray(precision, dtype=np.float64)
    if metric is APMetric.VOC07_11POINT:
        total = 0.0
        # i / 10 and tp / npos are both correctly rounded, so equal ratios compare equal
        for t in np.arange(11) / 10.0:
            total += precision[recall >= t].max() if np.any(recall >= t) else 0.0
        return float(total / 11.0)
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    i = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[i + 1] - mrec[i]) * mpre[i + 1]))


@dataclass
class EvalReport:
    ap: dict[int, float | None]
    mean_ap: float
    curves: dict[int, tuple[np.ndarray, np.ndarray]]
    num_positives: dict[int, int]
    metric: APMetric
    overlap: OverlapMode
    iou_threshold: float
    unknown_class_detections: int = 0
    class_names: list[str] = field(default_factory=list)

    def name(self, class_id: int) -> str:
        if 0 <= class_id < len(self.class_names):
            return self.class_names[class_id]
        return str(class_id)

    def to_json(self) -> dict:
        return {
            "metric": self.metric.value,
            "overlap": self.overlap.value,
            "iou_threshold": self.iou_threshold,
            "mAP": self.mean_ap,
            "per_class": {
                self.name(c): {"ap": self.ap[c], "num_positives": self.num_positives[c]}
                for c in sorted(self.ap)
            },
            "unknown_class_detections": self.unknown_class_detections,
        }

    def format_table(self) -> str:
        width = max([len(self.name(c)) for c in self.ap] + [len("mAP")])
        lines = [f"# overlap={self.overlap.value} metric={self.metric.value} iou>={self.iou_threshold:g}",
                 f"{'class'.ljust(width)}  AP(%)"]
        for c in sorted(self.ap):
            ap = self.ap[c]
            lines.append(f"{self.name(c).ljust(width)}  {'n/a' if ap is None else f'{100 * ap:.2f}'}")
        lines.append(f"{'mAP'.ljust(width)}  {100 * self.mean_ap:.2f}")
        return "\n".join(lines) + "\n"


def evaluate(dets: Sequence[Detection], annotations: Sequence[Annotation], iou_threshold: float = 0.5,
             metric: APMetric = APMetric.VOC07_11POINT, overlap: OverlapMode = OverlapMode.RECT,
             class_names: Sequence[str] = ()) -> EvalReport:
    """VOC-style per-class AP over oriented detections.

    Detections are visited by descending score (ties by image id, then input
    order). Each takes the not-yet-matched ground truth with the highest
    overlap at or above ``iou_threshold``. Difficult ground truths are never
    used up and swallow the detections that land on them without counting
    them either way. Classes absent from the ground truth are not scored;
    detections of such classes are counted in ``unknown_class_detections``.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError("iou_threshold must lie in (0, 1)")
    gt_by_class: dict = defaultdict(lambda: defaultdict(list))
    for a in annotations:
        gt_by_class[a.class_id][a.image_id].append(a)
    det_by_class: dict = defaultdict(list)
    for i, d in enumerate(dets):
        det_by_class[d.class_id].append((i, d))
    unknown = sum(len(v) for c, v in det_by_class.items() if c not in gt_by_class)

    box_cache: dict = {}
    ap: dict = {}
    curves: dict = {}
    npos_by_class: dict = {}
    for c in sorted(gt_by_class):
        images = gt_by_class[c]
        npos = sum(1 for gts in images.values() for g in gts if not g.difficult)
        npos_by_class[c] = npos
        matched = {img: np.zeros(len(gts), dtype=bool) for img, gts in images.items()}
        hard = {img: np.array([g.difficult for g in gts]) for img, gts in images.items()}
        cls_dets = sorted(det_by_class.get(c, []), key=lambda t: (-t[1].score, t[1].image_id, t[0]))
        flags = []  # 1 = TP, 0 = FP; difficult hits are left out
        for _, d in cls_dets:
            gts = images.get(d.image_id)
            if not gts:
                flags.append(0)
                continue
            ov = _overlaps(d.quad, [g.quad for g in gts], overlap, box_cache)
            usable = (ov >= iou_threshold) & (hard[d.image_id] | ~matched[d.image_id])
            if not usable.any():
                flags.append(0)
                continue
            j = int(np.argmax(np.where(usable, ov, -1.0)))
            if hard[d.image_id][j]:
                continue
            matched[d.image_id][j] = True
            flags.append(1)
        tp = np.cumsum(np.array(flags, dtype=np.float64))
        fp = np.cumsum(1.0 - np.array(flags, dtype=np.float64))
        if npos == 0:
            ap[c] = None
            curves[c] = (np.zeros(0), np.zeros(0))
            continue
        rec = tp / npos
        prec = tp / np.maximum(tp + fp, np.finfo(np.float64).eps)
        curves[c] = (rec, prec)
        ap[c] = voc_ap(rec, prec, metric)
    scored = [v for v in ap.values() if v is not None]
    mean_ap = float(np.mean(scored)) if scored else 0.0
    return EvalReport(ap, mean_ap, curves, npos_by_class, metric, overlap, iou_threshold,
                      unknown, list(class_names))
