"""Length-independent IoU and proposal-to-ground-truth assignment."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .geometry import OrientedBox, boxes_to_array

NO_MATCH = -1


class OverlapKind(enum.Enum):
    STANDARD_IOU = "iou"
    LIIOU = "liiou"


def intercept_gt(proposal: OrientedBox, gt: OrientedBox) -> OrientedBox:
    """Piece of ``gt`` along its long axis matching the proposal's length.

    When the proposal is at least as long as ``gt``, ``gt`` is returned as is.
    Otherwise the piece is centred on the proposal centre's projection onto
    the gt centre line and slid back inside the gt if it would overhang
    either end.
    """
    if proposal.w >= gt.w:
        return gt
    return OrientedBox(*kernels.intercept_gt(tuple(proposal), tuple(gt)))


def liiou(proposal: OrientedBox, gt: OrientedBox) -> float:
    """IoU between ``proposal`` and the intercepted piece of ``gt``."""
    return kernels.liiou(tuple(proposal), tuple(gt))


def overlap_matrix(proposals, gts, kind: OverlapKind = OverlapKind.STANDARD_IOU) -> np.ndarray:
    p = boxes_to_array(proposals)
    g = boxes_to_array(gts)
    if kind is OverlapKind.LIIOU:
        return kernels.liiou_matrix(p, g)
    return kernels.iou_matrix(p, g)


@dataclass(frozen=True)
class MatchResult:
    """Per-proposal assignment; ``assignments[i] == NO_MATCH`` for negatives."""

    assignments: np.ndarray
    overlaps: np.ndarray
    positive_threshold: float

    @property
    def positive(self) -> np.ndarray:
        return self.assignments != NO_MATCH


def assign(proposals: Sequence[OrientedBox], gts: Sequence[OrientedBox],
           kind: OverlapKind = OverlapKind.STANDARD_IOU, threshold: float = 0.5) -> MatchResult:
    """Assign each proposal to its best-overlapping gt if that overlap reaches ``threshold``.

    Ties go to the lowest gt index.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    overlaps = overlap_matrix(proposals, gts, kind)
    n = overlaps.shape[0]
    if overlaps.shape[1] == 0:
        return MatchResult(np.full(n, NO_MATCH, dtype=np.int64), overlaps, threshold)
    best = overlaps.argmax(axis=1)  # first maximum -> lowest index
    best_val = overlaps[np.arange(n), best]
    assignments = np.where(best_val >= threshold, best, NO_MATCH).astype(np.int64)
    return MatchResult(assignments, overlaps, threshold)


def coverage_stats(proposals, gts, kind: OverlapKind = OverlapKind.STANDARD_IOU,
                   threshold: float = 0.5) -> np.ndarray:
    """Number of proposals assigned to each gt."""
    result = assign(proposals, gts, kind, threshold)
    hits = result.assignments[result.positive]
    return np.bincount(hits, minlength=len(gts)).astype(np.int64)
