"""Backend selection for the hot kernels.

The compiled ``_ckernels`` extension is used when it imports; otherwise, or
when ``OBX_PURE_PYTHON`` is set to a non-empty value other than ``0``, the
pure-Python ``_pykernels`` module is used. Both expose the same functions.
"""
import importlib
import os

_NAMES = (
    "box_corners",
    "clip_convex",
    "polygon_area",
    "rect_inter_area",
    "rect_iou",
    "convex_iou",
    "intercept_gt",
    "liiou",
    "iou_matrix",
    "liiou_matrix",
    "nms_sorted",
    "paint_level",
)


def available_backends():
    names = ["python"]
    try:
        importlib.import_module("obx._ckernels")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


def load_backend(name):
    """Return the kernel module for ``name`` ("cython" or "python")."""
    if name == "cython":
        return importlib.import_module("obx._ckernels")
    if name == "python":
        return importlib.import_module("obx._pykernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def _select():
    if os.environ.get("OBX_PURE_PYTHON", "") not in ("", "0"):
        return "python", load_backend("python")
    try:
        return "cython", load_backend("cython")
    except ImportError:
        return "python", load_backend("python")


BACKEND, _impl = _select()

box_corners = _impl.box_corners
clip_convex = _impl.clip_convex
polygon_area = _impl.polygon_area
rect_inter_area = _impl.rect_inter_area
rect_iou = _impl.rect_iou
convex_iou = _impl.convex_iou
intercept_gt = _impl.intercept_gt
liiou = _impl.liiou
iou_matrix = _impl.iou_matrix
liiou_matrix = _impl.liiou_matrix
nms_sorted = _impl.nms_sorted
paint_level = _impl.paint_level

__all__ = ["BACKEND", "available_backends", "load_backend", *_NAMES]
