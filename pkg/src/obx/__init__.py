"""Oriented-box geometry, angle embedding, target codecs and evaluation for aerial detection."""
from .angle import ApeConfig, ApeEmbedding, UndecodableEmbeddingError, ape_decode, ape_encode, smooth_l1
from .codec import (
    ClassState,
    CodecConfig,
    LabelGridSet,
    assign_level,
    decode_rcnn_stage1,
    decode_rcnn_stage2,
    decode_rpn_grids,
    encode_rcnn_stage1,
    encode_rcnn_stage2,
    encode_rpn_grids,
    rotated_affine,
    rotated_crop,
)
from .evaluation import APMetric, Annotation, Detection, OverlapMode, evaluate, merge_tiles, rotated_nms
from .geometry import (
    DegenerateGeometryError,
    OrientedBox,
    Point2,
    Quad,
    box_to_quad,
    min_area_rect,
    quad_to_box,
    raster_iou_oracle,
    rotated_iou,
)
from .kernels import BACKEND
from .matching import NO_MATCH, MatchResult, OverlapKind, assign, intercept_gt, liiou

__version__ = "0.1.0"
