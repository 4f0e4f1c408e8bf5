"""RGB-D tracking toolkit: sequence I/O, BEV fusion numerics, and evaluators."""

__version__ = "0.1.0"

from .core import (
    ATTRIBUTE_NAMES,
    AttributeFlags,
    BoundingBox,
    CameraIntrinsics,
    CameraPose,
    ConfidenceMap,
    DepthMap,
    RGBDFrame,
    Sequence,
    TargetAnnotation,
    TargetMask,
    TrackPrediction,
    box_iou,
    mask_iou,
    mask_to_box,
)

__all__ = [
    "ATTRIBUTE_NAMES",
    "AttributeFlags",
    "BoundingBox",
    "CameraIntrinsics",
    "CameraPose",
    "ConfidenceMap",
    "DepthMap",
    "RGBDFrame",
    "Sequence",
    "TargetAnnotation",
    "TargetMask",
    "TrackPrediction",
    "box_iou",
    "mask_iou",
    "mask_to_box",
    "__version__",
]
