"""Shared domain types for RGB-D tracking sequences, plus box/mask geometry."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional, Sequence as Seq

import numpy as np

ORTHONORMAL_TOL = 1e-6

ATTRIBUTE_NAMES = (
    "AC", "BC", "ND", "FM", "FO", "OP", "OV", "PO",
    "RT", "SC", "SO", "NaN", "DC", "EI", "LD", "TB",
)


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in continuous pixel coordinates (top-left + size).

    An absent target is represented by the absence of a box (None), never by
    a degenerate box.
    """

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box size must be positive, got w={self.w}, h={self.h}")

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def as_tuple(self) -> tuple:
        return (self.x, self.y, self.w, self.h)


def box_iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes in continuous area; symmetric."""
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    return min(inter / union, 1.0)  # guard against rounding past 1


class TargetMask:
    """Binary per-pixel target labeling, row-major."""

    def __init__(self, data: np.ndarray):
        data = np.asarray(data)
        if data.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {data.shape}")
        if data.dtype != np.bool_:
            vals = np.unique(data)
            if not np.all(np.isin(vals, (0, 1))):
                raise ValueError("mask values must be 0/1")
            data = data.astype(bool)
        data = data.copy()
        data.flags.writeable = False
        self.data = data

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def count(self) -> int:
        return int(self.data.sum())

    def __eq__(self, other) -> bool:
        return isinstance(other, TargetMask) and np.array_equal(self.data, other.data)

    def __repr__(self) -> str:
        return f"TargetMask({self.width}x{self.height}, {self.count()} set)"


def mask_to_box(m: TargetMask) -> Optional[BoundingBox]:
    """Tightest axis-aligned box over set pixels; None for an empty mask."""
    ys, xs = np.nonzero(m.data)
    if len(xs) == 0:
        return None
    x0, x1 = int(xs.min()), int(xs.max())
    y0, y1 = int(ys.min()), int(ys.max())
    return BoundingBox(x0, y0, x1 - x0 + 1, y1 - y0 + 1)


def mask_iou(a: TargetMask, b: TargetMask) -> float:
    """Pixel IoU of two equal-sized masks; 1.0 when both are empty."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"mask dimensions differ: {a.data.shape} vs {b.data.shape}")
    inter = int(np.logical_and(a.data, b.data).sum())
    union = int(np.logical_or(a.data, b.data).sum())
    if union == 0:
        return 1.0
    return inter / union


@dataclass(frozen=True)
class TrackPrediction:
    """One tracker output frame: a box or target-absent, plus confidence."""

    box: Optional[BoundingBox]
    confidence: float

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0,1], got {self.confidence}")


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


class CameraPose:
    """Camera-to-world rigid transform: 3x3 rotation + translation in meters."""

    def __init__(self, rotation: np.ndarray, translation: np.ndarray):
        rotation = np.asarray(rotation, dtype=float).reshape(3, 3)
        translation = np.asarray(translation, dtype=float).reshape(3)
        err = np.abs(rotation.T @ rotation - np.eye(3)).max()
        if err > ORTHONORMAL_TOL:
            raise ValueError(f"rotation is not orthonormal (max deviation {err:.3g})")
        det = np.linalg.det(rotation)
        if abs(det - 1.0) > ORTHONORMAL_TOL:
            raise ValueError(f"rotation determinant must be +1, got {det:.9f}")
        rotation.flags.writeable = False
        translation.flags.writeable = False
        self.rotation = rotation
        self.translation = translation

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CameraPose)
            and np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
        )


class DepthMap:
    """Per-pixel depth in meters, 32-bit float. 0 or non-finite means invalid."""

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=np.float32)
        if values.ndim != 2:
            raise ValueError(f"depth map must be 2-D, got shape {values.shape}")
        finite = values[np.isfinite(values)]
        if finite.size and finite.min() < 0:
            raise ValueError("depth values must be non-negative")
        values = values.copy()
        values.flags.writeable = False
        self.values = values

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def valid(self) -> np.ndarray:
        """Boolean map of pixels carrying a usable depth."""
        return np.isfinite(self.values) & (self.values > 0)


class ConfidenceMap:
    """Per-pixel depth reliability: 2 high, 1 medium, 0 low."""

    LEVELS = (0, 1, 2)

    def __init__(self, values: np.ndarray):
        values = np.asarray(values)
        if values.ndim != 2:
            raise ValueError(f"confidence map must be 2-D, got shape {values.shape}")
        if not np.all(np.isin(values, self.LEVELS)):
            bad = np.unique(values[~np.isin(values, self.LEVELS)])
            raise ValueError(f"confidence values outside {{0,1,2}}: {bad.tolist()}")
        values = values.astype(np.uint8)
        values.flags.writeable = False
        self.values = values

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class AttributeFlags:
    """The 16 per-frame challenge attributes."""

    AC: bool = False
    BC: bool = False
    ND: bool = False
    FM: bool = False
    FO: bool = False
    OP: bool = False
    OV: bool = False
    PO: bool = False
    RT: bool = False
    SC: bool = False
    SO: bool = False
    NaN: bool = False
    DC: bool = False
    EI: bool = False
    LD: bool = False
    TB: bool = False

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "AttributeFlags":
        unknown = set(d) - set(ATTRIBUTE_NAMES)
        if unknown:
            raise ValueError(f"unknown attribute names: {sorted(unknown)}")
        return cls(**{k: bool(v) for k, v in d.items()})


@dataclass(frozen=True)
class TargetAnnotation:
    """Per-frame annotation state of one target."""

    box: Optional[BoundingBox] = None
    mask: Optional[TargetMask] = None
    attributes: Optional[AttributeFlags] = None
    is_keyframe: bool = False


@dataclass(frozen=True)
class RGBDFrame:
    index: int
    rgb: Optional[np.ndarray]
    depth: DepthMap
    confidence: ConfidenceMap
    intrinsics: CameraIntrinsics
    pose: CameraPose
    annotations: dict = field(default_factory=dict)  # target id -> TargetAnnotation

    def __post_init__(self):
        if (self.depth.height, self.depth.width) != (
            self.confidence.height,
            self.confidence.width,
        ):
            raise ValueError("depth and confidence maps must share dimensions")


@dataclass(frozen=True)
class Sequence:
    id: str
    frames: tuple  # of RGBDFrame
    targets: tuple  # of target ids

    def __post_init__(self):
        if len(self.frames) < 1:
            raise ValueError("a sequence needs at least one frame")
        idx = [f.index for f in self.frames]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("frame indices must be strictly increasing")
        for f in self.frames:
            if not set(f.annotations) <= set(self.targets):
                raise ValueError("frame annotations reference unknown target ids")

    def __len__(self) -> int:
        return len(self.frames)
