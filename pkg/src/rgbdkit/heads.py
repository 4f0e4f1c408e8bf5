"""Head decoding and template-memory policies.

Boxes decoded here live in feature-map coordinates; `map_box_to_image` is
the affine helper for callers that know their search-region crop geometry.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from .core import BoundingBox


@dataclass(frozen=True)
class HeadMaps:
    """VOT head outputs: score L (1,H,W) in [0,1], offset O (2,H,W), size S (2,H,W)."""

    score: np.ndarray
    offset: np.ndarray
    size: np.ndarray

    def __post_init__(self):
        score = self.score
        if score.ndim == 2:
            object.__setattr__(self, "score", score[None])
            score = self.score
        if score.ndim != 3 or score.shape[0] != 1:
            raise ValueError("score map must be (1, H, W)")
        hw = score.shape[1:]
        if self.offset.shape != (2, *hw) or self.size.shape != (2, *hw):
            raise ValueError("offset and size maps must be (2, H, W) matching the score map")


def decode_box(maps: HeadMaps) -> Tuple[BoundingBox, float]:
    """Decode the peak of the score map into a box plus its confidence.

    The peak (x, y) is the argmax of L with ties broken by smallest row then
    smallest column; the center is (x + x_off, y + y_off) with (w, h) read at
    the peak.
    """
    L = maps.score[0]
    if not np.isfinite(L).all():
        raise ValueError("score map contains non-finite values")
    flat = int(np.argmax(L))  # row-major argmax == (smallest row, then col) tie-break
    y, x = divmod(flat, L.shape[1])
    x_off, y_off = maps.offset[0, y, x], maps.offset[1, y, x]
    w, h = maps.size[0, y, x], maps.size[1, y, x]
    cx, cy = x + x_off, y + y_off
    return BoundingBox(cx - w / 2.0, cy - h / 2.0, float(w), float(h)), float(L[y, x])


def map_box_to_image(box: BoundingBox, scale: float, offset: Tuple[float, float]) -> BoundingBox:
    """Affine map from feature-map coordinates to full-image pixels."""
    return BoundingBox(
        box.x * scale + offset[0], box.y * scale + offset[1], box.w * scale, box.h * scale
    )


@dataclass(frozen=True)
class TemplateRecord:
    """One memorized template: frame reference plus its mask payload."""

    frame_index: int
    payload: object = None


@dataclass(frozen=True)
class TemplateMemory:
    """Initial template plus a bank of dynamic templates.

    Strategies: ONE keeps a single dynamic slot and replaces it; ADD appends,
    evicting the oldest dynamic template beyond capacity. When `iou_threshold`
    is set (the IP gate), updates additionally require predicted IoU above it.
    The initial template is never evicted.
    """

    initial: TemplateRecord
    strategy: str = "ADD"  # or "ONE"
    capacity: int = 5
    update_interval: int = 30
    iou_threshold: Optional[float] = 0.7
    dynamic: Tuple[TemplateRecord, ...] = ()

    def __post_init__(self):
        if self.strategy not in ("ONE", "ADD"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.capacity < 1 or self.update_interval < 1:
            raise ValueError("capacity and update interval must be >= 1")
        limit = 1 if self.strategy == "ONE" else self.capacity
        if len(self.dynamic) > limit:
            raise ValueError("dynamic bank exceeds its limit")

    def templates(self) -> Tuple[TemplateRecord, ...]:
        """Initial template concatenated with all dynamic templates."""
        return (self.initial, *self.dynamic)


def maybe_update_memory(
    mem: TemplateMemory,
    frame_idx: int,
    predicted_iou: float,
    candidate: TemplateRecord,
) -> TemplateMemory:
    """Apply the memorization policy for one frame; returns the new memory.

    Updates happen only at frames that are multiples of the update interval,
    and, when the IP gate is configured, only when the predicted IoU clears
    the threshold.
    """
    if frame_idx % mem.update_interval != 0:
        return mem
    if mem.iou_threshold is not None and not (predicted_iou > mem.iou_threshold):
        return mem
    if mem.strategy == "ONE":
        return replace(mem, dynamic=(candidate,))
    bank = (*mem.dynamic, candidate)
    if len(bank) > mem.capacity:
        bank = bank[len(bank) - mem.capacity :]
    return replace(mem, dynamic=bank)
