"""Annotation derivations: keyframe box interpolation and the LD flag."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .core import BoundingBox, ConfidenceMap

DEFAULT_LD_THRESHOLD = 0.5


@dataclass(frozen=True)
class Keyframe:
    frame: int
    box: Optional[BoundingBox]  # None when the target is invisible

    @property
    def visible(self) -> bool:
        return self.box is not None


@dataclass(frozen=True)
class KeyframeTrack:
    """Annotated keyframes of one target, strictly increasing frame indices."""

    keyframes: Tuple[Keyframe, ...]

    def __post_init__(self):
        if not self.keyframes:
            raise ValueError("a keyframe track needs at least one keyframe")
        idx = [k.frame for k in self.keyframes]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("keyframe indices must be strictly increasing")

    @property
    def frames(self) -> Tuple[int, ...]:
        return tuple(k.frame for k in self.keyframes)


def interpolate_boxes(
    track: KeyframeTrack, all_frames: Sequence[int]
) -> Dict[int, Optional[BoundingBox]]:
    """Per-frame boxes by linear interpolation between consecutive keyframes.

    Each of (x, y, w, h) is interpolated independently. Frames outside the
    terminal keyframes, and frames inside a span with an invisible endpoint,
    map to None. Keyframes map to their own box exactly.
    """
    kfs = track.keyframes
    by_frame = {k.frame: k for k in kfs}
    out: Dict[int, Optional[BoundingBox]] = {}
    for t in all_frames:
        if t in by_frame:
            out[t] = by_frame[t].box
            continue
        if t < kfs[0].frame or t > kfs[-1].frame:
            out[t] = None
            continue
        # find the enclosing keyframe span
        hi = next(i for i, k in enumerate(kfs) if k.frame > t)
        a, b = kfs[hi - 1], kfs[hi]
        if not (a.visible and b.visible):
            out[t] = None
            continue
        u = (t - a.frame) / (b.frame - a.frame)
        ax, bx = a.box.as_tuple(), b.box.as_tuple()
        out[t] = BoundingBox(*((1 - u) * p + u * q for p, q in zip(ax, bx)))
    return out


def compute_ld_flag(
    conf: ConfidenceMap,
    box: BoundingBox,
    low_fraction_threshold: float = DEFAULT_LD_THRESHOLD,
) -> bool:
    """Low-depth-quality flag from the confidence map.

    True iff the fraction of pixels inside the box with confidence below the
    high level (2) exceeds the threshold. The box is clipped to the image;
    a box fully outside is an error.
    """
    x0 = max(int(np.floor(box.x)), 0)
    y0 = max(int(np.floor(box.y)), 0)
    x1 = min(int(np.ceil(box.x2)), conf.width)
    y1 = min(int(np.ceil(box.y2)), conf.height)
    if x0 >= x1 or y0 >= y1:
        raise ValueError("box lies fully outside the confidence map")
    patch = conf.values[y0:y1, x0:x1]
    low_fraction = float((patch < 2).mean())
    return low_fraction > low_fraction_threshold
