"""VOS metrics: region similarity J, contour accuracy F, and J&F."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .core import TargetMask, mask_iou


def region_similarity(pred: TargetMask, gt: TargetMask) -> float:
    """Mask IoU (J). 1.0 when both masks are empty."""
    return mask_iou(pred, gt)


def boundary(mask: TargetMask) -> np.ndarray:
    """Boundary pixels: set pixels with an unset 4-neighbor or on the border."""
    m = mask.data
    if not m.any():
        return np.zeros_like(m)
    interior = np.ones_like(m)
    interior[0, :] = interior[-1, :] = False
    interior[:, 0] = interior[:, -1] = False
    eroded = (
        np.roll(m, 1, 0) & np.roll(m, -1, 0) & np.roll(m, 1, 1) & np.roll(m, -1, 1) & interior
    )
    return m & ~eroded


def default_tolerance_radius(width: int, height: int) -> int:
    """Boundary match radius tied to image size: round(0.008 * diagonal)."""
    return round(0.008 * math.hypot(width, height))


def contour_accuracy(pred: TargetMask, gt: TargetMask, tolerance_radius: float = None) -> float:
    """Boundary F-measure with a disc matching tolerance.

    A boundary pixel matches when it lies within the tolerance radius of some
    boundary pixel of the other mask (Euclidean). Both boundaries empty: 1.0;
    exactly one empty: 0.0.
    """
    if pred.data.shape != gt.data.shape:
        raise ValueError(f"mask dimensions differ: {pred.data.shape} vs {gt.data.shape}")
    if tolerance_radius is None:
        tolerance_radius = default_tolerance_radius(pred.width, pred.height)
    pb = boundary(pred)
    gb = boundary(gt)
    np_pred = int(pb.sum())
    np_gt = int(gb.sum())
    if np_pred == 0 and np_gt == 0:
        return 1.0
    if np_pred == 0 or np_gt == 0:
        return 0.0
    dist_to_gt = ndimage.distance_transform_edt(~gb)
    dist_to_pred = ndimage.distance_transform_edt(~pb)
    precision = float((dist_to_gt[pb] <= tolerance_radius + 1e-9).mean())
    recall = float((dist_to_pred[gb] <= tolerance_radius + 1e-9).mean())
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class VOSAggregate:
    j_mean: float
    f_mean: float
    j_and_f: float
    per_track: Dict[str, Tuple[float, float]]


def aggregate(
    per_track_j: Dict[str, Sequence[float]], per_track_f: Dict[str, Sequence[float]]
) -> VOSAggregate:
    """Per-track means over annotated frames, then the mean over tracks."""
    if set(per_track_j) != set(per_track_f):
        raise ValueError("J and F cover different tracks")
    if not per_track_j:
        raise ValueError("no tracks to aggregate")
    per_track = {}
    for track in sorted(per_track_j):
        js, fs = per_track_j[track], per_track_f[track]
        if len(js) != len(fs) or not js:
            raise ValueError(f"track {track}: J/F frame counts invalid")
        per_track[track] = (sum(js) / len(js), sum(fs) / len(fs))
    j_mean = sum(v[0] for v in per_track.values()) / len(per_track)
    f_mean = sum(v[1] for v in per_track.values()) / len(per_track)
    return VOSAggregate(j_mean, f_mean, (j_mean + f_mean) / 2.0, per_track)
