"""Long-term VOT protocol: Pr/Re/F over an exhaustive confidence sweep.

A track is one (sequence, target) pair. Ground truth is a per-frame optional
box (None = target absent); predictions are TrackPredictions aligned frame
by frame. Default aggregation pools frames across all tracks at each
threshold (global N_p / N_g); per-track averaging is available for
cross-toolkit comparison.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .core import ATTRIBUTE_NAMES, AttributeFlags, BoundingBox, TrackPrediction, box_iou


@dataclass(frozen=True)
class PRPoint:
    tau: float
    pr: float
    re: float
    f: float


@dataclass(frozen=True)
class PRCurve:
    points: Tuple[PRPoint, ...]
    best: PRPoint


def _frame_iou(pred: TrackPrediction, gt: Optional[BoundingBox], tau: float) -> Tuple[bool, float]:
    """(counted in N_p, IoU contribution) for one frame at threshold tau.

    An absent prediction never enters N_p; a boxed prediction over an absent
    ground truth counts 0 (false-positive penalty).
    """
    if pred.box is None or pred.confidence < tau:
        return False, 0.0
    if gt is None:
        return True, 0.0
    return True, box_iou(pred.box, gt)


def precision_at(
    result: Sequence[TrackPrediction], gt: Sequence[Optional[BoundingBox]], tau: float
) -> float:
    """Mean IoU over frames with a confident prediction; 0 when there are none."""
    if len(result) != len(gt):
        raise ValueError(f"result/gt length mismatch: {len(result)} vs {len(gt)}")
    n_p = 0
    total = 0.0
    for pred, g in zip(result, gt):
        counted, iou = _frame_iou(pred, g, tau)
        if counted:
            n_p += 1
            total += iou
    return total / n_p if n_p else 0.0


def recall_at(
    result: Sequence[TrackPrediction], gt: Sequence[Optional[BoundingBox]], tau: float
) -> float:
    """Mean IoU over visible ground-truth frames."""
    if len(result) != len(gt):
        raise ValueError(f"result/gt length mismatch: {len(result)} vs {len(gt)}")
    n_g = sum(1 for g in gt if g is not None)
    if n_g == 0:
        raise ValueError("track has no visible ground-truth frames")
    total = 0.0
    for pred, g in zip(result, gt):
        if g is None:
            continue
        counted, iou = _frame_iou(pred, g, tau)
        if counted:
            total += iou
    return total / n_g


def f_score(pr: float, re: float) -> float:
    """Harmonic mean of precision and recall; 0 when both vanish."""
    if pr + re == 0:
        return 0.0
    return 2.0 * pr * re / (pr + re)


def _pooled_pr_re(
    results: Sequence[Sequence[TrackPrediction]],
    gts: Sequence[Sequence[Optional[BoundingBox]]],
    tau: float,
) -> Tuple[float, float]:
    n_p = n_g = 0
    sum_p = sum_g = 0.0
    for result, gt in zip(results, gts):
        for pred, g in zip(result, gt):
            counted, iou = _frame_iou(pred, g, tau)
            if counted:
                n_p += 1
                sum_p += iou
            if g is not None:
                n_g += 1
                if counted:
                    sum_g += iou
    pr = sum_p / n_p if n_p else 0.0
    re = sum_g / n_g if n_g else 0.0
    return pr, re


def _per_track_pr_re(
    results: Sequence[Sequence[TrackPrediction]],
    gts: Sequence[Sequence[Optional[BoundingBox]]],
    tau: float,
) -> Tuple[float, float]:
    prs = [precision_at(r, g, tau) for r, g in zip(results, gts)]
    res = [recall_at(r, g, tau) for r, g in zip(results, gts)]
    return sum(prs) / len(prs), sum(res) / len(res)


def sweep(
    results: Sequence[Sequence[TrackPrediction]],
    gts: Sequence[Sequence[Optional[BoundingBox]]],
    mode: str = "pooled",
) -> PRCurve:
    """Evaluate Pr/Re/F at every distinct confidence threshold.

    Candidate thresholds are all distinct prediction confidences plus a
    sentinel (-inf) that admits every boxed prediction. The best point
    maximizes F; ties go to the smaller threshold.
    """
    if not results:
        raise ValueError("need at least one track")
    if len(results) != len(gts):
        raise ValueError("results and ground truths disagree on track count")
    if mode not in ("pooled", "per-track"):
        raise ValueError(f"unknown mode {mode!r}")
    taus = sorted({p.confidence for result in results for p in result})
    taus = [float("-inf")] + taus
    score = _pooled_pr_re if mode == "pooled" else _per_track_pr_re
    points = []
    for tau in taus:
        pr, re = score(results, gts, tau)
        points.append(PRPoint(tau, pr, re, f_score(pr, re)))
    best = max(points, key=lambda p: (p.f, -p.tau))
    return PRCurve(tuple(points), best)


def attribute_report(
    results: Sequence[Sequence[TrackPrediction]],
    gts: Sequence[Sequence[Optional[BoundingBox]]],
    flags: Sequence[Sequence[Optional[AttributeFlags]]],
    mode: str = "pooled",
) -> Dict[str, PRPoint]:
    """Per-attribute Pr/Re/F at the global best threshold.

    Frames are restricted to those flagged with each attribute; attributes
    with no flagged visible frame are omitted.
    """
    best_tau = sweep(results, gts, mode=mode).best.tau
    score = _pooled_pr_re if mode == "pooled" else _per_track_pr_re
    out: Dict[str, PRPoint] = {}
    for name in ATTRIBUTE_NAMES:
        sub_results: List[List[TrackPrediction]] = []
        sub_gts: List[List[Optional[BoundingBox]]] = []
        visible = 0
        for result, gt, flag_seq in zip(results, gts, flags):
            r: List[TrackPrediction] = []
            g: List[Optional[BoundingBox]] = []
            for pred, box, fl in zip(result, gt, flag_seq):
                if fl is not None and getattr(fl, name):
                    r.append(pred)
                    g.append(box)
                    if box is not None:
                        visible += 1
            if r:
                sub_results.append(r)
                sub_gts.append(g)
        if visible == 0:
            continue
        pr, re = score(sub_results, sub_gts, best_tau)
        out[name] = PRPoint(best_tau, pr, re, f_score(pr, re))
    return out


def load_predictions(path) -> List[TrackPrediction]:
    """Read one track's predictions: per line `absent,<conf>` or `x,y,w,h,<conf>`."""
    preds: List[TrackPrediction] = []
    with open(path, newline="") as f:
        for lineno, row in enumerate(csv.reader(f), start=1):
            if not row:
                continue
            if row[0].strip() == "absent":
                if len(row) != 2:
                    raise ValueError(f"{path}:{lineno}: expected `absent,<conf>`")
                preds.append(TrackPrediction(None, float(row[1])))
            else:
                if len(row) != 5:
                    raise ValueError(f"{path}:{lineno}: expected `x,y,w,h,<conf>`")
                x, y, w, h, conf = map(float, row)
                preds.append(TrackPrediction(BoundingBox(x, y, w, h), conf))
    return preds


def save_predictions(path, preds: Sequence[TrackPrediction]):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        for p in preds:
            if p.box is None:
                writer.writerow(["absent", repr(p.confidence)])
            else:
                writer.writerow([repr(v) for v in (*p.box.as_tuple(), p.confidence)])
