"""Training losses as differentiable scalars with hand-derived gradients.

Every loss returns a LossValue carrying the scalar and its gradient with
respect to the prediction inputs. Non-smooth points (box corner ties,
bootstrap rank ties, |x| at 0) use the left-limit subgradient. A central
finite-difference checker verifies every gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple, Union

import numpy as np

from .core import BoundingBox

EPS_CLAMP = 1e-6
EPS_DICE = 1e-6

BoxLike = Union[BoundingBox, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class LossConfig:
    """Loss weights: Eq-5 box terms, Eq-6 mask terms, focal shape, bootstrap."""

    lambda_giou: float = 2.0
    lambda_l1: float = 5.0
    lambda_bce: float = 10.0
    lambda_dice: float = 2.0
    focal_alpha: float = 2.0
    focal_beta: float = 4.0
    bootstrap_fraction: float = 0.15

    def __post_init__(self):
        if min(self.lambda_giou, self.lambda_l1, self.lambda_bce, self.lambda_dice) <= 0:
            raise ValueError("all lambda weights must be positive")
        if not (0 < self.bootstrap_fraction <= 1):
            raise ValueError("bootstrap fraction must be in (0, 1]")


@dataclass(frozen=True)
class LossValue:
    value: float
    grad: np.ndarray  # same shape as the prediction input


def _as_box_array(b: BoxLike) -> np.ndarray:
    if isinstance(b, BoundingBox):
        return np.array(b.as_tuple(), dtype=float)
    arr = np.asarray(b, dtype=float).reshape(4)
    return arr


def focal_loss(pred: np.ndarray, gt: np.ndarray, alpha: float = 2.0, beta: float = 4.0) -> LossValue:
    """Center-weighted focal loss over a score heatmap.

    gt==1 pixels: -(1-p)^alpha * log p; others: -(1-y)^beta * p^alpha * log(1-p).
    Normalized by the number of gt==1 pixels (at least 1). Predictions are
    clamped to [1e-6, 1-1e-6]; the gradient is zero through an active clamp.
    """
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    p = np.clip(pred, EPS_CLAMP, 1.0 - EPS_CLAMP)
    clamped = (pred < EPS_CLAMP) | (pred > 1.0 - EPS_CLAMP)
    pos = gt >= 1.0
    n_pos = max(int(pos.sum()), 1)

    log_p = np.log(p)
    log_1p = np.log1p(-p)
    pos_term = -((1.0 - p) ** alpha) * log_p
    neg_term = -((1.0 - gt) ** beta) * (p ** alpha) * log_1p
    value = float(np.where(pos, pos_term, neg_term).sum() / n_pos)

    d_pos = alpha * (1.0 - p) ** (alpha - 1.0) * log_p - (1.0 - p) ** alpha / p
    d_neg = -((1.0 - gt) ** beta) * (
        alpha * p ** (alpha - 1.0) * log_1p - (p ** alpha) / (1.0 - p)
    )
    grad = np.where(pos, d_pos, d_neg) / n_pos
    grad = np.where(clamped, 0.0, grad)
    return LossValue(value, grad)


def _giou_corner_grads(pc: np.ndarray, gc: np.ndarray) -> Tuple[float, np.ndarray]:
    """GIoU loss and gradient in corner form (x1, y1, x2, y2) of the prediction."""
    px1, py1, px2, py2 = pc
    gx1, gy1, gx2, gy2 = gc

    iw = min(px2, gx2) - max(px1, gx1)
    ih = min(py2, gy2) - max(py1, gy1)
    area_p = (px2 - px1) * (py2 - py1)
    area_g = (gx2 - gx1) * (gy2 - gy1)

    d_ap = np.array([-(py2 - py1), -(px2 - px1), (py2 - py1), (px2 - px1)])
    if iw > 0 and ih > 0:
        inter = iw * ih
        # left-limit indicators for the active min/max branches
        d_iw = np.array([-(1.0 if px1 > gx1 else 0.0), 0.0, (1.0 if px2 <= gx2 else 0.0), 0.0])
        d_ih = np.array([0.0, -(1.0 if py1 > gy1 else 0.0), 0.0, (1.0 if py2 <= gy2 else 0.0)])
        d_inter = ih * d_iw + iw * d_ih
    else:
        inter = 0.0
        d_inter = np.zeros(4)

    union = area_p + area_g - inter
    d_union = d_ap - d_inter
    iou = inter / union
    d_iou = (d_inter * union - inter * d_union) / union**2

    cw = max(px2, gx2) - min(px1, gx1)
    ch = max(py2, gy2) - min(py1, gy1)
    d_cw = np.array([-(1.0 if px1 <= gx1 else 0.0), 0.0, (1.0 if px2 > gx2 else 0.0), 0.0])
    d_ch = np.array([0.0, -(1.0 if py1 <= gy1 else 0.0), 0.0, (1.0 if py2 > gy2 else 0.0)])
    c_area = cw * ch
    d_c = ch * d_cw + cw * d_ch

    # GIoU = IoU - (C - U)/C = IoU - 1 + U/C
    giou = iou - (c_area - union) / c_area
    d_giou = d_iou + (d_union * c_area - union * d_c) / c_area**2
    return 1.0 - giou, -d_giou


def giou_loss(pred: BoxLike, gt: BoxLike) -> LossValue:
    """1 - GIoU; gradient is with respect to the predicted (x, y, w, h)."""
    p = _as_box_array(pred)
    g = _as_box_array(gt)
    pc = np.array([p[0], p[1], p[0] + p[2], p[1] + p[3]])
    gc = np.array([g[0], g[1], g[0] + g[2], g[1] + g[3]])
    value, corner_grad = _giou_corner_grads(pc, gc)
    grad = np.array(
        [
            corner_grad[0] + corner_grad[2],
            corner_grad[1] + corner_grad[3],
            corner_grad[2],
            corner_grad[3],
        ]
    )
    return LossValue(float(value), grad)


def l1_loss(pred: BoxLike, gt: BoxLike) -> LossValue:
    """Mean absolute difference over (x, y, w, h); subgradient -1/4 at ties."""
    p = _as_box_array(pred)
    g = _as_box_array(gt)
    diff = p - g
    value = float(np.abs(diff).mean())
    grad = np.where(diff > 0, 1.0, -1.0) / 4.0
    return LossValue(value, grad)


def vot_loss(focal: float, giou: float, l1: float, cfg: LossConfig = LossConfig()) -> LossValue:
    """Box-tracking composite: focal + lambda_giou * giou + lambda_l1 * l1."""
    weights = np.array([1.0, cfg.lambda_giou, cfg.lambda_l1])
    value = float(weights @ [focal, giou, l1])
    return LossValue(value, weights)


def dice_loss(pred: np.ndarray, gt: np.ndarray) -> LossValue:
    """Soft dice: 1 - 2*sum(p*g) / (sum(p) + sum(g) + eps)."""
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    inter = float((pred * gt).sum())
    denom = float(pred.sum() + gt.sum()) + EPS_DICE
    value = 1.0 - 2.0 * inter / denom
    grad = -2.0 * (gt * denom - inter) / denom**2
    return LossValue(value, grad)


def bootstrapped_ce(pred: np.ndarray, gt: np.ndarray, rho: float = 0.15) -> LossValue:
    """Mean of the top ceil(rho * N) per-pixel cross-entropies.

    Rank ties are broken toward the lower flat pixel index. Predictions are
    clamped to [1e-6, 1-1e-6] with zero gradient through an active clamp.
    """
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    if not (0 < rho <= 1):
        raise ValueError("rho must be in (0, 1]")
    p = np.clip(pred, EPS_CLAMP, 1.0 - EPS_CLAMP).ravel()
    clamped = ((pred < EPS_CLAMP) | (pred > 1.0 - EPS_CLAMP)).ravel()
    y = gt.ravel()
    ce = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    k = math.ceil(rho * ce.size)
    order = np.argsort(-ce, kind="stable")  # stable: ties keep lower index first
    selected = order[:k]
    value = float(ce[selected].mean())
    grad = np.zeros_like(p)
    d_ce = -y[selected] / p[selected] + (1.0 - y[selected]) / (1.0 - p[selected])
    grad[selected] = d_ce / k
    grad[clamped] = 0.0
    return LossValue(value, grad.reshape(pred.shape))


def iou_l2_loss(pred_iou: float, true_iou: float) -> LossValue:
    """(pred - true)^2 with gradient 2*(pred - true)."""
    diff = float(pred_iou) - float(true_iou)
    return LossValue(diff * diff, np.array([2.0 * diff]))


def vos_loss(
    bce: float, dice: float, l2: float, reg: float, cfg: LossConfig = LossConfig()
) -> LossValue:
    """Segmentation composite: lambda_bce*bce + lambda_dice*dice + l2 + reg."""
    weights = np.array([cfg.lambda_bce, cfg.lambda_dice, 1.0, 1.0])
    value = float(weights @ [bce, dice, l2, reg])
    return LossValue(value, weights)


def make_center_heatmap(shape: Tuple[int, int], center: Tuple[float, float], box_wh: Tuple[float, float]) -> np.ndarray:
    """Gaussian ground-truth heatmap around a target center, spread tied to box size."""
    h, w = shape
    cx, cy = center
    sigma = max(min(box_wh) / 6.0, 1.0)
    jj, ii = np.mgrid[0:h, 0:w]
    heat = np.exp(-(((ii - cx) ** 2) + ((jj - cy) ** 2)) / (2.0 * sigma * sigma))
    heat[int(round(cy)), int(round(cx))] = 1.0
    return heat


def _sample_boxes(rng: np.random.Generator, min_gap: float = 1e-2) -> Tuple[np.ndarray, np.ndarray]:
    """Random box pair away from corner ties and zero-overlap kinks."""
    while True:
        p = np.r_[rng.uniform(0, 5, 2), rng.uniform(0.5, 3, 2)]
        g = np.r_[rng.uniform(0, 5, 2), rng.uniform(0.5, 3, 2)]
        pc = np.array([p[0], p[1], p[0] + p[2], p[1] + p[3]])
        gc = np.array([g[0], g[1], g[0] + g[2], g[1] + g[3]])
        gaps = np.abs(pc - gc)
        iw = min(pc[2], gc[2]) - max(pc[0], gc[0])
        ih = min(pc[3], gc[3]) - max(pc[1], gc[1])
        if gaps.min() > min_gap and abs(iw) > min_gap and abs(ih) > min_gap:
            return p, g


def standard_gradient_suite(
    seed: int, n_points: int = 20, tol: float = 1e-4, cfg: LossConfig = LossConfig()
) -> dict:
    """Finite-difference checks for every loss at seeded smooth points.

    Returns {loss name: max relative error over all points}.
    """
    rng = np.random.default_rng(seed)
    worst: dict = {}

    def note(name, report):
        worst[name] = max(worst.get(name, 0.0), report.max_rel_error)

    for _ in range(n_points):
        shape = (4, 5)
        gt_heat = rng.uniform(0.0, 0.95, shape)
        gt_heat.flat[rng.integers(0, gt_heat.size)] = 1.0
        pred_heat = rng.uniform(0.05, 0.95, shape)
        note(
            "focal",
            check_gradient(
                lambda x: focal_loss(x, gt_heat, cfg.focal_alpha, cfg.focal_beta), pred_heat, tol=tol
            ),
        )

        pb, gb = _sample_boxes(rng)
        note("giou", check_gradient(lambda x: giou_loss(x, gb), pb, tol=tol))
        note("l1", check_gradient(lambda x: l1_loss(x, gb), pb, tol=tol))

        gt_mask = (rng.random(shape) < 0.4).astype(float)
        pred_mask = rng.uniform(0.05, 0.95, shape)
        note("dice", check_gradient(lambda x: dice_loss(x, gt_mask), pred_mask, tol=tol))

        # keep the bootstrap rank boundary away from ties
        while True:
            pred_bce = rng.uniform(0.05, 0.95, shape)
            ce = -(gt_mask * np.log(pred_bce) + (1 - gt_mask) * np.log1p(-pred_bce)).ravel()
            k = math.ceil(cfg.bootstrap_fraction * ce.size)
            ordered = np.sort(ce)[::-1]
            if k >= ce.size or ordered[k - 1] - ordered[k] > 1e-3:
                break
        note(
            "bootstrapped_ce",
            check_gradient(
                lambda x: bootstrapped_ce(x, gt_mask, cfg.bootstrap_fraction), pred_bce, tol=tol
            ),
        )

        note(
            "iou_l2",
            check_gradient(
                lambda x: iou_l2_loss(float(x[0]), 0.5), np.array([rng.uniform(0.0, 1.0)]), tol=tol
            ),
        )

        comp3 = rng.uniform(0.01, 1.0, 3)
        note(
            "vot_composite",
            check_gradient(
                lambda x: LossValue(vot_loss(x[0], x[1], x[2], cfg).value, vot_loss(x[0], x[1], x[2], cfg).grad),
                comp3,
                tol=tol,
            ),
        )
        comp4 = rng.uniform(0.01, 1.0, 4)
        note(
            "vos_composite",
            check_gradient(
                lambda x: LossValue(vos_loss(x[0], x[1], x[2], x[3], cfg).value, vos_loss(x[0], x[1], x[2], x[3], cfg).grad),
                comp4,
                tol=tol,
            ),
        )
    return worst


@dataclass(frozen=True)
class GradientCheckReport:
    max_rel_error: float
    worst_index: int
    passed: bool
    analytic: np.ndarray
    numeric: np.ndarray


def check_gradient(
    f: Callable[[np.ndarray], LossValue],
    point: np.ndarray,
    h: float = 1e-6,
    tol: float = 1e-4,
) -> GradientCheckReport:
    """Central finite differences vs the analytic gradient, per coordinate."""
    point = np.asarray(point, dtype=float)
    analytic = np.asarray(f(point).grad, dtype=float).reshape(point.shape)
    numeric = np.zeros_like(point, dtype=float)
    flat = point.ravel()
    num_flat = numeric.ravel()
    for i in range(flat.size):
        x_hi = flat.copy()
        x_lo = flat.copy()
        x_hi[i] += h
        x_lo[i] -= h
        num_flat[i] = (f(x_hi.reshape(point.shape)).value - f(x_lo.reshape(point.shape)).value) / (2 * h)
    rel = np.abs(analytic.ravel() - num_flat) / np.maximum(
        np.abs(analytic.ravel()) + np.abs(num_flat), 1e-6
    )
    worst = int(np.argmax(rel))
    return GradientCheckReport(
        max_rel_error=float(rel[worst]),
        worst_index=worst,
        passed=bool(rel[worst] < tol),
        analytic=analytic,
        numeric=numeric,
    )
