"""Gaussian-depth image-to-BEV transformation as pure array operations.

Pipeline: per-pixel features are lifted along the viewing ray over discrete
depth hypotheses weighted by a Gaussian centered at the measured depth,
pooled into a pillar BEV grid, modulated by a conv chain, back-projected to
the image plane via each pixel's raw depth, and fused with the image feature
by concatenation + convolution.

Feature maps are channel-major float arrays: image views (C, H, W), BEV
grids (C_B, H_B, W_B). Conv weights are caller-supplied; nothing here is
trained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .core import CameraIntrinsics
from .geometry import BEVGridSpec, bev_cells_of, unproject_grid

LIFT_WEIGHT_EPS = 1e-6


@dataclass(frozen=True)
class DepthDistributionSpec:
    """Discrete depth hypothesis grid with a Gaussian spread.

    Bin centers: d_k = d_min + (k + 0.5) * (d_max - d_min) / n_bins.
    sigma=None means one bin width.
    """

    d_min: float = 0.25
    d_max: float = 8.0
    n_bins: int = 64
    sigma: Optional[float] = None

    def __post_init__(self):
        if not (self.d_min < self.d_max):
            raise ValueError("need d_min < d_max")
        if self.n_bins < 1:
            raise ValueError("need at least one depth bin")
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def bin_width(self) -> float:
        return (self.d_max - self.d_min) / self.n_bins

    @property
    def effective_sigma(self) -> float:
        return self.bin_width if self.sigma is None else self.sigma

    def bin_centers(self) -> np.ndarray:
        k = np.arange(self.n_bins)
        return self.d_min + (k + 0.5) * self.bin_width


def depth_weights(d, spec: DepthDistributionSpec) -> np.ndarray:
    """Normalized Gaussian weights over the depth bins for measured depth d.

    Accepts a scalar or an array of depths; invalid depths (<= 0 or
    non-finite) get an all-zero weight row.
    """
    d = np.asarray(d, dtype=np.float64)
    centers = spec.bin_centers()
    sigma = spec.effective_sigma
    valid = np.isfinite(d) & (d > 0)
    dd = np.where(valid, d, spec.d_min)  # placeholder, masked below
    w = np.exp(-((centers - dd[..., None]) ** 2) / (2.0 * sigma * sigma))
    w /= w.sum(axis=-1, keepdims=True)
    w = np.where(valid[..., None], w, 0.0)
    return w if d.ndim else w.reshape(spec.n_bins)


def resample_nearest(values: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    """Nearest-neighbor resample of a 2-D array to (H, W)."""
    h, w = values.shape
    out_h, out_w = shape
    rows = np.minimum((np.arange(out_h) + 0.5) * h / out_h, h - 1).astype(int)
    cols = np.minimum((np.arange(out_w) + 0.5) * w / out_w, w - 1).astype(int)
    return values[rows][:, cols]


def lift(
    image_feat: np.ndarray,
    depth: np.ndarray,
    K: CameraIntrinsics,
    spec: DepthDistributionSpec,
    confidence: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Lift an image feature map into a 3D frustum point set.

    Every pixel with valid depth contributes one weighted point per depth bin
    whose Gaussian weight exceeds a small pruning threshold. Returns
    (points (N, 3), features (N, C)). `confidence` optionally gates lifting:
    level-0 pixels are dropped.
    """
    image_feat = np.asarray(image_feat, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    c, h, w = image_feat.shape
    if depth.shape != (h, w):
        raise ValueError(f"depth shape {depth.shape} does not match feature map ({h}, {w})")

    valid = np.isfinite(depth) & (depth > 0)
    if confidence is not None:
        if confidence.shape != (h, w):
            raise ValueError("confidence map shape mismatch")
        valid &= confidence > 0

    weights = depth_weights(np.where(valid, depth, 0.0), spec)  # (H, W, n_bins)
    centers = spec.bin_centers()

    jj, ii = np.mgrid[0:h, 0:w]
    keep = weights > LIFT_WEIGHT_EPS  # (H, W, n_bins)
    pj, pi, pk = np.nonzero(keep)
    d_k = centers[pk]
    px = (pi - K.cx) * d_k / K.fx
    py = (pj - K.cy) * d_k / K.fy
    points = np.stack([px, py, d_k], axis=-1)
    feats = image_feat[:, pj, pi].T * weights[pj, pi, pk][:, None]
    return points, feats


@dataclass(frozen=True)
class BEVFeature:
    """Pillar-format BEV feature grid: values shaped (C_B, H_B, W_B)."""

    grid: BEVGridSpec
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape[1:] != (self.grid.n_rows, self.grid.n_cols):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid "
                f"({self.grid.n_rows}, {self.grid.n_cols})"
            )

    @property
    def channels(self) -> int:
        return self.values.shape[0]


def bev_pool_naive(
    points: np.ndarray,
    feats: np.ndarray,
    grid: BEVGridSpec,
    reduce: str = "sum",
) -> BEVFeature:
    """Reference per-point scatter pooling. Oracle for the accelerated path."""
    _check_pool_inputs(points, feats, reduce)
    c = feats.shape[1]
    out = np.zeros((c, grid.n_rows, grid.n_cols))
    counts = np.zeros((grid.n_rows, grid.n_cols))
    if reduce == "max":
        out -= np.inf
    inside, cells = bev_cells_of(points, grid)
    for n in range(points.shape[0]):
        if not inside[n]:
            continue
        k, l = divmod(int(cells[n]), grid.n_cols)
        if reduce == "max":
            out[:, k, l] = np.maximum(out[:, k, l], feats[n])
        else:
            out[:, k, l] += feats[n]
        counts[k, l] += 1
    if reduce == "mean":
        out = np.divide(out, counts, out=out, where=counts > 0)
    elif reduce == "max":
        out[:, counts == 0] = 0.0
    return BEVFeature(grid, out)


def bev_pool(
    points: np.ndarray,
    feats: np.ndarray,
    grid: BEVGridSpec,
    reduce: str = "sum",
) -> BEVFeature:
    """Accelerated pooling: sort points by cell id, segmented reduction.

    Deterministic: the reduction order within a segment is the stable sort
    order of the input, independent of any parallelism.
    """
    _check_pool_inputs(points, feats, reduce)
    c = feats.shape[1]
    out = np.zeros((c, grid.n_rows, grid.n_cols))
    inside, cells = bev_cells_of(points, grid)
    cells = cells[inside]
    feats = feats[inside]
    if cells.size == 0:
        return BEVFeature(grid, out)

    order = np.argsort(cells, kind="stable")
    cells = cells[order]
    feats = feats[order]
    starts = np.flatnonzero(np.r_[True, cells[1:] != cells[:-1]])
    ids = cells[starts]
    if reduce == "sum":
        reduced = np.add.reduceat(feats, starts, axis=0)
    elif reduce == "max":
        reduced = np.maximum.reduceat(feats, starts, axis=0)
    else:  # mean
        sums = np.add.reduceat(feats, starts, axis=0)
        counts = np.diff(np.r_[starts, cells.size])
        reduced = sums / counts[:, None]
    flat = out.reshape(c, -1)
    flat[:, ids] = reduced.T
    return BEVFeature(grid, out)


def _check_pool_inputs(points: np.ndarray, feats: np.ndarray, reduce: str):
    if reduce not in ("sum", "mean", "max"):
        raise ValueError(f"unknown reduction {reduce!r}")
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError("points must be (N, 3)")
    if feats.shape[0] != points.shape[0]:
        raise ValueError("points and features disagree on N")
    if not (np.isfinite(points).all() and np.isfinite(feats).all()):
        raise ValueError("points and features must be finite")


@dataclass(frozen=True)
class ConvLayer:
    """One stride-1, zero same-padded 2D convolution layer."""

    weight: np.ndarray  # (out, in, kh, kw)
    bias: np.ndarray  # (out,)
    activation: str = "identity"  # or "relu"

    def __post_init__(self):
        if self.weight.ndim != 4:
            raise ValueError("conv weight must be (out, in, kh, kw)")
        if self.bias.shape != (self.weight.shape[0],):
            raise ValueError("bias length must equal output channels")
        if self.activation not in ("identity", "relu"):
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass(frozen=True)
class ConvSpec:
    """A chain of ConvLayers with shape-consistent channels."""

    layers: Tuple[ConvLayer, ...]

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if b.weight.shape[1] != a.weight.shape[0]:
                raise ValueError("conv chain channels are inconsistent")

    @property
    def in_channels(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def out_channels(self) -> int:
        return self.layers[-1].weight.shape[0]


def conv2d_same(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Direct 2D convolution (cross-correlation), stride 1, zero same padding."""
    w = layer.weight
    c_out, c_in, kh, kw = w.shape
    if x.shape[0] != c_in:
        raise ValueError(f"layer expects {c_in} channels, got {x.shape[0]}")
    ph_lo, pw_lo = (kh - 1) // 2, (kw - 1) // 2
    xp = np.pad(x, ((0, 0), (ph_lo, kh - 1 - ph_lo), (pw_lo, kw - 1 - pw_lo)))
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    out = np.einsum("chwij,ocij->ohw", windows, w) + layer.bias[:, None, None]
    if layer.activation == "relu":
        out = np.maximum(out, 0.0)
    return out


def apply_conv_chain(x: np.ndarray, conv: ConvSpec) -> np.ndarray:
    for layer in conv.layers:
        x = conv2d_same(x, layer)
    return x


def modulate(bev: BEVFeature, conv: ConvSpec) -> BEVFeature:
    """Run the BEV grid through the modulation conv chain."""
    return BEVFeature(bev.grid, apply_conv_chain(bev.values, conv))


def back_project(bev: BEVFeature, depth: np.ndarray, K: CameraIntrinsics) -> np.ndarray:
    """Sample each pixel's pillar feature using its raw measured depth.

    Nearest-neighbor: a pixel copies the feature of the cell its unprojected
    point falls into. Invalid depth or out-of-grid pixels get zeros.
    Returns (C_B, H, W).
    """
    depth = np.asarray(depth, dtype=np.float64)
    h, w = depth.shape
    pts = unproject_grid(depth, K).reshape(-1, 3)
    valid = (np.isfinite(depth) & (depth > 0)).reshape(-1)
    pts = np.where(valid[:, None], pts, [[0.0, 0.0, 1.0]])
    inside, cells = bev_cells_of(pts, bev.grid)
    take = valid & inside
    flat = bev.values.reshape(bev.channels, -1)
    out = np.zeros((bev.channels, h * w))
    out[:, take] = flat[:, cells[take]]
    return out.reshape(bev.channels, h, w)


def fuse(image_feat: np.ndarray, i_bev: np.ndarray, conv: ConvSpec) -> np.ndarray:
    """Cross-view fusion: channel concat [image; bev] then the conv chain."""
    if image_feat.shape[1:] != i_bev.shape[1:]:
        raise ValueError(
            f"spatial dims differ: {image_feat.shape[1:]} vs {i_bev.shape[1:]}"
        )
    return apply_conv_chain(np.concatenate([image_feat, i_bev], axis=0), conv)


def identity_conv(channels: int) -> ConvSpec:
    """1x1 identity chain (unit kernel, zero bias)."""
    w = np.eye(channels).reshape(channels, channels, 1, 1)
    return ConvSpec((ConvLayer(w, np.zeros(channels)),))


def random_conv_spec(
    seed: int,
    in_channels: int,
    out_channels: int,
    hidden: int = 8,
    kernel: int = 3,
) -> ConvSpec:
    """Seeded two-layer conv chain for tests and the demo CLI."""
    rng = np.random.default_rng(seed)

    def layer(ci, co, act):
        w = rng.normal(scale=1.0 / math.sqrt(ci * kernel * kernel), size=(co, ci, kernel, kernel))
        b = rng.normal(scale=0.01, size=co)
        return ConvLayer(w, b, act)

    return ConvSpec((layer(in_channels, hidden, "relu"), layer(hidden, out_channels, "identity")))


def bev_transform(
    image_feat: np.ndarray,
    depth: np.ndarray,
    K: CameraIntrinsics,
    grid: BEVGridSpec,
    depth_spec: DepthDistributionSpec,
    modulate_conv: ConvSpec,
    fuse_conv: ConvSpec,
    reduce: str = "sum",
    confidence: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Full pipeline: lift, pool, modulate, back-project, fuse. Returns I_CV."""
    c, h, w = image_feat.shape
    if depth.shape != (h, w):
        depth = resample_nearest(np.asarray(depth, dtype=np.float64), (h, w))
    points, feats = lift(image_feat, depth, K, depth_spec, confidence=confidence)
    pooled = bev_pool(points, feats, grid, reduce=reduce)
    modded = modulate(pooled, modulate_conv)
    i_bev = back_project(modded, depth, K)
    return fuse(image_feat, i_bev, fuse_conv)
