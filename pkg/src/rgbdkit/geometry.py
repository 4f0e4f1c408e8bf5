"""Pinhole projection and the image/BEV coordinate bridge.

Camera convention: x right, y down, z forward. The BEV plane is (x, z) with
the vertical axis y collapsed (pillar format); grid rows index z, columns x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core import CameraIntrinsics


@dataclass(frozen=True)
class Point3:
    """3D point in camera coordinates, meters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError("point components must be finite")


@dataclass(frozen=True)
class BEVGridSpec:
    """Top-down grid over camera-space (x, z).

    Cells are half-open ([edge, edge + cell)); boundary points belong to the
    lower-index cell.
    """

    x_range: Tuple[float, float] = (-4.0, 4.0)
    z_range: Tuple[float, float] = (0.0, 8.0)
    cell: float = 0.125

    def __post_init__(self):
        if self.cell <= 0:
            raise ValueError("cell size must be positive")
        if self.x_range[1] <= self.x_range[0] or self.z_range[1] <= self.z_range[0]:
            raise ValueError("grid ranges must be nonempty")

    @property
    def n_rows(self) -> int:
        """H_B: number of z cells."""
        return math.ceil((self.z_range[1] - self.z_range[0]) / self.cell)

    @property
    def n_cols(self) -> int:
        """W_B: number of x cells."""
        return math.ceil((self.x_range[1] - self.x_range[0]) / self.cell)


def unproject(pixel: Tuple[float, float], depth: float, K: CameraIntrinsics) -> Point3:
    """Lift an image pixel (i, j) = (column, row) at a given depth to 3D."""
    if not (depth > 0):
        raise ValueError(f"depth must be positive, got {depth}")
    i, j = pixel
    return Point3((i - K.cx) * depth / K.fx, (j - K.cy) * depth / K.fy, depth)


def project(p: Point3, K: CameraIntrinsics) -> Tuple[float, float]:
    """Project a 3D camera-space point to continuous pixel coordinates."""
    if not (p.z > 0):
        raise ValueError(f"point must be in front of the camera, got z={p.z}")
    return (K.fx * p.x / p.z + K.cx, K.fy * p.y / p.z + K.cy)


def bev_cell_of(p: Point3, grid: BEVGridSpec) -> Optional[Tuple[int, int]]:
    """Grid cell (k, l) = (z index, x index) of a point; None when outside.

    y is ignored (pillar format).
    """
    if not (grid.x_range[0] <= p.x < grid.x_range[1]):
        return None
    if not (grid.z_range[0] <= p.z < grid.z_range[1]):
        return None
    k = int(math.floor((p.z - grid.z_range[0]) / grid.cell))
    l = int(math.floor((p.x - grid.x_range[0]) / grid.cell))
    # floor of an in-range point can touch the upper edge through rounding
    return (min(k, grid.n_rows - 1), min(l, grid.n_cols - 1))


def unproject_grid(depth: np.ndarray, K: CameraIntrinsics) -> np.ndarray:
    """Vectorized unprojection of a full depth image.

    Returns an (H, W, 3) array of camera-space coordinates; rows with invalid
    depth still get coordinates (z <= 0), callers mask them out.
    """
    depth = np.asarray(depth, dtype=np.float64)
    h, w = depth.shape
    jj, ii = np.mgrid[0:h, 0:w]
    x = (ii - K.cx) * depth / K.fx
    y = (jj - K.cy) * depth / K.fy
    return np.stack([x, y, depth], axis=-1)


def bev_cells_of(points: np.ndarray, grid: BEVGridSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized bev_cell_of over an (N, 3) point array.

    Returns (inside mask, flat cell ids k * W_B + l); ids are only meaningful
    where the mask is True.
    """
    x = points[:, 0]
    z = points[:, 2]
    inside = (
        (x >= grid.x_range[0])
        & (x < grid.x_range[1])
        & (z >= grid.z_range[0])
        & (z < grid.z_range[1])
    )
    k = np.floor((z - grid.z_range[0]) / grid.cell).astype(np.int64)
    l = np.floor((x - grid.x_range[0]) / grid.cell).astype(np.int64)
    np.clip(k, 0, grid.n_rows - 1, out=k)
    np.clip(l, 0, grid.n_cols - 1, out=l)
    return inside, k * grid.n_cols + l
