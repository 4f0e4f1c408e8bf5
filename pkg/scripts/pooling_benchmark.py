"""Compare the naive and accelerated BEV pooling backends.

Times both implementations across point-cloud sizes and verifies they agree
element-wise, then runs one full image-to-BEV transform for reference.
"""

import argparse
import time

import numpy as np

from rgbdkit import bev
from rgbdkit.core import CameraIntrinsics
from rgbdkit.geometry import BEVGridSpec


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--channels", type=int, default=8)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    grid = BEVGridSpec()
    print(f"grid {grid.n_rows}x{grid.n_cols}, {args.channels} channels")
    print(f"{'points':>9} {'naive s':>9} {'fast s':>9} {'speedup':>8} {'max diff':>10}")
    for n in (1_000, 10_000, 100_000):
        points = np.column_stack([
            rng.uniform(-4, 4, n), rng.uniform(-1, 1, n), rng.uniform(0, 8, n)
        ])
        feats = rng.standard_normal((n, args.channels))
        t0 = time.perf_counter()
        slow = bev.bev_pool_naive(points, feats, grid)
        t1 = time.perf_counter()
        fast = bev.bev_pool(points, feats, grid)
        t2 = time.perf_counter()
        diff = float(np.abs(slow.values - fast.values).max())
        print(f"{n:9d} {t1 - t0:9.3f} {t2 - t1:9.3f} {(t1 - t0) / (t2 - t1):8.1f} {diff:10.2e}")

    h, w = 48, 64
    K = CameraIntrinsics(64.0, 64.0, 32.0, 24.0, w, h)
    feat = rng.standard_normal((args.channels, h, w))
    depth = rng.uniform(0.5, 7.5, (h, w))
    modulate = bev.random_conv_spec(args.seed, args.channels, args.channels)
    fuse = bev.random_conv_spec(args.seed + 1, 2 * args.channels, args.channels)
    t0 = time.perf_counter()
    icv = bev.bev_transform(feat, depth, K, grid, bev.DepthDistributionSpec(), modulate, fuse)
    print(f"full transform {feat.shape} -> {icv.shape} in {time.perf_counter() - t0:.3f}s")


if __name__ == "__main__":
    main()
