import numpy as np
import pytest
from pytest import approx

from rgbdkit.core import CameraIntrinsics
from rgbdkit.geometry import (
    BEVGridSpec,
    Point3,
    bev_cell_of,
    bev_cells_of,
    project,
    unproject,
)

K = CameraIntrinsics(fx=100.0, fy=100.0, cx=32.0, cy=24.0, width=64, height=48)


def test_unproject_principal_point():
    p = unproject((K.cx, K.cy), 3.0, K)
    assert (p.x, p.y, p.z) == (0.0, 0.0, 3.0)


def test_unproject_formula():
    k = CameraIntrinsics(fx=100.0, fy=100.0, cx=0.0, cy=0.0, width=100, height=100)
    p = unproject((50.0, 0.0), 2.0, k)
    assert (p.x, p.y, p.z) == approx((1.0, 0.0, 2.0))


def test_project_formula():
    k = CameraIntrinsics(fx=100.0, fy=100.0, cx=0.0, cy=0.0, width=100, height=100)
    assert project(Point3(1.0, 0.0, 2.0), k) == approx((50.0, 0.0))
    assert project(Point3(0.0, 0.0, 5.0), K) == approx((K.cx, K.cy))


def test_unproject_rejects_nonpositive_depth():
    with pytest.raises(ValueError):
        unproject((0, 0), 0.0, K)
    with pytest.raises(ValueError):
        project(Point3(0, 0, -1.0), K)


def test_round_trip_seeded_points():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        i = rng.uniform(0, K.width)
        j = rng.uniform(0, K.height)
        d = rng.uniform(0.1, 10.0)
        p = unproject((i, j), d, K)
        i2, j2 = project(p, K)
        assert abs(i2 - i) <= 1e-9 * max(1.0, abs(i))
        assert abs(j2 - j) <= 1e-9 * max(1.0, abs(j))
        p2 = unproject(project(p, K), p.z, K)
        assert (p2.x, p2.y, p2.z) == approx((p.x, p.y, p.z), rel=1e-9)


GRID = BEVGridSpec(x_range=(-2.0, 2.0), z_range=(0.0, 4.0), cell=1.0)


def test_bev_cell_origin():
    assert bev_cell_of(Point3(-2.0, 0.7, 0.0), GRID) == (0, 0)


def test_bev_cell_outside():
    assert bev_cell_of(Point3(0.0, 0.0, 4.0), GRID) is None
    assert bev_cell_of(Point3(-2.5, 0.0, 1.0), GRID) is None


def test_bev_cell_floor_arithmetic():
    assert bev_cell_of(Point3(0.5, 123.0, 2.5), GRID) == (2, 2)


def test_bev_cell_y_invariance():
    rng = np.random.default_rng(7)
    for _ in range(200):
        x = rng.uniform(-2, 2)
        z = rng.uniform(0, 4)
        cells = {bev_cell_of(Point3(x, y, z), GRID) for y in (-5.0, 0.0, 2.0, 9.0)}
        assert len(cells) == 1


def test_bev_cell_centers_map_to_own_cell():
    for k in range(GRID.n_rows):
        for l in range(GRID.n_cols):
            cz = GRID.z_range[0] + (k + 0.5) * GRID.cell
            cx = GRID.x_range[0] + (l + 0.5) * GRID.cell
            assert bev_cell_of(Point3(cx, 0.0, cz), GRID) == (k, l)
            # anywhere within half a cell of the center stays in the cell
            assert bev_cell_of(Point3(cx + 0.49, 0.0, cz - 0.49), GRID) == (k, l)


def test_vectorized_cells_match_scalar():
    rng = np.random.default_rng(11)
    pts = np.column_stack(
        [rng.uniform(-3, 3, 500), rng.uniform(-1, 1, 500), rng.uniform(-1, 5, 500)]
    )
    inside, cells = bev_cells_of(pts, GRID)
    for n in range(500):
        scalar = bev_cell_of(Point3(*pts[n]), GRID)
        assert inside[n] == (scalar is not None)
        if scalar is not None:
            assert cells[n] == scalar[0] * GRID.n_cols + scalar[1]


def test_grid_dims():
    g = BEVGridSpec(x_range=(-4.0, 4.0), z_range=(0.0, 8.0), cell=0.125)
    assert (g.n_rows, g.n_cols) == (64, 64)
