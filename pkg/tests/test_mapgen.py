import math
from collections import deque

import numpy as np
import pytest

from omninav.core import FREE, OCCUPIED, UNKNOWN, OccupancyGrid, PointCloud, Pose2D
from omninav.mapgen import (
    MapGenConfig,
    denoise,
    extract_map,
    fill_unknown,
    height_filter,
    rasterize,
    read_map,
    read_point_cloud,
    write_map,
    write_point_cloud,
)

from conftest import random_grid


def oracle_denoise(grid, min_cluster):
    """Reference implementation: label 8-connected OCCUPIED components via
    explicit flood fill, drop the small ones."""
    out = grid.copy()
    occ = grid.cells == OCCUPIED
    h, w = occ.shape
    seen = np.zeros_like(occ, dtype=bool)
    for r in range(h):
        for c in range(w):
            if not occ[r, c] or seen[r, c]:
                continue
            comp = []
            stack = [(r, c)]
            seen[r, c] = True
            while stack:
                rr, cc = stack.pop()
                comp.append((rr, cc))
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        r2, c2 = rr + dr, cc + dc
                        if 0 <= r2 < h and 0 <= c2 < w and occ[r2, c2] and not seen[r2, c2]:
                            seen[r2, c2] = True
                            stack.append((r2, c2))
            if len(comp) < min_cluster:
                for rr, cc in comp:
                    out.cells[rr, cc] = FREE
    return out


def oracle_fill_unknown(grid):
    """Reference implementation: 4-connected flood from the border over FREE
    cells; reached cells become UNKNOWN."""
    out = grid.copy()
    free = grid.cells == FREE
    h, w = free.shape
    reach = np.zeros_like(free, dtype=bool)
    queue = deque((r, c) for r in range(h) for c in range(w)
                  if free[r, c] and (r in (0, h - 1) or c in (0, w - 1)))
    for r, c in queue:
        reach[r, c] = True
    while queue:
        r, c = queue.popleft()
        for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and free[rr, cc] and not reach[rr, cc]:
                reach[rr, cc] = True
                queue.append((rr, cc))
    out.cells[reach] = UNKNOWN
    return out


class TestHeightFilter:
    def test_band_inclusive(self):
        pc = PointCloud.from_xyz([(0, 0, 0.05), (0, 0, 1.2), (0, 0, 0.0), (0, 0, 1.21)])
        kept = height_filter(pc, 0.05, 1.2)
        assert len(kept) == 2

    def test_bad_band_rejected(self):
        with pytest.raises(ValueError):
            height_filter(PointCloud.from_xyz([(0, 0, 0)]), 1.0, 1.0)


class TestRasterize:
    def test_origin_is_bbox_min_corner(self):
        pc = PointCloud.from_xyz([(1.0, 2.0, 0.5), (3.0, 5.0, 0.5)])
        grid = rasterize(pc, 0.5)
        assert (grid.origin.x, grid.origin.y) == (1.0, 2.0)
        assert grid.width == math.floor(2.0 / 0.5) + 1
        assert grid.height == math.floor(3.0 / 0.5) + 1

    def test_points_mark_their_cells(self):
        pc = PointCloud.from_xyz([(0.0, 0.0, 0.5), (0.9, 0.9, 0.5)])
        grid = rasterize(pc, 0.3)
        assert grid.get(0, 0) == OCCUPIED
        assert grid.get(3, 3) == OCCUPIED
        assert grid.get(1, 1) == FREE

    def test_empty_cloud_rejected(self):
        with pytest.raises(ValueError):
            rasterize(PointCloud(np.zeros((0, 3))), 0.1)


class TestDenoiseOracle:
    def test_small_cluster_removed_diagonal_kept(self):
        g = OccupancyGrid(5, 5, 0.1)
        g.set(0, 0, OCCUPIED)  # singleton
        g.set(2, 2, OCCUPIED)
        g.set(3, 3, OCCUPIED)
        g.set(4, 4, OCCUPIED)  # diagonal chain of 3
        out = denoise(g, 3)
        assert out.get(0, 0) == FREE
        assert out.get(2, 2) == OCCUPIED

    def test_matches_oracle_on_random_grids(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            g = random_grid(rng)
            k = int(rng.integers(1, 6))
            assert np.array_equal(denoise(g, k).cells, oracle_denoise(g, k).cells)

    def test_min_cluster_one_is_identity(self):
        rng = np.random.default_rng(0)
        g = random_grid(rng)
        assert np.array_equal(denoise(g, 1).cells, g.cells)


class TestFillUnknownOracle:
    def test_enclosed_free_space_preserved(self):
        g = OccupancyGrid(5, 5, 0.1)
        for i in range(1, 4):
            g.set(i, 1, OCCUPIED)
            g.set(i, 3, OCCUPIED)
            g.set(1, i, OCCUPIED)
            g.set(3, i, OCCUPIED)
        out = fill_unknown(g)
        assert out.get(2, 2) == FREE  # inside the box
        assert out.get(0, 0) == UNKNOWN  # outside

    def test_diagonal_gap_leaks(self):
        # 4-connectivity: a diagonal wall does not seal the interior
        g = OccupancyGrid(3, 3, 0.1)
        g.set(0, 1, OCCUPIED)
        g.set(1, 0, OCCUPIED)
        out = fill_unknown(g)
        assert out.get(0, 0) == UNKNOWN

    def test_matches_oracle_on_random_grids(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            g = random_grid(rng)
            assert np.array_equal(fill_unknown(g).cells, oracle_fill_unknown(g).cells)


class TestExtractPipeline:
    def test_band_excluding_everything_rejected(self):
        pc = PointCloud.from_xyz([(0, 0, 5.0)])
        with pytest.raises(ValueError):
            extract_map(pc, MapGenConfig())

    def test_small_room(self):
        # square room walls plus a stray noise point and a ceiling point
        pts = []
        for t in np.linspace(0.0, 2.0, 81):
            for z in (0.3, 0.8):
                pts += [(t, 0.0, z), (t, 2.0, z), (0.0, t, z), (2.0, t, z)]
        pts.append((1.0, 1.0, 2.0))  # ceiling: height-filtered
        pts.append((1.5, 0.7, 0.5))  # lone in-band stray: denoised
        grid = extract_map(PointCloud.from_xyz(pts), MapGenConfig(resolution=0.1))
        c = grid.cells
        inside = c[c.shape[0] // 2, c.shape[1] // 2]
        assert inside == FREE
        assert np.count_nonzero(c == OCCUPIED) > 0
        # the stray cluster of one cell must be gone
        col = math.floor((1.5 - grid.origin.x) / grid.resolution)
        row = math.floor((0.7 - grid.origin.y) / grid.resolution)
        assert grid.get(col, row) == FREE


class TestMapFiles:
    def test_pgm_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        g = random_grid(rng)
        g = OccupancyGrid(g.width, g.height, 0.05, Pose2D(-1.25, 0.75, 0.0), g.cells)
        path = tmp_path / "m.pgm"
        write_map(g, path)
        back = read_map(path)
        assert np.array_equal(back.cells, g.cells)
        assert back.resolution == g.resolution
        assert (back.origin.x, back.origin.y) == (g.origin.x, g.origin.y)

    def test_pgm_byte_encoding(self, tmp_path):
        g = OccupancyGrid(2, 1, 0.05)
        g.set(0, 0, OCCUPIED)
        g.set(1, 0, UNKNOWN)
        path = tmp_path / "m.pgm"
        write_map(g, path)
        data = path.read_bytes()
        raster = data.split(b"255\n", 1)[1]
        assert raster == bytes([0, 205])

    def test_write_is_deterministic(self, tmp_path):
        rng = np.random.default_rng(9)
        g = random_grid(rng)
        write_map(g, tmp_path / "a.pgm")
        write_map(g, tmp_path / "b.pgm")
        assert (tmp_path / "a.pgm").read_bytes() == (tmp_path / "b.pgm").read_bytes()
        assert (tmp_path / "a.pgm.meta").read_text() == (tmp_path / "b.pgm.meta").read_text()

    def test_reject_non_pgm(self, tmp_path):
        p = tmp_path / "x.pgm"
        p.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
        with pytest.raises(ValueError):
            read_map(p)

    def test_reject_foreign_pixel_values(self, tmp_path):
        p = tmp_path / "x.pgm"
        p.write_bytes(b"P5\n1 1\n255\n\x7f")
        with pytest.raises(ValueError):
            read_map(p)


class TestCloudFiles:
    def test_round_trip(self, tmp_path):
        pc = PointCloud.from_xyz([(0.1, -2.5, 0.333333333333), (1e-9, 4.0, 1.2)])
        path = tmp_path / "c.xyz"
        write_point_cloud(pc, path)
        back = read_point_cloud(path)
        assert np.array_equal(back.points, pc.points)

    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / "c.xyz"
        path.write_text("# header\n\n1 2 3  # trailing\n")
        assert len(read_point_cloud(path)) == 1

    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "c.xyz"
        path.write_text("1 2 3\n1 2\n")
        with pytest.raises(ValueError, match=":2:"):
            read_point_cloud(path)
