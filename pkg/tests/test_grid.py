import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hovershoe.faults import ConfigError
from hovershoe.planner import grid as gr
from hovershoe.world import RangeScan


def test_geometry():
    g = gr.OccupancyGrid.empty(10, 6, 0.05, (1.0, -1.0))
    assert (g.width, g.height) == (10, 6)
    assert g.world_to_cell(1.0 + 0.075, -1.0 + 0.26) == (5, 1)
    assert g.cell_center(5, 1) == pytest.approx((1.075, -0.725))
    assert g.in_bounds(5, 9) and not g.in_bounds(6, 0) and not g.in_bounds(0, -1)
    with pytest.raises(ValueError):
        gr.OccupancyGrid(np.zeros((2, 2), np.int8), resolution=0.0)


def test_file_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    g = gr.OccupancyGrid(rng.integers(0, 3, (7, 9)).astype(np.int8), 0.1, (-0.5, 2.0))
    gr.save_grid(g, tmp_path / "m.txt")
    h = gr.load_grid(tmp_path / "m.txt")
    assert np.array_equal(g.data, h.data) and h.resolution == 0.1 and h.origin == (-0.5, 2.0)


def test_file_compact_rows(tmp_path):
    (tmp_path / "m.txt").write_text("# two by three\n3 2 0.05 0 0\n010\n221\n")
    g = gr.load_grid(tmp_path / "m.txt")
    assert g.data.tolist() == [[0, 1, 0], [2, 2, 1]]


@pytest.mark.parametrize(
    "text, where",
    [
        ("3 2 0.05 0\n000\n000\n", ":1"),
        ("3 2 0.05 0 0\n000\n", "m.txt"),
        ("3 2 0.05 0 0\n000\n0x0\n", "row 2"),
        ("", ":1"),
    ],
)
def test_file_errors_name_location(tmp_path, text, where):
    (tmp_path / "m.txt").write_text(text)
    with pytest.raises(ConfigError) as e:
        gr.load_grid(tmp_path / "m.txt")
    assert where in str(e.value)


def test_points_in_polygon():
    sq = [[0, 0], [1, 0], [1, 1], [0, 1]]
    pts = np.array([[0.5, 0.5], [1.5, 0.5], [-0.1, 0.2], [0.99, 0.01]])
    assert gr.points_in_polygon(pts, sq).tolist() == [True, False, False, True]


def test_rasterize():
    g = gr.rasterize_polygons(gr.OccupancyGrid.empty(20, 20, 0.1, fill=gr.FREE), [[[0.5, 0.5], [1.0, 0.5], [1.0, 1.0], [0.5, 1.0]]])
    assert np.count_nonzero(g.data == gr.OCCUPIED) == 25


@given(st.integers(-20, 20), st.integers(-20, 20), st.integers(-20, 20), st.integers(-20, 20))
def test_bresenham_connected(i0, j0, i1, j1):
    cells = gr.bresenham(i0, j0, i1, j1)
    assert cells[0] == (i0, j0) and cells[-1] == (i1, j1)
    assert len(cells) == max(abs(i1 - i0), abs(j1 - j0)) + 1
    for (a, b), (c, d) in zip(cells, cells[1:]):
        assert max(abs(a - c), abs(b - d)) == 1


def _scan(ranges, max_range=2.0, origin=(1.025, 1.025, 0.0)):
    ranges = np.asarray(ranges, dtype=float)
    angles = np.linspace(-math.pi / 2, math.pi / 2, len(ranges)) if len(ranges) > 1 else np.zeros(1)
    return RangeScan(origin, angles, ranges, max_range)


def test_max_range_scan_carves_only():
    g = gr.OccupancyGrid.empty(60, 60, 0.05)
    s = _scan(np.full(19, 2.0))
    h = gr.update_map(g, s)
    assert not np.any(h.data == gr.OCCUPIED)
    i0, j0 = g.world_to_cell(1.025, 1.025)
    traversed = set()
    for a in s.angles:
        end = g.world_to_cell(1.025 + 2.0 * math.cos(a), 1.025 + 2.0 * math.sin(a))
        traversed.update(c for c in gr.bresenham(i0, j0, *end) if g.in_bounds(*c))
    assert {tuple(c) for c in np.argwhere(h.data == gr.FREE)} == traversed


def test_single_hit_ray_trace():
    g = gr.OccupancyGrid.empty(60, 40, 0.05)
    h = gr.update_map(g, _scan([1.5]))
    occ = np.argwhere(h.data == gr.OCCUPIED)
    assert occ.tolist() == [[20, 50]]  # 1.025 + 1.5 = 2.525 -> column 50
    # every cell strictly between the sensor cell and the hit is free
    assert np.all(h.data[20, 20:50] == gr.FREE)
    assert np.count_nonzero(h.data == gr.FREE) == 30


@given(st.lists(st.floats(0.2, 2.0), min_size=1, max_size=25))
def test_update_idempotent(ranges):
    g = gr.OccupancyGrid.empty(100, 100, 0.05)
    s = _scan(ranges, origin=(2.5, 2.5, 0.3))
    once = gr.update_map(g, s)
    twice = gr.update_map(once, s)
    assert np.array_equal(once.data, twice.data)


def test_occupied_points_are_cell_centers():
    g = gr.OccupancyGrid.empty(4, 3, 0.5, (1.0, 2.0), fill=gr.FREE)
    g.data[2, 1] = gr.OCCUPIED
    assert g.occupied_points().tolist() == [[1.75, 3.25]]
