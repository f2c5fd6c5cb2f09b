import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hovershoe.planner import costmap as cmod
from hovershoe.planner.grid import FREE, OCCUPIED, UNKNOWN, OccupancyGrid


def brute_distance(occ, res):
    pts = np.argwhere(occ)
    ii, jj = np.indices(occ.shape)
    d = np.full(occ.shape, np.inf)
    for i, j in pts:
        d = np.minimum(d, np.hypot(ii - i, jj - j))
    return d * res


def grid_from(data, res=0.05):
    return OccupancyGrid(np.asarray(data, dtype=np.int8), res)


def test_empty_grid_zero_cost():
    c = cmod.build_costmap(OccupancyGrid.empty(30, 20, fill=FREE))
    assert np.all(c.cost == 0.0)


def test_unknown_is_free():
    c = cmod.build_costmap(OccupancyGrid.empty(30, 20, fill=UNKNOWN))
    assert np.all(c.cost == 0.0)


def test_single_cell_formula():
    data = np.zeros((41, 41), np.int8)
    data[20, 20] = OCCUPIED
    c = cmod.build_costmap(grid_from(data), inflation_radius=1.0, decay=10.0, robot_radius=0.05)
    assert c.cost[20, 20] == 255.0
    assert c.cost[20, 22] == pytest.approx(254 * math.exp(-10 * (0.1 - 0.05)), rel=1e-12)
    assert c.cost[20, 21] == 254.0  # 0.05 m: inside the robot radius
    assert c.cost[20, 40] == pytest.approx(254 * math.exp(-10 * (1.0 - 0.05)))


def test_beyond_inflation_is_zero():
    data = np.zeros((5, 60), np.int8)
    data[2, 0] = OCCUPIED
    c = cmod.build_costmap(grid_from(data), inflation_radius=1.0)
    assert np.all(c.cost[2, 21:] == 0.0)


@given(st.integers(0, 2**32 - 1), st.floats(0.02, 0.3))
def test_edt_matches_brute_force(seed, density):
    rng = np.random.default_rng(seed)
    occ = rng.random((15, 17)) < density
    if not occ.any():
        occ[0, 0] = True
    data = np.where(occ, OCCUPIED, FREE)
    c = cmod.build_costmap(grid_from(data), inflation_radius=0.5, decay=5.0, robot_radius=0.1)
    np.testing.assert_allclose(c.distance, brute_distance(occ, 0.05), rtol=0, atol=1e-12)
    np.testing.assert_allclose(c.cost, cmod.cost_from_distance(brute_distance(occ, 0.05), 0.1, 0.5, 5.0), atol=1e-9)


@given(st.lists(st.floats(0, 2), min_size=2, max_size=30), st.floats(0.0, 0.5), st.floats(0.5, 2), st.floats(0.5, 20))
def test_cost_non_increasing_with_distance(ds, r, infl, decay):
    d = np.sort(np.array(ds))
    c = cmod.cost_from_distance(d, r, infl, decay)
    assert np.all(np.diff(c) <= 0)
    assert np.all((c >= 0) & (c <= 255))


def test_two_walls_centerline_is_cheapest():
    data = np.zeros((10, 41), np.int8)
    data[:, 0] = OCCUPIED
    data[:, 40] = OCCUPIED
    c = cmod.build_costmap(grid_from(data), inflation_radius=2.0, decay=4.0, robot_radius=0.3)
    col = c.cost[5]
    assert int(np.argmin(col)) == 20
    # brute-force scan: symmetric about the centre column
    assert np.array_equal(col, col[::-1])
