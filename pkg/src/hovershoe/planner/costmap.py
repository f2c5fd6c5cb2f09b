"""Inflated planning cost from an occupancy grid."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import OCCUPIED, OccupancyGrid

LETHAL = 255.0
INSCRIBED = 254.0


@dataclass(frozen=True)
class Costmap:
    cost: np.ndarray  # (height, width) float in [0, 255]
    resolution: float
    origin: tuple[float, float]
    inflation_radius: float
    decay: float
    robot_radius: float
    distance: np.ndarray  # metres from each cell center to the nearest occupied cell center

    @property
    def width(self) -> int:
        return self.cost.shape[1]

    @property
    def height(self) -> int:
        return self.cost.shape[0]

    def world_to_cell(self, x, y):
        return int(np.floor((y - self.origin[1]) / self.resolution)), int(
            np.floor((x - self.origin[0]) / self.resolution)
        )

    def cell_center(self, i, j):
        return (
            self.origin[0] + (j + 0.5) * self.resolution,
            self.origin[1] + (i + 0.5) * self.resolution,
        )


def cost_from_distance(d, robot_radius, inflation_radius, decay):
    """Exponential falloff: 254 inside the robot radius, ``254 exp(-decay (d - r))``
    out to the inflation radius, 0 beyond.  ``d == 0`` is an obstacle cell."""
    d = np.asarray(d, dtype=float)
    c = np.where(
        d <= inflation_radius,
        np.minimum(INSCRIBED, INSCRIBED * np.exp(-decay * (d - robot_radius))),
        0.0,
    )
    c = np.where(d <= robot_radius, INSCRIBED, c)
    c = np.where(d == 0.0, LETHAL, c)
    return c


def build_costmap(
    grid: OccupancyGrid,
    inflation_radius: float = 1.0,
    decay: float = 10.0,
    robot_radius: float = 0.3,
) -> Costmap:
    """Unknown cells are planned through as free."""
    occ = grid.data == OCCUPIED
    if occ.any():
        dist = ndimage.distance_transform_edt(~occ) * grid.resolution
    else:
        dist = np.full(occ.shape, np.inf)
    cost = cost_from_distance(dist, robot_radius, inflation_radius, decay)
    return Costmap(cost, grid.resolution, grid.origin, inflation_radius, decay, robot_radius, dist)
