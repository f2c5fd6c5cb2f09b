"""Occupancy grid: geometry, ASCII file format, and scan registration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..faults import ConfigError

FREE, OCCUPIED, UNKNOWN = 0, 1, 2


@dataclass(frozen=True)
class OccupancyGrid:
    """Cell (i, j) is row i (y), column j (x); its center sits at
    ``origin + ((j + 0.5) * res, (i + 0.5) * res)``."""

    data: np.ndarray  # (height, width) int8
    resolution: float = 0.05
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("resolution must be > 0")
        if self.data.ndim != 2:
            raise ValueError("grid data must be 2-D")

    @classmethod
    def empty(cls, width, height, resolution=0.05, origin=(0.0, 0.0), fill=UNKNOWN):
        return cls(np.full((height, width), fill, dtype=np.int8), resolution, tuple(origin))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def in_bounds(self, i, j) -> bool:
        return 0 <= i < self.height and 0 <= j < self.width

    def world_to_cell(self, x, y) -> tuple[int, int]:
        j = int(math.floor((x - self.origin[0]) / self.resolution))
        i = int(math.floor((y - self.origin[1]) / self.resolution))
        return i, j

    def cell_center(self, i, j) -> tuple[float, float]:
        return (
            self.origin[0] + (j + 0.5) * self.resolution,
            self.origin[1] + (i + 0.5) * self.resolution,
        )

    def occupied_points(self) -> np.ndarray:
        """World coordinates of occupied cell centers, (K, 2)."""
        i, j = np.nonzero(self.data == OCCUPIED)
        return np.column_stack(
            [self.origin[0] + (j + 0.5) * self.resolution, self.origin[1] + (i + 0.5) * self.resolution]
        )


def load_grid(path) -> OccupancyGrid:
    """ASCII format: header ``width height resolution origin_x origin_y``, then
    ``height`` rows of ``width`` digits in {0 free, 1 occupied, 2 unknown},
    separated by whitespace or not.  First row is the lowest y."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ConfigError("empty grid file", where=f"{path}:1")
    try:
        w, h, res, ox, oy = lines[0].split()
        w, h, res, ox, oy = int(w), int(h), float(res), float(ox), float(oy)
    except ValueError as e:
        raise ConfigError(f"bad header ({e})", where=f"{path}:1") from None
    rows = lines[1:]
    if len(rows) != h:
        raise ConfigError(f"expected {h} rows, found {len(rows)}", where=str(path))
    data = np.empty((h, w), dtype=np.int8)
    for i, row in enumerate(rows):
        cells = row.split() if " " in row else list(row)
        if len(cells) != w or any(c not in "012" for c in cells):
            raise ConfigError(f"row must have {w} cells from {{0,1,2}}", where=f"{path}:row {i + 1}")
        data[i] = [int(c) for c in cells]
    return OccupancyGrid(data, res, (ox, oy))


def save_grid(grid: OccupancyGrid, path) -> None:
    out = [f"{grid.width} {grid.height} {float(grid.resolution)!r} {float(grid.origin[0])!r} {float(grid.origin[1])!r}"]
    out += [" ".join(str(int(c)) for c in row) for row in grid.data]
    Path(path).write_text("\n".join(out) + "\n")


def points_in_polygon(pts: np.ndarray, poly) -> np.ndarray:
    """Even-odd rule, vectorized over points."""
    poly = np.asarray(poly, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    for (x1, y1), (x2, y2) in zip(poly, np.roll(poly, -1, axis=0)):
        if y1 == y2:
            continue
        crosses = (y1 > y) != (y2 > y)
        xi = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < xi)
    return inside


def rasterize_polygons(grid: OccupancyGrid, polygons) -> OccupancyGrid:
    """Mark cells whose center lies inside any polygon as occupied (others untouched)."""
    ii, jj = np.mgrid[0 : grid.height, 0 : grid.width]
    pts = np.column_stack(
        [grid.origin[0] + (jj.ravel() + 0.5) * grid.resolution, grid.origin[1] + (ii.ravel() + 0.5) * grid.resolution]
    )
    data = grid.data.copy().ravel()
    for poly in polygons:
        data[points_in_polygon(pts, poly)] = OCCUPIED
    return replace(grid, data=data.reshape(grid.data.shape))


def bresenham(i0, j0, i1, j1):
    """Integer cells on the segment from (i0, j0) to (i1, j1), inclusive."""
    cells = []
    di, dj = abs(i1 - i0), abs(j1 - j0)
    si = 1 if i1 > i0 else -1
    sj = 1 if j1 > j0 else -1
    err = dj - di
    i, j = i0, j0
    while True:
        cells.append((i, j))
        if i == i1 and j == j1:
            return cells
        e2 = 2 * err
        if e2 > -di:
            err -= di
            j += sj
        if e2 < dj:
            err += dj
            i += si


def update_map(grid: OccupancyGrid, scan, sensor_pose=None) -> OccupancyGrid:
    """Register a range scan: carve free space along every beam, then mark hit
    cells occupied.  Occupied cells are never cleared, which makes repeated
    registration of the same scan a no-op."""
    x, y, th = scan.origin if sensor_pose is None else sensor_pose
    data = grid.data.copy()
    i0, j0 = grid.world_to_cell(x, y)
    ends = []
    for a, r in zip(scan.angles, scan.ranges):
        hit = r < scan.max_range
        ex = x + r * math.cos(th + a)
        ey = y + r * math.sin(th + a)
        ends.append((grid.world_to_cell(ex, ey), hit))

    for (i1, j1), hit in ends:
        ray = bresenham(i0, j0, i1, j1)
        if hit:
            ray = ray[:-1]
        for i, j in ray:
            if 0 <= i < grid.height and 0 <= j < grid.width and data[i, j] != OCCUPIED:
                data[i, j] = FREE
    for (i1, j1), hit in ends:
        if hit and 0 <= i1 < grid.height and 0 <= j1 < grid.width:
            data[i1, j1] = OCCUPIED
    return replace(grid, data=data)
