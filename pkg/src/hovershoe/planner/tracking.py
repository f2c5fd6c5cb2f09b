"""Turning a timed band into controller set-points."""
from __future__ import annotations

import numpy as np

from ..control import PSI_DOT_LIMIT, V_LIMIT
from .teb import TimedTrajectory

PLANNER_PERIOD = 0.1
STALE_PERIODS = 3


def plan_to_setpoints(
    traj: TimedTrajectory | None,
    pose=None,
    now: float | None = None,
    period: float = PLANNER_PERIOD,
) -> tuple[float, float]:
    """(v_d, psi_dot_d) of the first band segment, clamped to set-point limits.

    No usable band (absent or empty) yields (0, 0), as does a band stamped
    more than three planner periods before ``now``.  ``pose`` is accepted for interface
    symmetry; the band already starts at the pose it was planned from.
    """
    if traj is None or len(traj.dts) == 0:
        return 0.0, 0.0
    if now is not None and now - traj.stamp > STALE_PERIODS * period + 1e-9:
        return 0.0, 0.0
    v = float(traj.arc_lengths()[0] / traj.dts[0])
    w = float(traj.turns()[0] / traj.dts[0])
    return max(-V_LIMIT, min(V_LIMIT, v)), max(-PSI_DOT_LIMIT, min(PSI_DOT_LIMIT, w))


def read_trajectory_csv(path) -> np.ndarray:
    """Rows of t,x,y,heading,v,psi_dot as a structured array."""
    return np.genfromtxt(path, delimiter=",", names=True)


def path_cells_to_world(cells, costmap) -> np.ndarray:
    return np.array([costmap.cell_center(i, j) for i, j in cells], dtype=float)


def nearest_index(path_xy: np.ndarray, pose) -> int:
    """Index of the path point closest to ``pose``."""
    d = np.hypot(path_xy[:, 0] - pose[0], path_xy[:, 1] - pose[1])
    return int(np.argmin(d))
