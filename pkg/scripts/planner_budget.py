"""Wall-clock cost of one planning cycle (costmap, Dijkstra, band) on the
obstacle course map, fully known, sampled along a route through the gaps.

    python scripts/planner_budget.py [--samples 50]
"""
import argparse
import time

import numpy as np

from hovershoe.planner.grid import FREE, OccupancyGrid, rasterize_polygons
from hovershoe.runner import default_map, plan_once
from hovershoe.scenario import load_scenario


# a collision-free route through the three gaps
ROUTE = np.array([[0.5, 0.0], [3.3, 0.5], [4.8, 0.0], [6.3, -0.5], [7.5, 0.0], [8.85, 0.45], [10.5, 0.0]])


def route_poses(n):
    seg = np.diff(ROUTE, axis=0)
    s = np.concatenate([[0], np.cumsum(np.hypot(*seg.T))])
    out = []
    for q in np.linspace(0, s[-1], n):
        i = min(np.searchsorted(s, q, side="right") - 1, len(seg) - 1)
        p = ROUTE[i] + seg[i] * (q - s[i]) / (s[i + 1] - s[i])
        out.append((p[0], p[1], float(np.arctan2(seg[i, 1], seg[i, 0]))))
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=50)
    a = ap.parse_args()
    scn = load_scenario("obstacle_course")
    g = default_map(scn)
    g = rasterize_polygons(OccupancyGrid(np.full_like(g.data, FREE), g.resolution, g.origin),
                           [o.polygon for o in scn.obstacles if not o.low])
    goal = np.array(scn.goal)
    plan_once(g, (0.5, 0.0, 0.0), 0.0, goal, scn.planner, 0.0)  # compile
    walls, status = [], {}
    for pose in route_poses(a.samples):
        t0 = time.perf_counter()
        r = plan_once(g, pose, 0.5, goal, scn.planner, 0.0)
        walls.append(time.perf_counter() - t0)
        status[r.status] = status.get(r.status, 0) + 1
    w = np.array(walls) * 1e3
    print(f"grid {g.width}x{g.height} @ {g.resolution} m, {a.samples} cycles, status {status}")
    print(f"wall ms: mean {w.mean():.1f}  p50 {np.median(w):.1f}  p95 {np.percentile(w, 95):.1f}  max {w.max():.1f}")


if __name__ == "__main__":
    main()
