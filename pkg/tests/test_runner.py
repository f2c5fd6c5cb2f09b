import json
import time

import numpy as np
import pytest

from hovershoe.planner.grid import FREE, rasterize_polygons
from hovershoe.runner import CHANNEL_COLS, TRAJ_COLS, Mailbox, default_map, plan_once, run_scenario
from hovershoe.scenario import load_scenario

from helpers import scenario


def test_zero_scenario(tmp_path):
    res = run_scenario(load_scenario("zero"), tmp_path)
    m = res.metrics
    assert res.fault is None and m["fault"] is None
    assert m["velocity_rmse"] == 0.0 and m["yaw_rate_rmse"] == 0.0
    assert m["x_gap_max"] == 0.0 and m["samples"] == 1000


def test_output_files_roundtrip(tmp_path):
    res = run_scenario(load_scenario("zero"), tmp_path)
    head = (tmp_path / "trajectory.csv").read_text().splitlines()[0]
    assert head.split(",")[:6] == ["t", "x", "y", "heading", "v", "psi_dot"]
    data = np.loadtxt(tmp_path / "trajectory.csv", delimiter=",", skiprows=1)
    for i, c in enumerate(TRAJ_COLS):
        assert np.array_equal(data[:, i], res.trajectory[c])
    ch = np.loadtxt(tmp_path / "channels.csv", delimiter=",", skiprows=1)
    assert ch.shape == (1000, len(CHANNEL_COLS))
    assert json.loads((tmp_path / "metrics.json").read_text()) == res.metrics


def test_same_seed_identical_files(tmp_path):
    scn = load_scenario("kick_robustness")
    scn = scn.__class__(**{**scn.__dict__, "duration": 3.0})
    run_scenario(scn, tmp_path / "a")
    run_scenario(scn, tmp_path / "b")
    for f in ("trajectory.csv", "channels.csv", "metrics.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_seed_override_changes_noise():
    scn = scenario(duration=0.5, schedule=[[0.0, 0.5, 0.0]])
    a = run_scenario(scn, seed=1).trajectory["v_est"]
    b = run_scenario(scn, seed=2).trajectory["v_est"]
    assert not np.array_equal(a, b)


def test_fault_flushes_partial_logs(tmp_path):
    scn = load_scenario("x_gap").with_gains(Kp_x=200.0)
    res = run_scenario(scn, tmp_path)
    assert res.fault is not None and res.fault["kind"] in ("rider fell", "numerical divergence")
    rows = np.loadtxt(tmp_path / "trajectory.csv", delimiter=",", skiprows=1)
    assert 0 < len(rows) < scn.n_ticks
    assert rows[-1, 0] < res.fault["time"] + 1e-12
    saved = json.loads((tmp_path / "metrics.json").read_text())
    assert saved["fault"]["kind"] == res.fault["kind"]


def test_plot_data(tmp_path):
    scn = scenario(mode="autonomous-goal", duration=1.0, goal=[2.0, 0.0],
                   obstacles=[{"polygon": [[1.0, 0.6], [1.4, 0.6], [1.4, 1.0], [1.0, 1.0]]}])
    res = run_scenario(scn, tmp_path, plot_data=True)
    for f in ("plot_series.csv", "obstacles.json", "final_map.txt", "plans.csv", "last_band.csv", "compute.json"):
        assert (tmp_path / f).exists(), f
    assert len(res.plans) == 10
    series = np.loadtxt(tmp_path / "plot_series.csv", delimiter=",", skiprows=1)
    assert len(series) == 100


def test_short_autonomous_run_threaded():
    # lockstep autonomy is covered by the obstacle course acceptance run
    raw = dict(mode="autonomous-goal", duration=10.0, goal=[2.0, 0.0], planner={"stop_at_goal": 0.2},
               obstacles=[{"polygon": [[1.0, -0.3], [1.2, -0.3], [1.2, 0.05], [1.0, 0.05]]}])
    thr = run_scenario(scenario(**raw), deterministic=False)
    assert thr.fault is None and thr.metrics["goal_reached"]
    assert thr.metrics["collisions"] == 0


def test_mailbox_latest_value():
    mb = Mailbox()
    assert mb.get() is None
    mb.put(1)
    mb.put(2)
    assert mb.get() == 2


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


def test_replan_budget():
    scn = load_scenario("obstacle_course")
    g = default_map(scn)
    g = rasterize_polygons(g.__class__(np.full_like(g.data, FREE), g.resolution, g.origin),
                           [o.polygon for o in scn.obstacles if not o.low])
    plan_once(g, (0.5, 0.0, 0.0), 0.0, np.array(scn.goal), scn.planner, 0.0)  # warm the JIT
    walls = []
    for pose in route_poses(12):
        t0 = time.perf_counter()
        r = plan_once(g, pose, 0.5, np.array(scn.goal), scn.planner, 0.0)
        walls.append(time.perf_counter() - t0)
        assert r.status in ("ok", "fallback")
    # median: single cycles can be hit by scheduler noise on shared machines
    assert np.median(walls) < 0.1
