"""Scenario execution in simulated time.

The control loop runs at ``1/dt`` (1 kHz by default).  In autonomous mode the
planner is triggered every ``planner.period_ticks`` ticks.  Deterministic runs
call it synchronously so its result is available on the triggering tick.
Otherwise it runs on a worker thread and hands results back through a
latest-value mailbox that the control loop polls without blocking.
"""
from __future__ import annotations

import json
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .control import Controller, Setpoints
from .faults import NoFeasibleTrajectory, SimulationFault, Unreachable
from .loop import control_tick
from .metrics import compute_metrics
from .planner.costmap import INSCRIBED, LETHAL, build_costmap
from .planner.dijkstra import dijkstra_plan
from .planner.grid import UNKNOWN, OccupancyGrid, save_grid, update_map
from .planner.teb import PlannerLimits, TimedTrajectory, teb_optimize
from .planner.tracking import path_cells_to_world, plan_to_setpoints
from .scenario import Scenario
from .world import Estimator, make_world, platform_inputs, simulate_scan

TRAJ_COLS = (
    "t", "x", "y", "heading", "v", "psi_dot",
    "v_d", "psi_dot_d", "v_est", "psi_dot_est",
    "x_gap", "half_width", "y_offset", "com_x", "com_y",
    "foot_l_x", "foot_l_y", "foot_r_x", "foot_r_y",
)
CHANNEL_COLS = (
    "t", "u5_l", "u5_r", "u2_l", "u2_r", "u5_dtoe", "u2_y_l", "u2_y_r", "u2_turn", "u5_turn",
    "com_des_x", "com_des_y", "theta_l", "theta_r", "q7_l", "q7_r", "q2_l", "q2_r",
    "u_theta_l", "u_theta_r", "u_psi_l", "u_psi_r",
)


# ---------------------------------------------------------------- planning


@dataclass
class PlanResult:
    stamp: float
    traj: TimedTrajectory | None
    status: str  # ok | fallback | unreachable | infeasible | at-goal
    path_xy: np.ndarray | None = None
    wall_time: float = 0.0


def plan_once(grid: OccupancyGrid, pose, speed, goal, cfg, stamp: float) -> PlanResult:
    """One global + local planning cycle.  Pure in its arguments."""
    t0 = time.perf_counter()
    x, y, th = pose
    if math.hypot(goal[0] - x, goal[1] - y) <= cfg.goal_tolerance:
        return PlanResult(stamp, None, "at-goal", wall_time=time.perf_counter() - t0)
    cm = build_costmap(grid, cfg.inflation_radius, cfg.decay, cfg.robot_radius)
    start = cm.world_to_cell(x, y)
    goal_cell = cm.world_to_cell(goal[0], goal[1])
    # the robot may already sit inside the inscribed band; let it climb out
    blocked = LETHAL if cm.cost[start] >= INSCRIBED else INSCRIBED
    try:
        cells, _ = dijkstra_plan(cm, start, goal_cell, blocked=blocked)
    except Unreachable:
        return PlanResult(stamp, None, "unreachable", wall_time=time.perf_counter() - t0)
    path = path_cells_to_world(cells, cm)
    path[-1] = goal[:2]
    path = path[1:] if len(path) > 1 else path
    limits = PlannerLimits(
        v_max=cfg.v_max,
        a_max=cfg.a_max,
        psi_dot_max=cfg.psi_dot_max,
        lookahead=cfg.lookahead,
        clearance_margin=cfg.clearance_margin,
        robot_radius=cfg.robot_radius,
    )
    remaining = float(np.hypot(*np.diff(np.vstack([[x, y], path]), axis=0).T).sum())
    goal_pose = tuple(goal) if remaining <= cfg.lookahead else None
    try:
        traj = teb_optimize(path, limits, cm, (x, y, th, speed), goal_pose, stamp=stamp)
    except NoFeasibleTrajectory:
        return PlanResult(stamp, None, "infeasible", path, time.perf_counter() - t0)
    status = "fallback" if traj.fallback else "ok"
    return PlanResult(stamp, traj, status, path, time.perf_counter() - t0)


class Mailbox:
    """Single-writer latest-value slot."""

    def __init__(self):
        self._lock = threading.Lock()
        self._value = None

    def put(self, value):
        with self._lock:
            self._value = value

    def get(self):
        with self._lock:
            return self._value


def default_map(scn: Scenario) -> OccupancyGrid:
    cfg = scn.planner
    if cfg.map_origin is not None and cfg.map_size is not None:
        origin, size = cfg.map_origin, cfg.map_size
    else:
        pts = [np.array([[scn.initial.get("x", 0.0), scn.initial.get("y", 0.0)], scn.goal[:2]])]
        pts += [o.polygon for o in scn.obstacles if not o.low]
        pts = np.vstack(pts)
        lo, hi = pts.min(axis=0) - 2.0, pts.max(axis=0) + 2.0
        origin, size = tuple(lo), tuple(hi - lo)
    w = int(math.ceil(size[0] / cfg.resolution))
    h = int(math.ceil(size[1] / cfg.resolution))
    return OccupancyGrid.empty(w, h, cfg.resolution, tuple(float(o) for o in origin), fill=UNKNOWN)


class Autonomy:
    """Mapping + planning front end; produces (v_d, psi_dot_d) each tick."""

    def __init__(self, scn: Scenario, deterministic: bool):
        self.scn = scn
        self.cfg = scn.planner
        self.grid = default_map(scn)
        self.goal = np.asarray(scn.goal, dtype=float)
        self.deterministic = deterministic
        self.mailbox = Mailbox()
        self.pool = None if deterministic else ThreadPoolExecutor(max_workers=1)
        self.pending = None
        self.log: list[PlanResult] = []
        self.goal_time: float | None = None
        self.period = self.cfg.period_ticks * scn.dt

    def close(self):
        if self.pool is not None:
            self.pool.shutdown(wait=True)

    def _deliver(self, fut):
        res = fut.result()
        self.log.append(res)
        self.mailbox.put(res)

    def tick(self, k: int, w, od) -> tuple[float, float]:
        t = w.t
        mx, my = w.midpoint()
        if self.goal_time is None and math.hypot(self.goal[0] - mx, self.goal[1] - my) <= self.cfg.goal_tolerance:
            self.goal_time = t
        if self.goal_time is not None:
            return 0.0, 0.0
        if k % self.cfg.period_ticks == 0:
            scan = simulate_scan(
                w, w.pose(), n=self.cfg.scan_beams, max_range=self.cfg.scan_range, fov=self.cfg.scan_fov
            )
            # register with the estimated pose: the map inherits odometry error
            self.grid = update_map(self.grid, scan, sensor_pose=od.pose)
            args = (self.grid, od.pose, od.v_est, self.goal, self.cfg, t)
            if self.pool is None:
                res = plan_once(*args)
                self.log.append(res)
                self.mailbox.put(res)
            elif self.pending is None or self.pending.done():
                self.pending = self.pool.submit(plan_once, *args)
                self.pending.add_done_callback(self._deliver)
        res = self.mailbox.get()
        if res is None:
            return 0.0, 0.0
        return plan_to_setpoints(res.traj, od.pose, now=t, period=self.period)


# ---------------------------------------------------------------- running


@dataclass
class RunResult:
    scenario: Scenario
    metrics: dict
    trajectory: dict
    channels: dict
    fault: dict | None
    out_dir: Path | None = None
    plans: list = field(default_factory=list)
    compute: dict = field(default_factory=dict)
    grid: OccupancyGrid | None = None

    @property
    def ok(self) -> bool:
        return self.fault is None


def _write_csv(path: Path, cols, rows: np.ndarray):
    # %.17g round-trips every double exactly
    np.savetxt(path, rows.reshape(-1, len(cols)), delimiter=",", header=",".join(cols), comments="", fmt="%.17g")


def run_scenario(
    scn: Scenario,
    out_dir=None,
    deterministic: bool = True,
    plot_data: bool = False,
    seed: int | None = None,
) -> RunResult:
    if seed is not None:
        scn = replace(scn, seed=int(seed))
    ini = scn.initial
    w = make_world(
        x=ini.get("x", 0.0),
        y=ini.get("y", 0.0),
        heading=ini.get("heading", 0.0),
        speed=ini.get("speed", 0.0),
        x_gap=ini.get("x_gap", 0.0),
        platform_params=scn.platform,
        rider_params=scn.rider,
        obstacles=[o.polygon for o in scn.obstacles if not o.low],
        disturbances=scn.disturbances,
        dt=scn.dt,
        seed=scn.seed,
    )
    est = Estimator(scn.noise, scn.seed, scn.dt, ground_truth=scn.ground_truth)
    ctl = Controller(scn.gains, scn.rider.L, scn.platform.u_max)
    auto = Autonomy(scn, deterministic) if scn.mode == "autonomous-goal" else None

    n = scn.n_ticks
    traj = np.empty((n, len(TRAJ_COLS)))
    chan = np.empty((n, len(CHANNEL_COLS)))
    fault = None
    rows = 0
    try:
        for k in range(n):
            t = w.t
            od = est(w)
            if auto is not None:
                v_d, w_d = auto.tick(k, w, od)
                y_off = scn.y_offset
                if auto.goal_time is not None and scn.planner.stop_at_goal >= 0 and t - auto.goal_time >= scn.planner.stop_at_goal:
                    break
            else:
                v_d, w_d, y_off = scn.setpoint_at(t)
            sp = Setpoints(v_d, w_d, y_off)
            (xl, yl), (xr, yr) = w.feet()
            mx, my = w.midpoint()
            traj[k] = (
                t, mx, my, w.rider.phi, w.speed(), w.rider.phi_dot,
                v_d, w_d, od.v_est, od.psi_dot_est,
                xl - xr, 0.5 * (yl - yr), y_off, w.rider.com[0], w.rider.com[1],
                w.left.x, w.left.y, w.right.x, w.right.y,
            )
            w_next, out = control_tick(w, ctl, sp, od)
            c = out.command
            ul, ur = platform_inputs(w, c)
            chan[k] = (
                t, c.left.u5, c.right.u5, c.left.u2, c.right.u2, out.u5_dtoe, out.u2_y[0], out.u2_y[1],
                out.u2_turn, out.u5_turn, c.com_des[0], c.com_des[1], w.left.theta, w.right.theta,
                w.rider.toe_pitch[0], w.rider.toe_pitch[1],
                math.remainder(w.left.psi - w.rider.phi, math.tau), math.remainder(w.right.psi - w.rider.phi, math.tau),
                ul.u_theta, ur.u_theta, ul.u_psi, ur.u_psi,
            )
            rows = k + 1
            w = w_next
    except SimulationFault as e:
        fault = {"kind": e.kind, "message": str(e), "time": w.t}
    finally:
        if auto is not None:
            auto.close()

    traj = traj[:rows]
    chan = chan[:rows]
    tcols = {c: traj[:, i] for i, c in enumerate(TRAJ_COLS)}
    ccols = {c: chan[:, i] for i, c in enumerate(CHANNEL_COLS)}
    goal_info = None
    compute = {}
    plans = []
    if auto is not None:
        plans = sorted(auto.log, key=lambda r: r.stamp)
        goal_info = {
            "goal_reached": auto.goal_time is not None,
            "goal_time": auto.goal_time,
            "planner_cycles": len(plans),
            "planner_status": {s: sum(p.status == s for p in plans) for s in sorted({p.status for p in plans})},
        }
        if plans:
            wt = np.array([p.wall_time for p in plans])
            compute = {"planner_wall_mean_s": float(wt.mean()), "planner_wall_max_s": float(wt.max()),
                       "planner_wall_p95_s": float(np.percentile(wt, 95))}
    metrics = compute_metrics(tcols, scn, fault, goal_info)
    res = RunResult(scn, metrics, tcols, ccols, fault, None, plans, compute, auto.grid if auto else None)
    if out_dir is not None:
        res.out_dir = write_outputs(res, Path(out_dir), plot_data)
    return res


def write_outputs(res: RunResult, out: Path, plot_data: bool = False) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    o = res.scenario.outputs
    _write_csv(out / o.trajectory, TRAJ_COLS, np.column_stack([res.trajectory[c] for c in TRAJ_COLS]) if len(res.trajectory["t"]) else np.zeros((0, len(TRAJ_COLS))))
    _write_csv(out / o.channels, CHANNEL_COLS, np.column_stack([res.channels[c] for c in CHANNEL_COLS]) if len(res.channels["t"]) else np.zeros((0, len(CHANNEL_COLS))))
    (out / o.metrics).write_text(json.dumps(res.metrics, indent=2, sort_keys=True) + "\n")
    if res.compute:
        (out / "compute.json").write_text(json.dumps(res.compute, indent=2, sort_keys=True) + "\n")
    if plot_data:
        write_plot_data(res, out)
    return out


def write_plot_data(res: RunResult, out: Path):
    """Decimated series plus planner artefacts, for external plotting."""
    t = res.trajectory["t"]
    step = max(1, int(round(0.01 / res.scenario.dt)))
    cols = ("t", "x", "y", "heading", "v", "v_d", "psi_dot", "psi_dot_d", "x_gap", "half_width", "y_offset")
    if len(t):
        _write_csv(out / "plot_series.csv", cols, np.column_stack([res.trajectory[c][::step] for c in cols]))
    obs = [{"polygon": o.polygon.tolist(), "low": o.low} for o in res.scenario.obstacles]
    (out / "obstacles.json").write_text(json.dumps(obs) + "\n")
    if res.grid is not None:
        save_grid(res.grid, out / "final_map.txt")
    if res.plans:
        lines = ["stamp,status,v_d,psi_dot_d,band_time,band_poses"]
        for p in res.plans:
            v, wd = plan_to_setpoints(p.traj)
            tt = p.traj.total_time if p.traj is not None else 0.0
            npose = len(p.traj.poses) if p.traj is not None else 0
            lines.append(f"{float(p.stamp)!r},{p.status},{float(v)!r},{float(wd)!r},{float(tt)!r},{npose}")
        (out / "plans.csv").write_text("\n".join(lines) + "\n")
        last = next((p for p in reversed(res.plans) if p.traj is not None), None)
        if last is not None:
            last.traj.to_csv(out / "last_band.csv")
