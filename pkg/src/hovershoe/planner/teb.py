"""Timed elastic band local planner.

The band is a chain of poses joined by circular arcs.  Each segment ``j`` is
described by its chord length ``l_j``, heading change ``dth_j`` and duration
``dt_j``; pose ``j+1`` sits at ``p_j + l_j * u(th_j + dth_j / 2)`` with heading
``th_j + dth_j``.  Because the chord always bisects the two headings, the
pose-pair arc-consistency (no-slip) residual is zero by construction instead
of being a soft penalty.

The objective adds total time, a soft goal attraction, hinge penalties on
speed, turn rate, acceleration and obstacle clearance, and a reverse-motion
penalty.  It is minimised with L-BFGS-B on an analytic gradient.  Afterwards
the durations are stretched (never shrunk) until speed, turn-rate and
acceleration limits hold exactly; the result is then hard-checked.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from ..faults import NoFeasibleTrajectory
from .costmap import LETHAL

RESIDUAL_TOL = 1e-6
_LIMIT_TOL = 1e-9


@dataclass(frozen=True)
class PlannerLimits:
    v_max: float = 0.8
    v_min: float = 0.0
    a_max: float = 1.0
    psi_dot_max: float = 1.0
    lookahead: float = 1.75
    clearance_margin: float = 0.1
    robot_radius: float = 0.3

    def __post_init__(self):
        if not (self.v_max > 0 and self.a_max > 0 and self.psi_dot_max > 0 and self.lookahead > 0):
            raise ValueError("PlannerLimits must be positive")
        if self.v_min < 0 or self.clearance_margin < 0:
            raise ValueError("v_min and clearance_margin must be >= 0")


@dataclass(frozen=True)
class TebWeights:
    time: float = 1.0
    goal: float = 50.0
    goal_heading: float = 2.0
    velocity: float = 200.0
    turn_rate: float = 100.0
    accel: float = 20.0
    obstacle: float = 500.0
    reverse: float = 500.0
    smooth: float = 0.05
    # extra clearance the optimiser aims for beyond the hard margin
    obstacle_buffer: float = 0.1


@dataclass(frozen=True)
class TebConfig:
    step: float = 0.15  # reference segment length, m
    max_poses: int = 40
    max_iter: int = 50
    rel_tol: float = 1e-4
    retries: int = 2
    dt_min: float = 1e-2
    dt_max: float = 5.0


@dataclass(frozen=True)
class TimedTrajectory:
    poses: np.ndarray  # (N+1, 3) x, y, heading
    dts: np.ndarray  # (N,)
    residuals: np.ndarray  # (N,)
    cost: float = 0.0
    seed_cost: float = 0.0
    feasible: bool = True
    fallback: bool = False
    stamp: float = 0.0
    iterations: int = 0

    def __post_init__(self):
        if len(self.dts) != max(len(self.poses) - 1, 0):
            raise ValueError("need len(dts) == len(poses) - 1")
        if np.any(self.dts <= 0):
            raise ValueError("all dts must be > 0")

    @property
    def total_time(self) -> float:
        return float(np.sum(self.dts))

    def chords(self) -> np.ndarray:
        return np.hypot(*np.diff(self.poses[:, :2], axis=0).T)

    def turns(self) -> np.ndarray:
        return _wrap(np.diff(self.poses[:, 2]))

    def arc_lengths(self) -> np.ndarray:
        return _arc_length(self.signed_chords(), self.turns())

    def signed_chords(self) -> np.ndarray:
        d = np.diff(self.poses[:, :2], axis=0)
        mid = self.poses[:-1, 2] + 0.5 * self.turns()
        return d[:, 0] * np.cos(mid) + d[:, 1] * np.sin(mid)

    def velocities(self) -> np.ndarray:
        return self.signed_chords() / self.dts

    def turn_rates(self) -> np.ndarray:
        return self.turns() / self.dts

    def accelerations(self) -> np.ndarray:
        v = self.velocities()
        return np.diff(v) / (0.5 * (self.dts[:-1] + self.dts[1:]))

    def times(self) -> np.ndarray:
        return self.stamp + np.concatenate([[0.0], np.cumsum(self.dts)])

    def to_csv(self, path) -> None:
        """Columns t,x,y,heading,v,psi_dot; the last row repeats the final rates."""
        v = self.velocities()
        w = self.turn_rates()
        t = self.times()
        rows = ["t,x,y,heading,v,psi_dot"]
        for k, (x, y, th) in enumerate(self.poses):
            j = min(k, len(v) - 1)
            vk, wk = (v[j], w[j]) if len(v) else (0.0, 0.0)
            rows.append(",".join("%.17g" % float(c) for c in (t[k], x, y, th, vk, wk)))
        with open(path, "w") as f:
            f.write("\n".join(rows) + "\n")


def _wrap(a):
    return (np.asarray(a) + np.pi) % (2 * np.pi) - np.pi


def _arc_length(chord, turn):
    half = 0.5 * np.asarray(turn)
    with np.errstate(invalid="ignore", divide="ignore"):
        f = np.where(np.abs(half) > 1e-9, half / np.sin(half), 1.0)
    return chord * f


def nonholonomic_residuals(poses: np.ndarray) -> np.ndarray:
    """|(h_k + h_{k+1}) x d_k| per pose pair: zero iff the chord bisects the headings."""
    d = np.diff(poses[:, :2], axis=0)
    hx = np.cos(poses[:-1, 2]) + np.cos(poses[1:, 2])
    hy = np.sin(poses[:-1, 2]) + np.sin(poses[1:, 2])
    return np.abs(hx * d[:, 1] - hy * d[:, 0])


# ------------------------------------------------------------------ band model


def band_poses(start, l, dth):
    """Poses (n+1, 3) from start pose and per-segment (chord, turn)."""
    n = len(l)
    th = start[2] + np.concatenate([[0.0], np.cumsum(dth)])
    beta = th[:-1] + 0.5 * dth
    steps = np.column_stack([l * np.cos(beta), l * np.sin(beta)])
    xy = np.vstack([[start[0], start[1]], start[:2] + np.cumsum(steps, axis=0)]) if n else np.array([start[:2]])
    return np.column_stack([xy, th])


@dataclass
class _Problem:
    start: np.ndarray
    v_start: float
    goal: np.ndarray
    limits: PlannerLimits
    w: TebWeights
    tree: cKDTree | None
    obstacles: np.ndarray
    n: int

    def unpack(self, z):
        n = self.n
        return z[:n], z[n : 2 * n], z[2 * n :]

    def objective(self, z, want_grad=True):
        n = self.n
        lim, w = self.limits, self.w
        l, dth, dt = self.unpack(z)
        g_l = np.zeros(n)
        g_d = np.zeros(n)
        g_t = np.zeros(n)

        f = w.time * dt.sum()
        g_t += w.time

        # speed limits and reverse motion
        v = l / dt
        over = np.maximum(0.0, v - lim.v_max)
        under = np.maximum(0.0, lim.v_min - v)
        f += w.velocity * (over @ over + under @ under)
        dv = 2 * w.velocity * (over - under)
        rev = np.maximum(0.0, -l)
        f += w.reverse * rev @ rev
        g_l += -2 * w.reverse * rev

        # turn rate
        om = dth / dt
        om_over = np.maximum(0.0, np.abs(om) - lim.psi_dot_max)
        f += w.turn_rate * om_over @ om_over
        dom = 2 * w.turn_rate * om_over * np.sign(om)
        g_d += dom / dt
        g_t += -dom * om / dt

        f += w.smooth * dth @ dth
        g_d += 2 * w.smooth * dth

        # acceleration, including the transition from the current speed
        if n >= 1:
            a0 = (v[0] - self.v_start) / dt[0]
            e0 = max(0.0, abs(a0) - lim.a_max)
            f += w.accel * e0 * e0
            da0 = 2 * w.accel * e0 * math.copysign(1.0, a0)
            dv[0] += da0 / dt[0]
            g_t[0] += -da0 * a0 / dt[0]
        if n >= 2:
            s = 0.5 * (dt[:-1] + dt[1:])
            a = (v[1:] - v[:-1]) / s
            e = np.maximum(0.0, np.abs(a) - lim.a_max)
            f += w.accel * e @ e
            da = 2 * w.accel * e * np.sign(a)
            dv[1:] += da / s
            dv[:-1] -= da / s
            ds = -da * a / s
            g_t[:-1] += 0.5 * ds
            g_t[1:] += 0.5 * ds

        g_l += dv / dt
        g_t += -dv * v / dt

        # pose-dependent terms
        poses = band_poses(self.start, l, dth)
        gp = np.zeros((n + 1, 2))
        gh = np.zeros(n + 1)
        if n >= 1:
            dg = poses[-1, :2] - self.goal[:2]
            f += w.goal * dg @ dg
            gp[-1] += 2 * w.goal * dg
            eh = poses[-1, 2] - self.goal[2]
            f += w.goal_heading * (1.0 - math.cos(eh))
            gh[-1] += w.goal_heading * math.sin(eh)

            if self.tree is not None:
                reach = lim.robot_radius + lim.clearance_margin + w.obstacle_buffer
                d, idx = self.tree.query(poses[1:, :2])
                pen = np.maximum(0.0, reach - d)
                f += w.obstacle * pen @ pen
                active = pen > 0
                if np.any(active):
                    diff = poses[1:, :2][active] - self.obstacles[idx[active]]
                    dd = np.maximum(d[active], 1e-12)
                    gp[1:][active] += (-2 * w.obstacle * pen[active] / dd)[:, None] * diff

        if not want_grad:
            return f

        # chain pose gradients back to (l, dth)
        beta = poses[:-1, 2] + 0.5 * dth
        u = np.column_stack([np.cos(beta), np.sin(beta)])
        uperp = np.column_stack([-np.sin(beta), np.cos(beta)])
        G = np.cumsum(gp[::-1], axis=0)[::-1]  # G[k] = sum_{m >= k} gp[m]
        Gj = G[1:]  # sum over poses after segment j
        g_l += np.einsum("ij,ij->i", u, Gj)
        B = l * np.einsum("ij,ij->i", uperp, Gj)
        Bsum = np.cumsum(B[::-1])[::-1]  # sum_{j >= m} B_j
        after = np.concatenate([Bsum[1:], [0.0]])
        H = np.cumsum(gh[::-1])[::-1][1:]  # sum_{k > m} gh_k
        g_d += after + 0.5 * B + H
        return f, np.concatenate([g_l, g_d, g_t])


# ------------------------------------------------------------------ seeding


def truncate_path(path_xy: np.ndarray, length: float) -> np.ndarray:
    """Polyline prefix of arc length ``length`` (last point interpolated)."""
    path_xy = np.asarray(path_xy, dtype=float)
    if len(path_xy) < 2:
        return path_xy.copy()
    seg = np.hypot(*np.diff(path_xy, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if cum[-1] <= length:
        return path_xy.copy()
    k = int(np.searchsorted(cum, length))
    frac = (length - cum[k - 1]) / seg[k - 1]
    end = path_xy[k - 1] + frac * (path_xy[k] - path_xy[k - 1])
    return np.vstack([path_xy[:k], end])


def resample(path_xy: np.ndarray, n_seg: int) -> np.ndarray:
    seg = np.hypot(*np.diff(path_xy, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.linspace(0.0, cum[-1], n_seg + 1)
    return np.column_stack([np.interp(s, cum, path_xy[:, 0]), np.interp(s, cum, path_xy[:, 1])])


def seed_band(start, pts, limits: PlannerLimits, end_heading=None, window: int = 2):
    """Arc parameters following ``pts`` (``pts[0]`` is the start position).

    Headings follow the path tangent, estimated by central differences over
    ``window`` points each side, so grid staircase noise is not turned into
    alternating turns.  Chords take the spacing of ``pts``.
    """
    n = len(pts) - 1
    l = np.hypot(*np.diff(pts, axis=0).T)
    th = np.empty(n + 1)
    th[0] = start[2]
    for k in range(1, n + 1):
        a, b = pts[max(k - window, 0)], pts[min(k + window, n)]
        th[k] = math.atan2(b[1] - a[1], b[0] - a[0])
    if end_heading is not None:
        th[n] = end_heading
    dth = _wrap(np.diff(th))
    dt = np.maximum(np.maximum(l / limits.v_max, np.abs(dth) / limits.psi_dot_max), 1e-2)
    return l, dth, dt


# ------------------------------------------------------------------ limits


def enforce_limits(l, dth, dt, limits: PlannerLimits, max_sweeps: int = 500):
    """Stretch durations until |v| <= v_max, |omega| <= psi_dot_max and
    |a| <= a_max between consecutive segments.  Durations only grow."""
    dt = np.maximum(dt, np.maximum(np.abs(l) / limits.v_max, np.abs(dth) / limits.psi_dot_max))
    dt = dt.copy()
    A = limits.a_max
    n = len(l)

    def min_dt(length, v_other, dt_other):
        # smallest dt with length/dt - v_other <= A (dt + dt_other) / 2
        if length <= 0:
            return 0.0
        a, b, c = 0.5 * A, 0.5 * A * dt_other + v_other, -length
        return (-b + math.sqrt(b * b - 4 * a * c)) / (2 * a)

    for _ in range(max_sweeps):
        changed = False
        for i in range(n - 1):
            v0, v1 = l[i] / dt[i], l[i + 1] / dt[i + 1]
            s = 0.5 * (dt[i] + dt[i + 1])
            acc = (v1 - v0) / s
            if acc > A * (1 + 1e-12):
                new = min_dt(l[i + 1], v0, dt[i]) * (1 + 1e-12)
                if new > dt[i + 1]:
                    dt[i + 1] = new
                    changed = True
            elif acc < -A * (1 + 1e-12):
                new = min_dt(l[i], v1, dt[i + 1]) * (1 + 1e-12)
                if new > dt[i]:
                    dt[i] = new
                    changed = True
        if not changed:
            break
    return dt


# ------------------------------------------------------------------ planner


def clearance(points_xy: np.ndarray, tree: cKDTree | None, robot_radius: float) -> np.ndarray:
    if tree is None:
        return np.full(len(points_xy), np.inf)
    d, _ = tree.query(points_xy)
    return d - robot_radius


def arc_samples(poses: np.ndarray, per_segment: int = 4) -> np.ndarray:
    """Points along each arc (excluding the segment start) for collision checks."""
    out = [poses[:1, :2]]
    for k in range(len(poses) - 1):
        x, y, th = poses[k]
        d = poses[k + 1, :2] - poses[k, :2]
        dth = float(_wrap(poses[k + 1, 2] - th))
        chord = math.hypot(*d)
        for s in np.linspace(0, 1, per_segment + 1)[1:]:
            # point on the same circle at fraction s of the turn
            sub = dth * s
            c = chord * (math.sin(sub / 2) / math.sin(dth / 2) if abs(dth) > 1e-9 else s)
            b = th + sub / 2
            out.append(np.array([[x + c * math.cos(b), y + c * math.sin(b)]]))
    return np.vstack(out)


@dataclass
class CheckReport:
    residual: float
    v_max: float
    a_max: float
    omega_max: float
    min_clearance: float
    ok: bool


def hard_check(traj: TimedTrajectory, limits: PlannerLimits, tree) -> CheckReport:
    res = float(traj.residuals.max()) if len(traj.residuals) else 0.0
    v = np.abs(traj.velocities()) if len(traj.dts) else np.zeros(0)
    a = np.abs(traj.accelerations()) if len(traj.dts) > 1 else np.zeros(0)
    w = np.abs(traj.turn_rates()) if len(traj.dts) else np.zeros(0)
    clr = float(clearance(arc_samples(traj.poses), tree, limits.robot_radius).min())
    vm = float(v.max()) if len(v) else 0.0
    am = float(a.max()) if len(a) else 0.0
    wm = float(w.max()) if len(w) else 0.0
    ok = (
        res < RESIDUAL_TOL
        and vm <= limits.v_max * (1 + _LIMIT_TOL)
        and am <= limits.a_max * (1 + 1e-6)
        and wm <= limits.psi_dot_max * (1 + _LIMIT_TOL)
        and clr >= limits.clearance_margin
    )
    return CheckReport(res, vm, am, wm, clr, ok)


def obstacle_points(src) -> np.ndarray:
    """(K, 2) obstacle points from a Costmap (lethal cells), an OccupancyGrid, or an array."""
    if src is None:
        return np.zeros((0, 2))
    if hasattr(src, "occupied_points"):
        return src.occupied_points()
    if hasattr(src, "cost") and hasattr(src, "cell_center"):
        i, j = np.nonzero(src.cost >= LETHAL)
        r, (ox, oy) = src.resolution, src.origin
        return np.column_stack([ox + (j + 0.5) * r, oy + (i + 0.5) * r])
    return np.asarray(src, dtype=float).reshape(-1, 2)


def _build(prob: _Problem, z, stamp) -> TimedTrajectory:
    l, dth, dt = prob.unpack(z)
    poses = band_poses(prob.start, l, dth)
    return TimedTrajectory(poses, dt.copy(), nonholonomic_residuals(poses), stamp=stamp)


def teb_optimize(
    seed_path,
    limits: PlannerLimits,
    obstacles=None,
    start_state=(0.0, 0.0, 0.0, 0.0),
    goal_pose=None,
    weights: TebWeights | None = None,
    config: TebConfig | None = None,
    stamp: float = 0.0,
) -> TimedTrajectory:
    """Optimise a timed band along ``seed_path`` (world (x, y) points).

    ``obstacles`` is a Costmap, an OccupancyGrid or a (K, 2) array of
    obstacle points.  ``start_state`` is (x, y, heading, speed); the
    seed is truncated at ``limits.lookahead``.  ``goal_pose`` defaults to the
    end of the truncated seed, heading along its last segment.
    """
    w = weights or TebWeights()
    cfg = config or TebConfig()
    x0, y0, th0, v0 = (float(s) for s in start_state)
    start = np.array([x0, y0, th0])

    obstacles = obstacle_points(obstacles)
    tree = cKDTree(obstacles) if len(obstacles) else None

    path = np.asarray(seed_path, dtype=float).reshape(-1, 2)
    if len(path) == 0:
        raise ValueError("seed path is empty")
    path = np.vstack([start[:2], path]) if np.hypot(*(path[0] - start[:2])) > 1e-9 else path
    path = truncate_path(path, limits.lookahead)
    length = float(np.hypot(*np.diff(path, axis=0).T).sum()) if len(path) > 1 else 0.0

    goal_given = goal_pose is not None
    if goal_pose is None:
        if len(path) > 1:
            d = path[-1] - path[-2]
            goal_pose = (path[-1, 0], path[-1, 1], math.atan2(d[1], d[0]))
        else:
            goal_pose = (x0, y0, th0)
    goal = np.asarray(goal_pose, dtype=float)

    if length < 1e-9:
        poses = start[None, :]
        return TimedTrajectory(poses, np.zeros(0), np.zeros(0), stamp=stamp)

    best_fallback = None
    for attempt in range(cfg.retries + 1):
        # each retry uses a finer band and a slower reference time grid
        step = cfg.step / (1 + attempt)
        n_seg = int(min(cfg.max_poses - 1, max(1, math.ceil(length / step))))
        pts = resample(path, n_seg)
        slow = limits if attempt == 0 else replace(limits, v_max=limits.v_max / (1 + attempt))
        l, dth, dt = seed_band(start, pts, slow, goal[2] if goal_given else None)
        prob = _Problem(start, v0, goal, limits, w, tree, obstacles, n_seg)

        dt_seed = enforce_limits(l, dth, dt, limits)
        z_seed = np.concatenate([l, dth, dt_seed])
        seed_cost = prob.objective(z_seed, want_grad=False)

        bounds = (
            [(-limits.lookahead, limits.lookahead)] * n_seg
            + [(-math.pi, math.pi)] * n_seg
            + [(cfg.dt_min, cfg.dt_max)] * n_seg
        )
        z0 = np.concatenate([l, dth, np.clip(dt, cfg.dt_min, cfg.dt_max)])
        res = minimize(
            prob.objective,
            z0,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": cfg.max_iter, "ftol": cfg.rel_tol},
        )
        lo, do, to = prob.unpack(res.x)
        to = enforce_limits(lo, do, to, limits)
        z_opt = np.concatenate([lo, do, to])
        opt_cost = prob.objective(z_opt, want_grad=False)

        # descent contract: never hand back something worse than the seed
        if opt_cost <= seed_cost:
            z_fin, cost = z_opt, opt_cost
        else:
            z_fin, cost = z_seed, seed_cost
        traj = replace(_build(prob, z_fin, stamp), cost=float(cost), seed_cost=float(seed_cost), iterations=int(res.nit))
        if hard_check(traj, limits, tree).ok:
            return traj
        seed_traj = replace(_build(prob, z_seed, stamp), cost=float(seed_cost), seed_cost=float(seed_cost))
        if best_fallback is None and hard_check(seed_traj, limits, tree).ok:
            best_fallback = replace(seed_traj, fallback=True)

    if best_fallback is not None:
        return best_fallback
    raise NoFeasibleTrajectory("no feasible trajectory: hard checks failed after retries")
