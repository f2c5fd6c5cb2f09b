"""Run metrics.  Everything here is a pure function of logged columns so it
can be recomputed from the trajectory CSV."""
from __future__ import annotations

import math

import numpy as np


def change_times(t: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Times at which ``ref`` takes a new value (the first sample counts)."""
    ref = np.asarray(ref)
    idx = np.concatenate([[0], np.nonzero(ref[1:] != ref[:-1])[0] + 1])
    return t[idx]


def settled_mask(t: np.ndarray, ref: np.ndarray, transient: float) -> np.ndarray:
    """True where at least ``transient`` seconds have passed since ``ref`` last changed."""
    ch = change_times(t, ref)
    last = ch[np.searchsorted(ch, t, side="right") - 1]
    return t - last >= transient - 1e-12


def rmse(err: np.ndarray, mask: np.ndarray | None = None) -> float | None:
    e = np.asarray(err, dtype=float)
    if mask is not None:
        e = e[mask]
    if e.size == 0:
        return None
    return float(np.sqrt(np.mean(e * e)))


def tracking_rmse(t, y, ref, transient: float) -> float | None:
    return rmse(np.asarray(y) - np.asarray(ref), settled_mask(t, ref, transient))


def step_reach_times(t, y, ref, band: float = 0.05) -> list[dict]:
    """For each change of a nonzero reference: time until |y - ref| <= band*|ref|.

    ``reach`` is None when the band is never entered before the next change.
    """
    t = np.asarray(t)
    y = np.asarray(y)
    ref = np.asarray(ref)
    idx = np.concatenate([[0], np.nonzero(ref[1:] != ref[:-1])[0] + 1, [len(t)]])
    out = []
    for a, b in zip(idx[:-1], idx[1:]):
        r = ref[a]
        if r == 0:
            continue
        inside = np.nonzero(np.abs(y[a:b] - r) <= band * abs(r))[0]
        out.append(
            {
                "time": float(t[a]),
                "target": float(r),
                "reach": float(t[a + inside[0]] - t[a]) if inside.size else None,
            }
        )
    return out


def settle_time(t, x, tol: float) -> float | None:
    """First time after which |x| stays below ``tol`` (None if it never settles)."""
    bad = np.nonzero(np.abs(np.asarray(x)) >= tol)[0]
    if bad.size == 0:
        return float(t[0])
    if bad[-1] == len(t) - 1:
        return None
    return float(t[bad[-1] + 1])


def sine_fit(t, y, freq: float) -> tuple[float, float, float]:
    """Least-squares ``y ~ c + a sin(wt) + b cos(wt)``; returns (c, amplitude, phase)."""
    w = 2 * math.pi * freq
    A = np.column_stack([np.ones_like(t), np.sin(w * t), np.cos(w * t)])
    (c, a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(c), float(math.hypot(a, b)), float(math.atan2(b, a))


def circle_fit(x, y) -> tuple[float, float, float]:
    """Algebraic (Kasa) circle fit; returns (cx, cy, radius)."""
    A = np.column_stack([x, y, np.ones_like(x)])
    rhs = x * x + y * y
    (a, b, c), *_ = np.linalg.lstsq(A, rhs, rcond=None)
    cx, cy = a / 2, b / 2
    return float(cx), float(cy), float(math.sqrt(c + cx * cx + cy * cy))


def points_polygon_distance(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Vectorised distance from each point to a polygon (0 inside)."""
    pts = np.asarray(pts, dtype=float)
    a = np.asarray(poly, dtype=float)
    b = np.roll(a, -1, axis=0)
    e = b - a
    rel = pts[:, None, :] - a[None, :, :]
    s = np.clip(np.einsum("pek,ek->pe", rel, e) / np.einsum("ek,ek->e", e, e), 0.0, 1.0)
    d = np.hypot(*(rel - s[..., None] * e[None]).transpose(2, 0, 1)).min(axis=1)
    # even-odd inside test
    x, y = pts[:, 0:1], pts[:, 1:2]
    y1, y2 = a[None, :, 1], b[None, :, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = a[None, :, 0] + (y - y1) * (b[None, :, 0] - a[None, :, 0]) / (y2 - y1)
    crosses = ((y1 > y) != (y2 > y)) & (x < xi)
    inside = np.sum(crosses, axis=1) % 2 == 1
    return np.where(inside, 0.0, d)


def min_distance(pts: np.ndarray, polygons) -> np.ndarray:
    if not len(polygons):
        return np.full(len(pts), np.inf)
    return np.min([points_polygon_distance(pts, p) for p in polygons], axis=0)


def _f(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def compute_metrics(traj: dict, scn, fault: dict | None, goal_info: dict | None = None) -> dict:
    """Metrics summary from trajectory columns (dict of arrays) and the scenario."""
    t = traj["t"]
    mc = scn.metrics
    out: dict = {"scenario": scn.name, "seed": scn.seed, "mode": scn.mode, "samples": int(len(t))}
    out["fault"] = fault
    if len(t) == 0:
        return out
    v_rmse = tracking_rmse(t, traj["v"], traj["v_d"], mc.transient)
    w_rmse = tracking_rmse(t, traj["psi_dot"], traj["psi_dot_d"], mc.transient)
    if scn.mode == "autonomous-goal":
        # set-points move every planner cycle, so no window is ever settled
        v_rmse = w_rmse = None
    out["velocity_rmse"] = _f(v_rmse)
    out["yaw_rate_rmse"] = _f(w_rmse)
    steps = step_reach_times(t, traj["v"], traj["v_d"], mc.settle_band) if scn.mode != "autonomous-goal" else []
    out["velocity_steps"] = steps
    yaw_steps = step_reach_times(t, traj["psi_dot"], traj["psi_dot_d"], mc.settle_band) if scn.mode != "autonomous-goal" else []
    out["yaw_steps"] = yaw_steps

    gap = traj["x_gap"]
    out["x_gap_max"] = _f(np.max(np.abs(gap)))
    out["x_gap_final"] = _f(abs(gap[-1]))
    out["x_gap_settle_time"] = _f(settle_time(t, gap, mc.gap_tolerance))

    hw = traj["half_width"]
    out["half_width_error_max"] = _f(np.max(np.abs(hw - traj["y_offset"])))
    if scn.mode == "wave":
        after = t >= 1.0 / scn.wave.frequency
        if np.count_nonzero(after) > 10:
            _, amp, _ = sine_fit(t[after], hw[after], scn.wave.frequency)
            out["wave_amplitude"] = _f(amp)
            out["wave_amplitude_error"] = _f(abs(amp - scn.wave.amplitude) / scn.wave.amplitude)

    # curvature over the second half of the run when turning steadily
    half = t >= t[0] + 0.5 * (t[-1] - t[0])
    v_d, w_d = traj["v_d"][half], traj["psi_dot_d"][half]
    if scn.mode != "autonomous-goal" and np.any(w_d != 0) and np.all(w_d == w_d[0]) and np.all(v_d == v_d[0]) and v_d[0] != 0:
        _, _, r = circle_fit(traj["x"][half], traj["y"][half])
        out["curvature"] = _f(1.0 / r)
        out["curvature_target"] = _f(abs(w_d[0] / v_d[0]))

    tall = [o.polygon for o in scn.obstacles if not o.low]
    low = [o.polygon for o in scn.obstacles if o.low]
    pts = np.column_stack([traj["x"], traj["y"]])
    if tall:
        d = min_distance(pts, tall)
        clr = d - scn.planner.robot_radius
        out["min_clearance"] = _f(clr.min())
        out["collisions"] = int(np.count_nonzero(np.diff(np.concatenate([[0], (clr < 0).astype(int)])) == 1))
    if low:
        feet = np.vstack([np.column_stack([traj["foot_l_x"], traj["foot_l_y"]]), np.column_stack([traj["foot_r_x"], traj["foot_r_y"]])])
        out["min_foot_clearance"] = _f(min_distance(feet, low).min())
    if goal_info is not None:
        out.update(goal_info)
    return out
