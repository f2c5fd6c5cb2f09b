"""Planar scenario world: two platforms, the rider, static obstacles,
scripted impulses, a simulated range sensor and a noisy odometry source."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import platform as pf
from . import rider as rd
from .control import ControlCommand
from .faults import RiderFell


@dataclass(frozen=True)
class Disturbance:
    target: str  # "left" | "right" | "rider"
    impulse: tuple[float, float]  # N s, world frame
    time: float

    def __post_init__(self):
        if self.target not in ("left", "right", "rider"):
            raise ValueError(f"unknown disturbance target {self.target!r}")


@dataclass(frozen=True)
class World:
    left: pf.PlatformState
    right: pf.PlatformState
    rider: rd.RiderState
    platform_params: pf.PlatformParams = field(default_factory=pf.PlatformParams)
    rider_params: rd.RiderParams = field(default_factory=rd.RiderParams)
    obstacles: tuple[np.ndarray, ...] = ()
    disturbances: tuple[Disturbance, ...] = ()
    tick: int = 0
    dt: float = 1e-3
    seed: int = 0

    @property
    def t(self) -> float:
        return self.tick * self.dt

    def feet(self):
        return rd.foot_kinematics(self.left, self.right, self.rider.phi)

    def midpoint(self) -> tuple[float, float]:
        return 0.5 * (self.left.x + self.right.x), 0.5 * (self.left.y + self.right.y)

    def pose(self) -> tuple[float, float, float]:
        mx, my = self.midpoint()
        return mx, my, self.rider.phi

    def speed(self) -> float:
        """Midpoint velocity along the torso heading."""
        vx = 0.5 * (self.left.v * math.cos(self.left.psi) + self.right.v * math.cos(self.right.psi))
        vy = 0.5 * (self.left.v * math.sin(self.left.psi) + self.right.v * math.sin(self.right.psi))
        return vx * math.cos(self.rider.phi) + vy * math.sin(self.rider.phi)


def make_world(
    x: float = 0.0,
    y: float = 0.0,
    heading: float = 0.0,
    speed: float = 0.0,
    x_gap: float = 0.0,
    platform_params: pf.PlatformParams | None = None,
    rider_params: rd.RiderParams | None = None,
    obstacles: Sequence = (),
    disturbances: Sequence[Disturbance] = (),
    com: tuple[float, float] = (0.0, 0.0),
    dt: float = 1e-3,
    seed: int = 0,
) -> World:
    """Both platforms side by side at the nominal stance, left one ``x_gap`` ahead."""
    pp = platform_params or pf.PlatformParams()
    rp = rider_params or rd.RiderParams()
    c, s = math.cos(heading), math.sin(heading)
    hw = rp.y_nominal

    def shoe(side):
        dx = 0.5 * x_gap * side
        dy = hw * side
        return pf.PlatformState(
            psi=heading, x=x + c * dx - s * dy, y=y + s * dx + c * dy, v=speed
        )

    polys = tuple(np.asarray(p, dtype=float).reshape(-1, 2) for p in obstacles)
    return World(
        shoe(1.0),
        shoe(-1.0),
        rd.RiderState(com=tuple(com), phi=heading),
        pp,
        rp,
        polys,
        tuple(sorted(disturbances, key=lambda d: d.time)),
        0,
        dt,
        seed,
    )


def _apply_impulse(w: World, d: Disturbance) -> World:
    jx, jy = d.impulse
    if d.target == "rider":
        c, s = math.cos(w.rider.phi), math.sin(w.rider.phi)
        M = w.rider_params.M
        dv = (c * jx + s * jy) / M, (-s * jx + c * jy) / M
        r = w.rider
        return replace(w, rider=replace(r, com_dot=(r.com_dot[0] + dv[0], r.com_dot[1] + dv[1])))
    shoe = getattr(w, d.target)
    # only the longitudinal component survives the no-slip constraint
    dv = (math.cos(shoe.psi) * jx + math.sin(shoe.psi) * jy) / w.platform_params.m
    return replace(w, **{d.target: replace(shoe, v=shoe.v + dv)})


def _midpoint_accel_torso(left, right, p: pf.PlatformParams, phi: float) -> tuple[float, float]:
    ax = ay = 0.0
    for s in (left, right):
        vdot = p.c4 * s.theta / p.m
        c, sn = math.cos(s.psi), math.sin(s.psi)
        ax += 0.5 * (vdot * c - s.v * s.psi_dot * sn)
        ay += 0.5 * (vdot * sn + s.v * s.psi_dot * c)
    c, sn = math.cos(phi), math.sin(phi)
    return c * ax + sn * ay, -sn * ax + c * ay


def platform_inputs(w: World, cmd: ControlCommand) -> tuple[pf.PlatformInput, pf.PlatformInput]:
    (xl, yl), (xr, yr) = w.feet()
    ch_l = rd.FootChannel(u5=cmd.left.u5, u2=cmd.left.u2, x=xl, y=yl)
    ch_r = rd.FootChannel(u5=cmd.right.u5, u2=cmd.right.u2, x=xr, y=yr)
    return rd.channels_to_contacts(ch_l, ch_r, w.rider_params, w.rider.com[0])


def world_step(w: World, cmd: ControlCommand, dt: float | None = None) -> World:
    """One physics tick: impulses, contact torques, platform RK4, rider COM."""
    dt = w.dt if dt is None else dt
    t = w.tick * w.dt
    pending = w.disturbances
    while pending and pending[0].time <= t + 1e-12:
        w = _apply_impulse(w, pending[0])
        pending = pending[1:]
    w = replace(w, disturbances=pending)

    u_l, u_r = platform_inputs(w, cmd)
    pp, rp = w.platform_params, w.rider_params
    left = pf.step(w.left, u_l, pp, dt)
    right = pf.step(w.right, u_r, pp, dt)

    _, _, phi = rd.torso_pose(left, right)
    phi_dot = 0.5 * (left.psi_dot + right.psi_dot)
    accel = _midpoint_accel_torso(left, right, pp, phi)
    r = replace(w.rider, phi=phi, phi_dot=phi_dot, com_des=cmd.com_des)
    r = rd.com_dynamics_step(r, rp, accel, dt)
    toes = (
        rd.toe_pitch_step(r.toe_pitch[0], left.theta, rp, dt),
        rd.toe_pitch_step(r.toe_pitch[1], right.theta, rp, dt),
    )
    r = replace(r, toe_pitch=toes)
    out = replace(w, left=left, right=right, rider=r, tick=w.tick + 1)

    fl, fr = out.feet()
    if not rd.stance_ok(fl, fr, rp):
        raise RiderFell(f"rider fell: feet left the stance at t={out.t:.3f}s", state=out)
    return out


# ---------------------------------------------------------------- sensing


@dataclass(frozen=True)
class RangeScan:
    origin: tuple[float, float, float]
    angles: np.ndarray  # beam angles relative to the sensor heading
    ranges: np.ndarray
    max_range: float

    @property
    def n(self) -> int:
        return len(self.angles)

    def hits(self) -> np.ndarray:
        """World-frame endpoints of beams that returned before max range."""
        x, y, th = self.origin
        mask = self.ranges < self.max_range
        a = th + self.angles[mask]
        r = self.ranges[mask]
        return np.column_stack([x + r * np.cos(a), y + r * np.sin(a)])


def _edges(polygons) -> tuple[np.ndarray, np.ndarray]:
    a, b = [], []
    for poly in polygons:
        poly = np.asarray(poly, dtype=float)
        a.append(poly)
        b.append(np.roll(poly, -1, axis=0))
    if not a:
        return np.zeros((0, 2)), np.zeros((0, 2))
    return np.vstack(a), np.vstack(b)


def raycast(origin_xy, directions, polygons, max_range) -> np.ndarray:
    """Nearest ray/polygon-edge hit distance per direction (max_range if none)."""
    ox, oy = origin_xy
    d = np.asarray(directions, dtype=float)
    a, b = _edges(polygons)
    out = np.full(len(d), float(max_range))
    if len(a) == 0:
        return out
    e = b - a  # (E, 2)
    w = a - np.array([ox, oy])  # (E, 2)
    # solve origin + t d = a + s e  for t (along ray) and s (along edge)
    denom = d[:, None, 0] * e[None, :, 1] - d[:, None, 1] * e[None, :, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (w[None, :, 0] * e[None, :, 1] - w[None, :, 1] * e[None, :, 0]) / denom
        s = (w[None, :, 0] * d[:, None, 1] - w[None, :, 1] * d[:, None, 0]) / denom
    ok = (np.abs(denom) > 1e-15) & (t > 0) & (s >= 0) & (s <= 1)
    t = np.where(ok, t, np.inf)
    return np.minimum(out, t.min(axis=1))


def simulate_scan(
    w: World,
    sensor_pose: tuple[float, float, float],
    n: int = 181,
    max_range: float = 4.0,
    fov: float = math.pi,
    noise_std: float = 0.0,
    rng: np.random.Generator | None = None,
) -> RangeScan:
    x, y, th = sensor_pose
    angles = np.linspace(-fov / 2, fov / 2, n) if n > 1 else np.zeros(1)
    dirs = np.column_stack([np.cos(th + angles), np.sin(th + angles)])
    ranges = raycast((x, y), dirs, w.obstacles, max_range)
    if noise_std > 0:
        if rng is None:
            raise ValueError("noisy scan needs an rng")
        hit = ranges < max_range
        ranges = ranges + np.where(hit, rng.normal(0.0, noise_std, n), 0.0)
        ranges = np.clip(ranges, 1e-6, max_range)
    return RangeScan((x, y, th), angles, ranges, float(max_range))


def point_polygon_distance(p, poly) -> float:
    """Euclidean distance from point to polygon (0 inside)."""
    poly = np.asarray(poly, dtype=float)
    p = np.asarray(p, dtype=float)
    a = poly
    b = np.roll(poly, -1, axis=0)
    e = b - a
    t = np.clip(np.einsum("ij,ij->i", p - a, e) / np.einsum("ij,ij->i", e, e), 0.0, 1.0)
    d = np.min(np.hypot(*(a + t[:, None] * e - p).T))
    return 0.0 if _inside(p, poly) else float(d)


def _inside(p, poly) -> bool:
    x, y = p
    inside = False
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xi = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xi:
                inside = not inside
    return inside


def obstacle_distance(w: World, p) -> float:
    if not w.obstacles:
        return math.inf
    return min(point_polygon_distance(p, poly) for poly in w.obstacles)


# ---------------------------------------------------------------- odometry


@dataclass(frozen=True)
class NoiseConfig:
    std_v: float = 0.02
    std_psi_dot: float = 0.01
    std_pose: float = 0.005
    std_heading: float = 0.005
    tau_filter: float = 0.05

    @classmethod
    def exact(cls) -> "NoiseConfig":
        return cls(0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class EstimatedOdometry:
    pose: tuple[float, float, float]
    v_est: float
    psi_dot_est: float


class Estimator:
    """Noise-injected ground truth with first-order smoothing on the rates.

    Owns its rng; draws are made in a fixed order each tick so a given seed
    reproduces the same noise sequence.
    """

    def __init__(self, noise: NoiseConfig, seed: int, dt: float = 1e-3, ground_truth: bool = False):
        self.noise = noise
        self.rng = np.random.default_rng(seed)
        self.alpha = 1.0 - math.exp(-dt / noise.tau_filter) if noise.tau_filter > 0 else 1.0
        self.ground_truth = ground_truth
        self._v = None
        self._w = None

    def reset(self, v: float, psi_dot: float):
        self._v, self._w = v, psi_dot

    def __call__(self, w: World) -> EstimatedOdometry:
        x, y, th = w.pose()
        v, psi_dot = w.speed(), w.rider.phi_dot
        if self.ground_truth:
            return EstimatedOdometry((x, y, th), v, psi_dot)
        nz = self.noise
        r = self.rng.standard_normal(5)
        pose = (x + nz.std_pose * r[0], y + nz.std_pose * r[1], th + nz.std_heading * r[2])
        v_meas = v + nz.std_v * r[3]
        w_meas = psi_dot + nz.std_psi_dot * r[4]
        if self._v is None:
            self._v, self._w = v, psi_dot
        self._v += self.alpha * (v_meas - self._v)
        self._w += self.alpha * (w_meas - self._w)
        return EstimatedOdometry(pose, self._v, self._w)


def estimate_odometry(w: World, noise: NoiseConfig, seed: int) -> EstimatedOdometry:
    """Single-shot estimate with a fresh estimator (filter starts at truth)."""
    return Estimator(noise, seed, w.dt)(w)
