"""Reduced-order rider: a linear inverted pendulum standing on two platforms.

The torso frame has its origin at the midpoint of the two platforms and is
aligned with their mean heading.  The rider's nominal balancer is a PD on the
COM offset with gravity compensation at the set-point; its only effect on the
platforms is through the weight moment about each axle (plus whatever toe and
hip torques the controllers add).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .faults import RiderFell
from .platform import ContactForce, PlatformInput, PlatformState, contact_to_inputs

G = 9.81
KD_BAL = 30.0  # 1/s


@dataclass(frozen=True)
class RiderParams:
    M: float = 32.0  # kg
    L: float = 0.9  # m, COM height above the platform plane
    tau_com: float = 0.15  # s, closed-loop COM time constant
    y_nominal: float = 0.2  # m, stance half-width
    kp_bal: tuple[float, float] | None = None  # 1/s^2, per axis
    kd_bal: tuple[float, float] | None = None  # 1/s, per axis
    tau_toe: float = 0.05  # s, toe pitch filter
    max_reach: float = 0.45  # m, foot farther than this from the midpoint => fall
    g: float = G

    def __post_init__(self):
        if not (self.M > 0 and self.L > 0 and self.tau_com > 0):
            raise ValueError("RiderParams: M, L, tau_com must be > 0")
        if self.g != G:
            raise ValueError("RiderParams.g is fixed at 9.81")
        # stiffness cancels g/L and leaves 1/tau_com^2; damping is well above
        # critical because platform acceleration feeds straight back into the COM
        if self.kp_bal is None:
            k = self.g / self.L + 1.0 / self.tau_com**2
            object.__setattr__(self, "kp_bal", (k, k))
        if self.kd_bal is None:
            object.__setattr__(self, "kd_bal", (KD_BAL, KD_BAL))


@dataclass(frozen=True)
class RiderState:
    com: tuple[float, float] = (0.0, 0.0)
    com_dot: tuple[float, float] = (0.0, 0.0)
    phi: float = 0.0
    phi_dot: float = 0.0
    com_des: tuple[float, float] = (0.0, 0.0)
    toe_pitch: tuple[float, float] = (0.0, 0.0)  # q7 left, right


@dataclass(frozen=True)
class FootChannel:
    u5: float = 0.0  # toe pitch torque
    u2: float = 0.0  # hip yaw torque
    q7: float = 0.0
    q2: float = 0.0
    x: float = 0.0
    y: float = 0.0


def torso_pose(left: PlatformState, right: PlatformState) -> tuple[float, float, float]:
    """Feet midpoint and mean heading (circular mean of the two yaws)."""
    mx = 0.5 * (left.x + right.x)
    my = 0.5 * (left.y + right.y)
    dpsi = math.remainder(right.psi - left.psi, math.tau)
    return mx, my, left.psi + 0.5 * dpsi


def to_torso(px: float, py: float, origin_x: float, origin_y: float, phi: float) -> tuple[float, float]:
    c, s = math.cos(phi), math.sin(phi)
    dx, dy = px - origin_x, py - origin_y
    return c * dx + s * dy, -s * dx + c * dy


def foot_kinematics(left: PlatformState, right: PlatformState, phi: float | None = None):
    """Foot positions of (left, right) in the torso frame.

    ``phi`` defaults to the platforms' mean heading.
    """
    mx, my, mean_psi = torso_pose(left, right)
    if phi is None:
        phi = mean_psi
    return to_torso(left.x, left.y, mx, my, phi), to_torso(right.x, right.y, mx, my, phi)


def hip_yaw(left: PlatformState, right: PlatformState, phi: float) -> tuple[float, float]:
    """q2 per side: platform yaw relative to the torso."""
    return math.remainder(left.psi - phi, math.tau), math.remainder(right.psi - phi, math.tau)


def balance_torque(r: RiderState, p: RiderParams) -> tuple[float, float]:
    """Nominal balancer torque about the support, per torso axis."""
    out = []
    for i in range(2):
        e = r.com[i] - r.com_des[i]
        acc = -p.g / p.L * r.com_des[i] - p.kp_bal[i] * e - p.kd_bal[i] * r.com_dot[i]
        out.append(p.M * p.L * acc)
    return out[0], out[1]


def _com_accel(com, com_dot, com_des, base_accel, p):
    out = []
    for i in range(2):
        e = com[i] - com_des[i]
        u_bal = p.M * p.L * (-p.g / p.L * com_des[i] - p.kp_bal[i] * e - p.kd_bal[i] * com_dot[i])
        out.append(p.g / p.L * com[i] - base_accel[i] + u_bal / (p.M * p.L))
    return out


def com_dynamics_step(r: RiderState, p: RiderParams, base_accel, dt: float) -> RiderState:
    """RK4 step of the COM pendulum; ``base_accel`` is the feet-midpoint
    acceleration in the torso frame, held over the step."""
    c0, v0 = r.com, r.com_dot

    def f(c, v):
        return v, _com_accel(c, v, r.com_des, base_accel, p)

    k1c, k1v = f(c0, v0)
    k2c, k2v = f([c0[i] + 0.5 * dt * k1c[i] for i in range(2)], [v0[i] + 0.5 * dt * k1v[i] for i in range(2)])
    k3c, k3v = f([c0[i] + 0.5 * dt * k2c[i] for i in range(2)], [v0[i] + 0.5 * dt * k2v[i] for i in range(2)])
    k4c, k4v = f([c0[i] + dt * k3c[i] for i in range(2)], [v0[i] + dt * k3v[i] for i in range(2)])
    com = tuple(c0[i] + dt / 6 * (k1c[i] + 2 * k2c[i] + 2 * k3c[i] + k4c[i]) for i in range(2))
    com_dot = tuple(v0[i] + dt / 6 * (k1v[i] + 2 * k2v[i] + 2 * k3v[i] + k4v[i]) for i in range(2))

    if not all(math.isfinite(z) for z in com + com_dot) or math.hypot(*com) >= p.L:
        raise RiderFell("rider fell: COM offset reached pendulum length", state=(com, com_dot))
    return replace(r, com=com, com_dot=com_dot)


def toe_pitch_step(q7: float, platform_pitch: float, p: RiderParams, dt: float) -> float:
    """Toe joint angle lags the platform pitch it stands on (exact first-order update)."""
    a = math.exp(-dt / p.tau_toe)
    return platform_pitch + (q7 - platform_pitch) * a


def toe_pitch_rate(q7: float, platform_pitch: float, p: RiderParams) -> float:
    return (platform_pitch - q7) / p.tau_toe


def channels_to_contacts(
    left: FootChannel, right: FootChannel, p: RiderParams, com_x: float, u_max: float | None = None
) -> tuple[PlatformInput, PlatformInput]:
    """Per-platform torques from toe/hip channels plus the weight moment.

    Each platform carries half the weight; its pitch torque is the toe torque
    plus ``(M g / 2) * (com_x - x_foot)``.  Hip yaw torque passes straight to
    platform yaw.  Sign convention: positive toe torque pitches the platform
    nose-down (forward).
    """
    half_w = 0.5 * p.M * p.g
    out = []
    for ch in (left, right):
        u = PlatformInput(ch.u5 + half_w * (com_x - ch.x), ch.u2)
        out.append(u.saturated(u_max) if u_max is not None else u)
    return out[0], out[1]


def weight_contacts(p: RiderParams, com_x: float, foot_x: float) -> list[ContactForce]:
    """Support force on the rider for one foot, as a single contact under the COM."""
    return [ContactForce((com_x - foot_x, 0.0, 0.0), (0.0, 0.0, 0.5 * p.M * p.g))]


def weight_moment_via_contacts(p: RiderParams, com_x: float, foot_x: float) -> PlatformInput:
    return contact_to_inputs(weight_contacts(p, com_x, foot_x))


def stance_ok(foot_l, foot_r, p: RiderParams) -> bool:
    """Feet still under the rider: neither foot farther than ``max_reach``
    from the midpoint and feet not crossed."""
    return (
        math.hypot(*foot_l) < p.max_reach
        and math.hypot(*foot_r) < p.max_reach
        and foot_l[1] - foot_r[1] > 0.05
    )
