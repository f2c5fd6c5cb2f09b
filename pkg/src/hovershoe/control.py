"""Decoupled controller hierarchy: x/y platform regulation, velocity, turning,
and the layer that folds their outputs into the nominal balancer's torques.

All sub-controllers are pure functions of their measurements; error rates
are formed from measured joint and platform rates rather than by differencing,
so :class:`Controller` carries no memory between ticks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Callable

from .rider import G

V_LIMIT = 2.0
PSI_DOT_LIMIT = 1.5
COM_X_LIMIT = 0.05
Q2_LIMIT = 0.4


@dataclass(frozen=True)
class Gains:
    Kp_x: float = 8.0
    Kp_dtoe: float = 20.0
    Kd_dtoe: float = 2.0
    Kp_y: float = 8.0
    Kp_q2: float = 20.0
    Kp_vel: float = 0.06
    Kp_yaw: float = 15.0
    Kp_pitch: float = 2.0
    Kp_shift: float = 0.5
    Kd_damping: float = 0.05

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"Gains.{f.name} must be finite and >= 0, got {v}")


@dataclass
class Setpoints:
    v_d: float = 0.0
    psi_dot_d: float = 0.0
    y_offset: float | Callable[[float], float] = 0.2

    def clamped(self) -> "Setpoints":
        return Setpoints(
            _clamp(self.v_d, V_LIMIT), _clamp(self.psi_dot_d, PSI_DOT_LIMIT), self.y_offset
        )

    def offset_at(self, t: float) -> float:
        return self.y_offset(t) if callable(self.y_offset) else float(self.y_offset)


@dataclass(frozen=True)
class LegCommand:
    u1: float = 0.0
    u2: float = 0.0
    u3: float = 0.0
    u4: float = 0.0
    u5: float = 0.0


@dataclass(frozen=True)
class ControlCommand:
    left: LegCommand = field(default_factory=LegCommand)
    right: LegCommand = field(default_factory=LegCommand)
    com_des: tuple[float, float] = (0.0, 0.0)


def _clamp(x, lim):
    return max(-lim, min(lim, x))


def x_controller(x_foot_l, x_foot_r, q7_l, q7_r, q7dot_l, q7dot_r, g: Gains, gap_rate=0.0):
    """Toe-difference torque keeping the two platforms side by side.

    Returns ``(u5_dtoe, error)``.  The torque is added to the left toe and
    subtracted from the right.  ``gap_rate`` is d/dt of the foot x-gap, which
    enters the error rate through the outer-loop set-point.
    """
    q_des = -g.Kp_x * (x_foot_l - x_foot_r)
    e = (q7_l - q7_r) - q_des
    e_dot = (q7dot_l - q7dot_r) + g.Kp_x * gap_rate
    return -g.Kp_dtoe * e - g.Kd_dtoe * e_dot, e


def y_controller(y_foot_l, y_foot_r, q2_l, q2_r, y_offset, g: Gains):
    """Hip-yaw torques holding the feet at +/- ``y_offset``.  Returns (u2_l, u2_r)."""
    out = []
    for y_foot, q2, e in (
        (y_foot_l, q2_l, y_foot_l - y_offset),
        (y_foot_r, q2_r, y_foot_r + y_offset),
    ):
        q2_des = _clamp(-g.Kp_y * e, Q2_LIMIT)
        out.append(-g.Kp_q2 * (q2 - q2_des))
    return out[0], out[1]


def velocity_controller(v_est, v_d, g: Gains) -> float:
    """Desired forward COM offset, proportional to the speed error."""
    return _clamp(-g.Kp_vel * (v_est - v_d), COM_X_LIMIT)


def lean_angle(psi_dot_est, v_est) -> float:
    return math.atan(psi_dot_est * v_est / G)


def turning_controller(psi_dot_est, psi_dot_d, v_est, L, g: Gains):
    """Returns (u2_turn, u5_turn, com_des_y)."""
    e = psi_dot_est - psi_dot_d
    return -g.Kp_yaw * e, -g.Kp_pitch * e, -g.Kp_shift * L * lean_angle(psi_dot_est, v_est)


def integrate_torques(
    nominal: tuple[LegCommand, LegCommand],
    u2_y: tuple[float, float] = (0.0, 0.0),
    u2_turn: float = 0.0,
    u5_dtoe: float = 0.0,
    u5_turn: float = 0.0,
    q7_dot: tuple[float, float] = (0.0, 0.0),
    com_des: tuple[float, float] = (0.0, 0.0),
    g: Gains | None = None,
    u_max: float = 15.0,
) -> ControlCommand:
    """Fold the sub-controller outputs into the nominal per-leg torques.

    ``u5_dtoe`` is added to the left toe and subtracted from the right.
    ``u5_turn`` speeds up the outer platform: it is added to the right toe and
    subtracted from the left (left turns are positive yaw rate).
    """
    kd = g.Kd_damping if g is not None else 0.0
    legs = []
    for i, sign in ((0, 1.0), (1, -1.0)):
        n = nominal[i]
        u2 = n.u2 + u2_y[i] + u2_turn
        u5 = n.u5 + sign * u5_dtoe - sign * u5_turn - kd * q7_dot[i]
        legs.append(
            LegCommand(
                _clamp(n.u1, u_max), _clamp(u2, u_max), n.u3, n.u4, _clamp(u5, u_max)
            )
        )
    return ControlCommand(legs[0], legs[1], com_des)


@dataclass
class Measurements:
    """What the controller sees on one tick."""

    foot_l: tuple[float, float]
    foot_r: tuple[float, float]
    q7: tuple[float, float]
    q7_dot: tuple[float, float]
    q2: tuple[float, float]
    gap_rate: float
    v_est: float
    psi_dot_est: float


@dataclass
class ControlOutputs:
    command: ControlCommand
    u5_dtoe: float
    u2_y: tuple[float, float]
    u2_turn: float
    u5_turn: float


class Controller:
    """Runs the full hierarchy once per control tick."""

    def __init__(self, gains: Gains, L: float, u_max: float = 15.0):
        self.gains = gains
        self.L = L
        self.u_max = u_max

    def nominal(self) -> tuple[LegCommand, LegCommand]:
        # the reduced balancer acts on the COM directly (see rider.balance_torque);
        # it contributes no toe/hip torque of its own
        return LegCommand(), LegCommand()

    def __call__(self, m: Measurements, sp: Setpoints, t: float) -> ControlOutputs:
        g = self.gains
        sp = sp.clamped()
        u5_dtoe, _ = x_controller(
            m.foot_l[0], m.foot_r[0], m.q7[0], m.q7[1], m.q7_dot[0], m.q7_dot[1], g, m.gap_rate
        )
        u2_y = y_controller(m.foot_l[1], m.foot_r[1], m.q2[0], m.q2[1], sp.offset_at(t), g)
        com_x = velocity_controller(m.v_est, sp.v_d, g)
        u2_turn, u5_turn, com_y = turning_controller(m.psi_dot_est, sp.psi_dot_d, m.v_est, self.L, g)
        cmd = integrate_torques(
            self.nominal(), u2_y, u2_turn, u5_dtoe, u5_turn, m.q7_dot, (com_x, com_y), g, self.u_max
        )
        return ControlOutputs(cmd, u5_dtoe, u2_y, u2_turn, u5_turn)
