"""One control tick: measure, run the controller hierarchy, advance the world."""
from __future__ import annotations

import math

from . import rider as rd
from .control import ControlOutputs, Controller, Measurements, Setpoints
from .world import EstimatedOdometry, World, world_step


def gap_rate(w: World) -> float:
    """d/dt of the torso-frame foot x-gap."""
    l, r = w.left, w.right
    dvx = l.v * math.cos(l.psi) - r.v * math.cos(r.psi)
    dvy = l.v * math.sin(l.psi) - r.v * math.sin(r.psi)
    c, s = math.cos(w.rider.phi), math.sin(w.rider.phi)
    (_, yl), (_, yr) = w.feet()
    return c * dvx + s * dvy + w.rider.phi_dot * (yl - yr)


def measure(w: World, odom: EstimatedOdometry) -> Measurements:
    fl, fr = w.feet()
    rp = w.rider_params
    q7 = w.rider.toe_pitch
    q7_dot = (
        rd.toe_pitch_rate(q7[0], w.left.theta, rp),
        rd.toe_pitch_rate(q7[1], w.right.theta, rp),
    )
    q2 = rd.hip_yaw(w.left, w.right, w.rider.phi)
    return Measurements(fl, fr, q7, q7_dot, q2, gap_rate(w), odom.v_est, odom.psi_dot_est)


def control_tick(
    w: World, controller: Controller, sp: Setpoints, odom: EstimatedOdometry
) -> tuple[World, ControlOutputs]:
    out = controller(measure(w, odom), sp, w.t)
    return world_step(w, out.command), out
