"""Closed-loop model of one self-balancing wheeled platform.

The platform's internal pitch stabiliser is lumped into a spring/damper on
pitch; yaw has damping only, and the forward speed integrates pitch.  State
is a frozen dataclass of plain floats so a step is cheap and bit-reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, astuple, fields
from typing import Sequence

import numpy as np

from .faults import NumericalDivergence

# anything beyond these is treated as a blown-up integration
_STATE_BOUND = 1e6
MAX_DT = 2e-3


@dataclass(frozen=True)
class PlatformParams:
    m: float = 3.0  # kg
    J_theta: float = 0.02  # kg m^2, pitch
    J_psi: float = 0.01  # kg m^2, yaw
    c1: float = 20.0  # N m / rad, pitch stiffness
    c2: float = 1.0  # N m s / rad, pitch damping
    c3: float = 0.5  # N m s / rad, yaw damping
    c4: float = 200.0  # N / rad, pitch-to-thrust
    u_max: float = 15.0  # N m, torque saturation
    r_w: float = 0.1  # m, wheel radius (metadata)

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"PlatformParams.{f.name} must be finite and > 0, got {v}")

    @property
    def natural_frequency(self) -> float:
        return math.sqrt(self.c1 / self.J_theta)

    @property
    def damping_ratio(self) -> float:
        return self.c2 / (2.0 * math.sqrt(self.c1 * self.J_theta))


@dataclass(frozen=True)
class PlatformState:
    theta: float = 0.0
    theta_dot: float = 0.0
    psi: float = 0.0
    psi_dot: float = 0.0
    x: float = 0.0
    y: float = 0.0
    v: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self))

    @classmethod
    def from_array(cls, a: Sequence[float]) -> "PlatformState":
        return cls(*(float(z) for z in a))

    def heading(self) -> tuple[float, float]:
        return math.cos(self.psi), math.sin(self.psi)


@dataclass(frozen=True)
class PlatformInput:
    u_theta: float = 0.0
    u_psi: float = 0.0

    def saturated(self, u_max: float) -> "PlatformInput":
        return PlatformInput(_clamp(self.u_theta, u_max), _clamp(self.u_psi, u_max))


@dataclass(frozen=True)
class ContactForce:
    """Force applied ON the rider at ``r`` (platform frame)."""

    r: tuple[float, float, float]
    F: tuple[float, float, float]


def _clamp(u: float, lim: float) -> float:
    return max(-lim, min(lim, u))


def _check_finite(values, what):
    for v in values:
        if not math.isfinite(v):
            raise NumericalDivergence(f"numerical divergence: non-finite {what}", state=tuple(values))


def platform_derivative(s: PlatformState, u: PlatformInput, p: PlatformParams) -> PlatformState:
    """Time derivative of ``s`` under input ``u`` (no saturation applied here)."""
    _check_finite(astuple(s), "platform state")
    _check_finite((u.u_theta, u.u_psi), "platform input")
    return PlatformState(*_deriv(astuple(s), u.u_theta, u.u_psi, p))


def _deriv(x, u_theta, u_psi, p):
    theta, theta_dot, psi, psi_dot, _, _, v = x
    return (
        theta_dot,
        (-p.c1 * theta - p.c2 * theta_dot + u_theta) / p.J_theta,
        psi_dot,
        (-p.c3 * psi_dot + u_psi) / p.J_psi,
        v * math.cos(psi),
        v * math.sin(psi),
        p.c4 * theta / p.m,
    )


def contact_to_inputs(contacts: Sequence[ContactForce], u_max: float | None = None) -> PlatformInput:
    """Pitch/yaw torques the platform receives from the rider's foot contacts.

    Contact forces are those acting on the rider, so the platform sees ``-F``:
    ``u_theta = sum (r x -F)_y`` and ``u_psi = sum (r x -F)_z``.
    """
    tau = np.zeros(3)
    for c in contacts:
        r = np.asarray(c.r, dtype=float)
        F = np.asarray(c.F, dtype=float)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(F))):
            raise NumericalDivergence("numerical divergence: non-finite contact", state=(c.r, c.F))
        tau += np.cross(r, -F)
    u = PlatformInput(float(tau[1]), float(tau[2]))
    return u.saturated(u_max) if u_max is not None else u


def step(s: PlatformState, u: PlatformInput, p: PlatformParams, dt: float) -> PlatformState:
    """Advance one fixed RK4 step with the input saturated and held over the step."""
    if not 0.0 < dt <= MAX_DT:
        raise ValueError(f"dt must be in (0, {MAX_DT}], got {dt}")
    x = astuple(s)
    _check_finite(x, "platform state")
    _check_finite((u.u_theta, u.u_psi), "platform input")
    ut = _clamp(u.u_theta, p.u_max)
    up = _clamp(u.u_psi, p.u_max)

    k1 = _deriv(x, ut, up, p)
    x2 = tuple(a + 0.5 * dt * b for a, b in zip(x, k1))
    k2 = _deriv(x2, ut, up, p)
    x3 = tuple(a + 0.5 * dt * b for a, b in zip(x, k2))
    k3 = _deriv(x3, ut, up, p)
    x4 = tuple(a + dt * b for a, b in zip(x, k3))
    k4 = _deriv(x4, ut, up, p)
    out = tuple(
        a + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        for a, b1, b2, b3, b4 in zip(x, k1, k2, k3, k4)
    )
    for v in out:
        if not (math.isfinite(v) and abs(v) < _STATE_BOUND):
            raise NumericalDivergence("numerical divergence: platform state out of bounds", state=out)
    if abs(out[0]) >= math.pi / 2:
        raise NumericalDivergence("numerical divergence: platform pitch beyond pi/2 (tip-over)", state=out)
    return PlatformState(*out)


def pitch_free_response(theta0: float, theta_dot0: float, t, p: PlatformParams):
    """Closed-form unforced pitch trajectory (underdamped or overdamped)."""
    t = np.asarray(t, dtype=float)
    wn = p.natural_frequency
    zeta = p.damping_ratio
    if zeta < 1.0:
        wd = wn * math.sqrt(1.0 - zeta**2)
        a = theta0
        b = (theta_dot0 + zeta * wn * theta0) / wd
        return np.exp(-zeta * wn * t) * (a * np.cos(wd * t) + b * np.sin(wd * t))
    if zeta == 1.0:
        return np.exp(-wn * t) * (theta0 + (theta_dot0 + wn * theta0) * t)
    r = wn * math.sqrt(zeta**2 - 1.0)
    s1, s2 = -zeta * wn + r, -zeta * wn - r
    c1 = (theta_dot0 - s2 * theta0) / (s1 - s2)
    c2 = theta0 - c1
    return c1 * np.exp(s1 * t) + c2 * np.exp(s2 * t)
