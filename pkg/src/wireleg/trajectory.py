"""Foot reference generation.

Every reference is analytic, so position, velocity and acceleration are
mutually consistent.  Joint accelerations for the feed-forward are obtained
from the Cartesian acceleration through the inverse Jacobian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kinematics import (LegGeometry, WorkspaceError, inverse_kinematics, jacobian,
                         jacobian_rate_product)

WORKSPACE_MARGIN = 0.005


@dataclass
class ReferenceSample:
    x_des: np.ndarray
    xdot_des: np.ndarray
    xddot_des: np.ndarray
    alpha_ref: np.ndarray
    phase: str = "swing"
    force_ff: np.ndarray = field(default_factory=lambda: np.zeros(2))


def joint_accelerations(x, xdot, xddot, geom: LegGeometry) -> np.ndarray:
    """Map a Cartesian foot acceleration to joint accelerations."""
    q = inverse_kinematics(x, geom)
    J = jacobian(q[0], q[1], geom)
    qdot = np.linalg.solve(J, xdot)
    return np.linalg.solve(J, np.asarray(xddot) - jacobian_rate_product(q, qdot, geom))


def _make_sample(x, xdot, xddot, geom, phase) -> ReferenceSample:
    x = np.asarray(x, dtype=float)
    xdot = np.asarray(xdot, dtype=float)
    xddot = np.asarray(xddot, dtype=float)
    return ReferenceSample(x, xdot, xddot, joint_accelerations(x, xdot, xddot, geom), phase)


def _check_radius(r: float, geom: LegGeometry):
    lo, hi = geom.r_min + WORKSPACE_MARGIN, geom.r_max - WORKSPACE_MARGIN
    if not lo <= r <= hi:
        raise WorkspaceError(r, lo, hi)


@dataclass(frozen=True)
class GaitParams:
    step_length: float = 0.08
    step_height: float = 0.04
    cycle_time: float = 0.5
    duty_factor: float = 0.5
    stance_depth: float = 0.27

    def __post_init__(self):
        for name in ("step_length", "step_height", "cycle_time", "stance_depth"):
            if not getattr(self, name) > 0:
                raise ValueError(f"GaitParams.{name} must be > 0")
        if not 0 < self.duty_factor < 1:
            raise ValueError(f"duty_factor must be in (0, 1), got {self.duty_factor}")


class CpgTrajectory:
    """Periodic swing/stance foot path.

    Stance drags the foot backward at constant depth and speed.  Swing
    returns it forward along a cycloid superposed on the stance speed, so the
    horizontal velocity matches at both phase boundaries, while the height
    follows a raised cosine reaching ``step_height`` at mid-swing.
    """

    def __init__(self, gait: GaitParams, geom: LegGeometry):
        self.gait = gait
        self.geom = geom
        half = gait.step_length / 2
        d = gait.stance_depth
        _check_radius(math.hypot(half, d), geom)
        _check_radius(d - gait.step_height, geom)
        self.t_stance = gait.duty_factor * gait.cycle_time
        self.t_swing = gait.cycle_time - self.t_stance
        self.v_stance = -gait.step_length / self.t_stance

    def __call__(self, t: float) -> ReferenceSample:
        if t < 0:
            raise ValueError(f"time must be non-negative, got {t}")
        g = self.gait
        half = g.step_length / 2
        tau = math.fmod(t, g.cycle_time)
        if tau < self.t_stance:
            x = (half + self.v_stance * tau, -g.stance_depth)
            return _make_sample(x, (self.v_stance, 0.0), (0.0, 0.0), self.geom, "stance")
        T = self.t_swing
        s = (tau - self.t_stance) / T
        a = self.v_stance * T
        b = g.step_length - a
        two_pi = 2.0 * math.pi
        px = -half + a * s + b * (s - math.sin(two_pi * s) / two_pi)
        vx = (a + b * (1.0 - math.cos(two_pi * s))) / T
        ax = b * two_pi * math.sin(two_pi * s) / T**2
        h = g.step_height
        pz = -g.stance_depth + h * (1.0 - math.cos(two_pi * s)) / 2.0
        vz = h * math.pi * math.sin(two_pi * s) / T
        az = h * two_pi * math.pi * math.cos(two_pi * s) / T**2
        return _make_sample((px, pz), (vx, vz), (ax, az), self.geom, "swing")


def cpg_sample(t: float, gait: GaitParams, geom: LegGeometry = LegGeometry()) -> ReferenceSample:
    return CpgTrajectory(gait, geom)(t)


class RadialSinusoid:
    """Foot oscillating along a fixed ray from the hip."""

    def __init__(self, amplitude: float, freq: float, center: float,
                 geom: LegGeometry = LegGeometry(), azimuth: float = 0.0):
        _check_radius(center - abs(amplitude), geom)
        _check_radius(center + abs(amplitude), geom)
        self.amplitude = amplitude
        self.freq = freq
        self.center = center
        self.geom = geom
        # unit vector along the ray; azimuth measured from straight down
        self.u = np.array([math.sin(azimuth), -math.cos(azimuth)])

    def radial(self, t: float) -> tuple[float, float, float]:
        w = 2.0 * math.pi * self.freq
        s, c = math.sin(w * t), math.cos(w * t)
        return (self.center + self.amplitude * s, self.amplitude * w * c,
                -self.amplitude * w * w * s)

    def __call__(self, t: float) -> ReferenceSample:
        r, rd, rdd = self.radial(t)
        return _make_sample(r * self.u, rd * self.u, rdd * self.u, self.geom, "swing")


def sinusoid_radial(t: float, amplitude: float, freq: float, center: float,
                    geom: LegGeometry = LegGeometry(), azimuth: float = 0.0) -> ReferenceSample:
    return RadialSinusoid(amplitude, freq, center, geom, azimuth)(t)


def impulse_profile(t: float, peak: float, duration: float, shape: str = "half-sine") -> float:
    """Feed-forward push force (N) of a single pulse starting at ``t = 0``."""
    if not (peak > 0 and duration > 0):
        raise ValueError("impulse peak and duration must be positive")
    if t < 0 or t > duration:
        return 0.0
    if shape == "half-sine":
        return peak * math.sin(math.pi * t / duration)
    if shape == "rectangular":
        return peak
    raise ValueError(f"unknown impulse shape {shape!r}")
