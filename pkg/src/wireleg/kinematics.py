"""Planar two-link leg geometry.

Conventions, used everywhere in the package:

* Hip frame: origin at the hip axis, ``x`` forward, ``z`` up.  The foot of a
  hanging leg therefore has negative ``z``.
* ``theta_hip`` is the thigh angle measured from the downward vertical,
  positive when the thigh swings toward ``+x``.
* ``theta_knee`` is the relative angle between thigh and shank; zero means
  the leg is straight.  ``knee_sign`` selects the branch: the inverse
  kinematics returns ``knee_sign * theta_knee >= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit


class WorkspaceError(ValueError):
    """Requested foot position lies outside the reachable annulus."""

    def __init__(self, r: float, r_min: float, r_max: float):
        super().__init__(f"radial distance {r:.6g} m outside reachable range "
                         f"[{r_min:.6g}, {r_max:.6g}] m")
        self.r = r
        self.r_min = r_min
        self.r_max = r_max


@dataclass(frozen=True)
class LegGeometry:
    l1: float = 0.225
    l2: float = 0.125
    knee_sign: int = 1

    def __post_init__(self):
        if not (self.l1 > 0 and self.l2 > 0):
            raise ValueError(f"link lengths must be positive, got l1={self.l1}, l2={self.l2}")
        if self.knee_sign not in (1, -1):
            raise ValueError(f"knee_sign must be +1 or -1, got {self.knee_sign!r}")

    @property
    def r_min(self) -> float:
        return abs(self.l1 - self.l2)

    @property
    def r_max(self) -> float:
        return self.l1 + self.l2


@dataclass
class FootState:
    x: np.ndarray
    xdot: np.ndarray
    r: float
    rdot: float

    @classmethod
    def from_cartesian(cls, x, xdot=(0.0, 0.0)) -> "FootState":
        x = np.asarray(x, dtype=float)
        xdot = np.asarray(xdot, dtype=float)
        r = math.hypot(x[0], x[1])
        rdot = float(x @ xdot) / r if r > 0 else 0.0
        return cls(x, xdot, r, rdot)


@njit(cache=True)
def _fk(q1, q2, l1, l2):
    q12 = q1 + q2
    return l1 * math.sin(q1) + l2 * math.sin(q12), -l1 * math.cos(q1) - l2 * math.cos(q12)


@njit(cache=True)
def _jac(q1, q2, l1, l2):
    q12 = q1 + q2
    c1, s1 = math.cos(q1), math.sin(q1)
    c12, s12 = math.cos(q12), math.sin(q12)
    return (l1 * c1 + l2 * c12, l2 * c12,
            l1 * s1 + l2 * s12, l2 * s12)


def forward_kinematics(theta_hip: float, theta_knee: float, geom: LegGeometry,
                       qdot=None) -> FootState:
    """Foot position (and velocity, when joint rates are given) in the hip frame."""
    x, z = _fk(float(theta_hip), float(theta_knee), geom.l1, geom.l2)
    xdot = (0.0, 0.0)
    if qdot is not None:
        xdot = jacobian(theta_hip, theta_knee, geom) @ np.asarray(qdot, dtype=float)
    return FootState.from_cartesian((x, z), xdot)


def inverse_kinematics(x, geom: LegGeometry) -> np.ndarray:
    """Joint angles ``(theta_hip, theta_knee)`` placing the foot at ``x``."""
    px, pz = float(x[0]), float(x[1])
    r = math.hypot(px, pz)
    l1, l2 = geom.l1, geom.l2
    tol = 1e-12 * geom.r_max
    if r < geom.r_min - tol or r > geom.r_max + tol:
        raise WorkspaceError(r, geom.r_min, geom.r_max)
    c2 = (r * r - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    q2 = geom.knee_sign * math.acos(min(1.0, max(-1.0, c2)))
    q1 = math.atan2(px, -pz) - math.atan2(l2 * math.sin(q2), l1 + l2 * math.cos(q2))
    return np.array([q1, q2])


def jacobian(theta_hip: float, theta_knee: float, geom: LegGeometry) -> np.ndarray:
    """2x2 foot Jacobian: ``xdot = J @ qdot``."""
    a, b, c, d = _jac(float(theta_hip), float(theta_knee), geom.l1, geom.l2)
    return np.array([[a, b], [c, d]])


def jacobian_rate_product(q, qdot, geom: LegGeometry) -> np.ndarray:
    """``Jdot @ qdot``, the velocity-product part of foot acceleration."""
    q1, q2 = q
    w1, w12 = qdot[0], qdot[0] + qdot[1]
    l1, l2 = geom.l1, geom.l2
    return np.array([
        -l1 * math.sin(q1) * w1**2 - l2 * math.sin(q1 + q2) * w12**2,
        l1 * math.cos(q1) * w1**2 + l2 * math.cos(q1 + q2) * w12**2,
    ])


def radial_error(x_des: FootState, x: FootState) -> tuple[float, float]:
    """Radial position and radial velocity error, desired minus actual."""
    return x_des.r - x.r, x_des.rdot - x.rdot


def knee_radial_lever(theta_knee: float, geom: LegGeometry) -> float:
    """``dr/dtheta_knee``: radial foot motion per unit knee rotation."""
    l1, l2 = geom.l1, geom.l2
    r = math.sqrt(l1 * l1 + l2 * l2 + 2.0 * l1 * l2 * math.cos(theta_knee))
    return -l1 * l2 * math.sin(theta_knee) / r
