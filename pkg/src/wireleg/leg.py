"""Closed physical model of one planar leg: rigid hip, wire-driven knee, body.

The leg links are treated as massless for translation; their rotational
inertia is part of each joint's ``J_l`` and their weight enters as a joint
gravity torque.  The body (when free) moves vertically only and receives the
foot force directly.  External forces on the foot come from the ground and,
for characterisation runs, from a stiff displacement-controlled probe.

The full state vector is ``[q_hip, w_hip, th_m, w_m, th_l, w_l, tau_l, z_b, v_b]``
where the knee entries follow the joint layout of :mod:`wireleg.plant`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .kinematics import LegGeometry, _fk, _jac
from .plant import GroundModel, PlantParams, _joint_rates, check_finite

STATE_NAMES = ("q_hip", "w_hip", "theta_m_knee", "omega_m_knee", "theta_l_knee",
               "omega_l_knee", "tau_l_knee", "z_body", "v_body")

BODY_FIXED = 0
BODY_FREE = 1

# indices into the leg parameter vector
_L1, _L2, _M1, _M2, _C1, _C2, _G = 0, 1, 2, 3, 4, 5, 6
_KG, _CG, _GH = 7, 8, 9
_BODY, _MB, _ZFIX = 10, 11, 12
_PROBE, _PX, _PZ, _KP, _CP = 13, 14, 15, 16, 17
_LOCK, _STOP_LO, _STOP_HI, _KSTOP, _CSTOP, _KSIGN = 18, 19, 20, 21, 22, 23
_PVX, _PVZ = 24, 25
_NPARAM = 26


@dataclass(frozen=True)
class LinkMasses:
    """Lumped link masses used for gravity (and Coriolis feed-forward)."""
    thigh_mass: float = 0.5
    shank_mass: float = 0.15
    thigh_com: float = 0.5
    shank_com: float = 0.5
    gravity: float = 9.81


@dataclass(frozen=True)
class KneeLimits:
    lower: float = 0.35
    upper: float = 2.8
    stiffness: float = 200.0
    damping: float = 1.0


@njit(cache=True)
def _gravity_torque(q1, q2, lp):
    g = lp[_G]
    l1, l2 = lp[_L1], lp[_L2]
    m1, m2 = lp[_M1], lp[_M2]
    s1 = math.sin(q1)
    s12 = math.sin(q1 + q2)
    t2 = g * m2 * lp[_C2] * l2 * s12
    t1 = g * (m1 * lp[_C1] * l1 * s1 + m2 * l1 * s1) + t2
    return t1, t2


@njit(cache=True)
def _foot_forces(x, lp):
    """Foot force components (ground + probe) and ground force alone."""
    q1, q2 = x[0], x[4]
    w1, w2 = x[1], x[5]
    fx, fz = _fk(q1, q2, lp[_L1], lp[_L2])
    a, b, c, d = _jac(q1, q2, lp[_L1], lp[_L2])
    vx = a * w1 + b * w2
    vz = c * w1 + d * w2
    if lp[_BODY] == BODY_FREE:
        zb, vb = x[7], x[8]
    else:
        zb, vb = lp[_ZFIX], 0.0
    foot_z = zb + fz
    foot_vz = vb + vz
    grf = 0.0
    pen = lp[_GH] - foot_z
    if pen > 0.0:
        grf = lp[_KG] * pen - lp[_CG] * foot_vz
        if grf < 0.0:
            grf = 0.0
    px, pz = 0.0, 0.0
    if lp[_PROBE] != 0.0:
        px = lp[_KP] * (lp[_PX] - fx) + lp[_CP] * (lp[_PVX] - vx)
        pz = lp[_KP] * (lp[_PZ] - foot_z) + lp[_CP] * (lp[_PVZ] - foot_vz)
    return px, grf + pz, grf, a, b, c, d


@njit(cache=True)
def _knee_stop_torque(q2, w2, lp):
    sgn = lp[_KSIGN]
    s = sgn * q2
    sdot = sgn * w2
    if s < lp[_STOP_LO]:
        push = lp[_KSTOP] * (lp[_STOP_LO] - s) - lp[_CSTOP] * sdot
        if push > 0.0:
            return sgn * push
    elif s > lp[_STOP_HI]:
        push = lp[_KSTOP] * (s - lp[_STOP_HI]) + lp[_CSTOP] * sdot
        if push > 0.0:
            return -sgn * push
    return 0.0


@njit(cache=True)
def _leg_rates(x, tau_h, tau_k, ph, pk, lp, out, knee_buf, knee_out):
    Fx, Fz, grf, a, b, c, d = _foot_forces(x, lp)
    g1, g2 = _gravity_torque(x[0], x[4], lp)
    # load torque opposing each joint: gravity minus generalized foot force
    ext_h = g1 - (a * Fx + c * Fz)
    ext_k = g2 - (b * Fx + d * Fz) - _knee_stop_torque(x[4], x[5], lp)

    w = x[1]
    fric = (ph[5] * math.tanh(w / ph[7]) + ph[1] * w
            + ph[6] * math.tanh(w / ph[7]) + ph[3] * w)
    out[0] = w
    out[1] = (tau_h - fric - ext_h) / (ph[0] + ph[2])

    for i in range(5):
        knee_buf[i] = x[2 + i]
    _joint_rates(knee_buf, tau_k, ext_k, pk, knee_out)
    if lp[_LOCK] != 0.0:
        knee_out[2] = 0.0
        knee_out[3] = 0.0
    for i in range(5):
        out[2 + i] = knee_out[i]

    if lp[_BODY] == BODY_FREE:
        out[7] = x[8]
        out[8] = Fz / lp[_MB] - lp[_G]
    else:
        out[7] = 0.0
        out[8] = 0.0


@njit(cache=True)
def _rk4_leg(x, tau_h, tau_k, ph, pk, lp, dt, n_steps):
    n = x.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    kb = np.empty(5)
    ko = np.empty(5)
    y = x.copy()
    for _ in range(n_steps):
        _leg_rates(y, tau_h, tau_k, ph, pk, lp, k1, kb, ko)
        for i in range(n):
            tmp[i] = y[i] + 0.5 * dt * k1[i]
        _leg_rates(tmp, tau_h, tau_k, ph, pk, lp, k2, kb, ko)
        for i in range(n):
            tmp[i] = y[i] + 0.5 * dt * k2[i]
        _leg_rates(tmp, tau_h, tau_k, ph, pk, lp, k3, kb, ko)
        for i in range(n):
            tmp[i] = y[i] + dt * k3[i]
        _leg_rates(tmp, tau_h, tau_k, ph, pk, lp, k4, kb, ko)
        for i in range(n):
            y[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return y


@dataclass
class Probe:
    """Stiff spring-damper pinning the foot to a (possibly moving) world-frame anchor."""
    anchor: tuple[float, float]
    stiffness: float = 2e4
    damping: float = 200.0
    velocity: tuple[float, float] = (0.0, 0.0)


class LegSystem:
    """Mutable simulation of one leg.

    ``body_mode`` is ``"fixed"`` (hip clamped at ``body_height``) or ``"free"``
    (vertical hopper carrying ``body_mass``).
    """

    def __init__(self, hip: PlantParams, knee: PlantParams, geom: LegGeometry,
                 links: LinkMasses = LinkMasses(), ground: GroundModel = GroundModel(),
                 body_mode: str = "fixed", body_mass: float = 3.75,
                 body_height: float = 1.0, knee_limits: KneeLimits = KneeLimits(),
                 load_locked: bool = False):
        if not hip.rigid_coupling:
            raise ValueError("hip joint must be rigidly coupled")
        if knee.rigid_coupling:
            raise ValueError("knee joint must be wire coupled")
        if body_mode not in ("fixed", "free"):
            raise ValueError(f"unknown body_mode {body_mode!r}")
        self.hip = hip
        self.knee = knee
        self.geom = geom
        self.links = links
        self.ground = ground
        self.body_mode = body_mode
        self.body_mass = body_mass
        self.knee_limits = knee_limits
        self._ph = hip.as_array()
        self._pk = knee.as_array()
        lp = np.zeros(_NPARAM)
        lp[_L1], lp[_L2] = geom.l1, geom.l2
        lp[_M1], lp[_M2] = links.thigh_mass, links.shank_mass
        lp[_C1], lp[_C2] = links.thigh_com, links.shank_com
        lp[_G] = links.gravity
        lp[_KG], lp[_CG], lp[_GH] = ground.k_g, ground.c_g, ground.ground_height
        lp[_BODY] = BODY_FREE if body_mode == "free" else BODY_FIXED
        lp[_MB] = body_mass
        lp[_ZFIX] = body_height
        lp[_LOCK] = 1.0 if load_locked else 0.0
        lp[_STOP_LO], lp[_STOP_HI] = knee_limits.lower, knee_limits.upper
        lp[_KSTOP], lp[_CSTOP] = knee_limits.stiffness, knee_limits.damping
        lp[_KSIGN] = float(geom.knee_sign)
        self._lp = lp
        self.state = np.zeros(9)
        self.state[7] = body_height

    def set_probe(self, probe: Probe | None):
        if probe is None:
            self._lp[_PROBE] = 0.0
            return
        self._lp[_PROBE] = 1.0
        self._lp[_PX], self._lp[_PZ] = probe.anchor
        self._lp[_KP], self._lp[_CP] = probe.stiffness, probe.damping
        self._lp[_PVX], self._lp[_PVZ] = probe.velocity

    def set_joint_state(self, q_hip, w_hip, theta_m, omega_m, theta_l, omega_l, tau_l):
        self.state[:7] = (q_hip, w_hip, theta_m, omega_m, theta_l, omega_l, tau_l)

    def set_body(self, z: float, v: float = 0.0):
        self.state[7] = z
        self.state[8] = v
        if self.body_mode == "fixed":
            self._lp[_ZFIX] = z
            self.state[8] = 0.0

    def advance(self, tau_hip: float, tau_knee: float, dt: float, n_steps: int):
        y = _rk4_leg(self.state, float(tau_hip), float(tau_knee), self._ph, self._pk,
                     self._lp, float(dt), int(n_steps))
        check_finite(y, STATE_NAMES)
        self.state = y

    # -- observations -----------------------------------------------------
    @property
    def body_z(self) -> float:
        return float(self.state[7]) if self.body_mode == "free" else float(self._lp[_ZFIX])

    def foot_forces(self) -> tuple[float, float, float]:
        """``(Fx, Fz, ground_force)`` acting on the foot right now."""
        Fx, Fz, grf, *_ = _foot_forces(self.state, self._lp)
        return Fx, Fz, grf

    def foot_true(self) -> tuple[np.ndarray, np.ndarray]:
        """Foot position/velocity relative to the hip from the load-side angles."""
        q1, q2, w1, w2 = self.state[0], self.state[4], self.state[1], self.state[5]
        fx, fz = _fk(q1, q2, self.geom.l1, self.geom.l2)
        a, b, c, d = _jac(q1, q2, self.geom.l1, self.geom.l2)
        return np.array([fx, fz]), np.array([a * w1 + b * w2, c * w1 + d * w2])

    def gravity_torque(self) -> tuple[float, float]:
        return _gravity_torque(self.state[0], self.state[4], self._lp)
