"""Closed-loop simulation of the leg under the cascaded controller."""

from __future__ import annotations


import numpy as np

from ..control import (Controller, ControllerConfig, GainSchedule, Observation, PiGains,
                       stiffness_schedule)
from ..kinematics import LegGeometry, inverse_kinematics
from ..leg import KneeLimits, LegSystem, LinkMasses
from ..plant import GroundModel, PlantParams
from .trace import Trace


class ClosedLoop:
    """A :class:`LegSystem` driven by a :class:`Controller`.

    Currents are measured as the torque last applied divided by ``K_I``
    (the current loop is taken as ideal), the knee angle on the motor side.
    """

    def __init__(self, leg: LegSystem, controller: Controller, dt: float = 2e-5):
        n = controller.inner_dt / dt
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise ValueError(f"plant step {dt} must divide the inner period {controller.inner_dt}")
        self.leg = leg
        self.controller = controller
        self.dt = dt
        self.substeps = int(round(n))
        self.tau_out = np.zeros(2)
        self.time = 0.0
        self._step = 0

    def observe(self) -> Observation:
        x = self.leg.state
        hip, knee = self.controller.params
        _, _, grf = self.leg.foot_forces()
        return Observation(
            q_hip=float(x[0]), w_hip=float(x[1]),
            theta_m_knee=float(x[2]), omega_m_knee=float(x[3]),
            currents=(self.tau_out[0] / hip.K_I, self.tau_out[1] / knee.K_I),
            ground_force=grf,
        )

    def _advance(self, tau_out, dt) -> Observation:
        self.tau_out = np.asarray(tau_out, dtype=float)
        self.leg.advance(self.tau_out[0], self.tau_out[1], self.dt, self.substeps)
        return self.observe()

    def hold(self, x_foot, body_z=None, phase: str = "swing"):
        """Place the leg at rest with the foot at ``x_foot`` and preload the loops.

        The knee wire is pre-tensioned with the static link-gravity torque so
        the start is free of transients from the transmission.
        """
        q = inverse_kinematics(x_foot, self.leg.geom)
        leg = self.leg
        leg.set_joint_state(q[0], 0.0, q[1], 0.0, q[1], 0.0, 0.0)
        if body_z is not None:
            leg.set_body(body_z)
        g = leg.gravity_torque()
        knee = self.controller.knee
        # motor leads the load by the wire deflection carrying the gravity torque
        leg.set_joint_state(q[0], 0.0, q[1] + g[1] / knee.K_w, 0.0, q[1], 0.0, g[1])
        self.tau_out = np.array(g, dtype=float)
        self.controller.initialize(self.observe(), tau_hold=g, phase=phase)

    def run(self, reference, duration: float, trace: Trace | None = None,
            push=None) -> Trace:
        """Simulate ``duration`` seconds; ``reference(t)`` returns a sample.

        ``push(t)``, when given, adds a vertical foot force (N, positive
        down into the ground) to the feed-forward channel.
        """
        ctrl = self.controller
        trace = trace if trace is not None else Trace()
        n_outer = int(round(duration / ctrl.outer_dt))
        obs = self.observe()
        for _ in range(n_outer):
            t = self._step * ctrl.outer_dt
            ref = reference(t)
            if push is not None:
                f = push(t)
                if f:
                    ref.force_ff = np.array([0.0, -f])
            pre = self.leg.state.copy()
            grf = obs.ground_force
            signals, obs = ctrl.step(ref, obs, self._advance)
            signals["ground_force"] = grf
            trace.record(t, pre, ref, signals, self)
            self._step += 1
        self.time = self._step * ctrl.outer_dt
        return trace


def build_loop(hip: PlantParams, knee: PlantParams, geom: LegGeometry, sched: GainSchedule,
               gains: PiGains = PiGains(), config: ControllerConfig = ControllerConfig(),
               links: LinkMasses = LinkMasses(), ground: GroundModel = GroundModel(),
               body_mode: str = "fixed", body_mass: float = 3.75, body_height: float = 1.0,
               knee_limits: KneeLimits = KneeLimits(), load_locked: bool = False,
               dt: float = 2e-5) -> ClosedLoop:
    leg = LegSystem(hip, knee, geom, links, ground, body_mode=body_mode, body_mass=body_mass,
                    body_height=body_height, knee_limits=knee_limits, load_locked=load_locked)
    ctrl = Controller(hip, knee, geom, links, sched, gains, config)
    return ClosedLoop(leg, ctrl, dt)


def static_sag(sched: GainSchedule, load: float, iters: int = 200) -> float:
    """Radial compression at which the virtual spring carries ``load`` (N)."""
    if sched.mode == "linear":
        return load / sched.K_vs1
    lo, hi = 0.0, load / sched.K_vs1
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid * stiffness_schedule(mid, sched) < load:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def settle_index(signal, target: float, band: float) -> int:
    """First index after which ``|signal - target| <= band`` holds for good."""
    outside = np.flatnonzero(np.abs(np.asarray(signal) - target) > band)
    return 0 if outside.size == 0 else int(outside[-1]) + 1

