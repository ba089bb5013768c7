"""Cascaded leg controller.

Outer loop (default 1 kHz): a Cartesian virtual spring-damper whose stiffness
and damping follow nonlinear schedules of the radial foot error, wire
compensation of the commanded stiffness, and a model-based feed-forward
(desired joint acceleration, friction, Coriolis, link gravity).

Inner loop (default 5 kHz, one instance per joint): PI on motor current,
followed by a first-order low-pass and torque saturation.

The knee encoder sits on the motor side of the wire, so the controller sees
``theta_m`` for the knee; the load velocity used for friction compensation
comes from :class:`LoadVelocityEstimator`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .kinematics import (FootState, LegGeometry, forward_kinematics, jacobian,
                         knee_radial_lever, radial_error)
from .leg import LinkMasses
from .plant import PlantParams, friction_torque


@dataclass(frozen=True)
class PiGains:
    K_p: float = 10.0
    K_i: float = 3800.0
    filter_cutoff_hz: float = 20.0
    rate_hz: float = 5000.0
    outer_rate_hz: float = 1000.0

    def __post_init__(self):
        if self.K_p < 0 or self.K_i < 0:
            raise ValueError("PI gains must be non-negative")
        if not (self.filter_cutoff_hz > 0 and self.rate_hz > 0 and self.outer_rate_hz > 0):
            raise ValueError("filter cutoff and loop rates must be positive")
        ratio = self.rate_hz / self.outer_rate_hz
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError(f"outer rate {self.outer_rate_hz} Hz must divide inner rate "
                             f"{self.rate_hz} Hz")

    @property
    def inner_per_outer(self) -> int:
        return int(round(self.rate_hz / self.outer_rate_hz))

    @property
    def filter_alpha(self) -> float:
        """Exact discretisation of the first-order low-pass at the inner rate."""
        return 1.0 - math.exp(-2.0 * math.pi * self.filter_cutoff_hz / self.rate_hz)


MODES = ("nonlinear", "linear", "span", "exponential")


@dataclass(frozen=True)
class GainSchedule:
    """Virtual spring/damper schedule parameters.

    ``linear`` mode uses ``K_vs1`` and ``K_d1`` as constants.  ``span`` uses
    the stiffness schedule with the constant damping ``K_d1 + K_d2 / 2``.
    ``exponential`` is the characterisation spring ``K_e * (exp(|e|) - 1)``
    with constant damping ``K_d1``.
    """
    mode: str = "nonlinear"
    K_vs1: float = 500.0
    K_vs2: float = 500.0
    K_cv: float = 50.0
    K_d1: float = 50.0
    K_d2: float = 100.0
    K_cd: float = 10.0
    K_e: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown schedule mode {self.mode!r}; expected one of {MODES}")
        if self.mode == "exponential":
            if not self.K_e > 0:
                raise ValueError("exponential schedule needs K_e > 0")
        elif not self.K_vs1 > 0:
            raise ValueError(f"K_vs1 must be > 0, got {self.K_vs1}")
        if not self.K_d1 > 0:
            raise ValueError(f"K_d1 must be > 0, got {self.K_d1}")
        if self.K_vs2 < 0 or self.K_d2 < 0:
            raise ValueError("K_vs2 and K_d2 must be >= 0")
        if not (self.K_cv > 0 and self.K_cd > 0):
            raise ValueError("K_cv and K_cd must be > 0")

    @classmethod
    def linear(cls, K_vs: float, K_d: float, name: str = "") -> "GainSchedule":
        return cls(mode="linear", K_vs1=K_vs, K_vs2=0.0, K_d1=K_d, K_d2=0.0,
                   name=name or f"linear K_vs={K_vs:g} K_d={K_d:g}")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.mode == "linear":
            return f"linear K_vs={self.K_vs1:g} K_d={self.K_d1:g}"
        return self.mode

    @property
    def stiffness_peak(self) -> float:
        if self.mode == "linear":
            return self.K_vs1
        return self.K_vs1 + self.K_vs2

    @property
    def damping_range(self) -> tuple[float, float]:
        if self.mode in ("linear", "exponential"):
            return self.K_d1, self.K_d1
        if self.mode == "span":
            return (self.K_d1 + self.K_d2 / 2,) * 2
        return self.K_d1, self.K_d1 + self.K_d2


@dataclass
class PiState:
    integrator: float = 0.0
    filtered: float = 0.0
    saturated: bool = False


def erf(x: float) -> float:
    """Gauss error function."""
    return math.erf(x)


def stiffness_schedule(radial_pos_error: float, sched: GainSchedule) -> float:
    """Virtual stiffness for a radial position error (N/m)."""
    if sched.mode == "linear":
        return sched.K_vs1
    if sched.mode == "exponential":
        return sched.K_e * math.expm1(abs(radial_pos_error))
    arg = sched.K_cv * radial_pos_error
    if abs(arg) > 700.0:
        return sched.K_vs1
    return sched.K_vs1 + 2.0 * sched.K_vs2 / (math.exp(arg) + math.exp(-arg))


def damping_schedule(radial_vel_error: float, sched: GainSchedule) -> float:
    """Virtual damping for a radial velocity error (N*s/m).

    Positive error (leg compressing faster than desired) lowers the damping.
    """
    if sched.mode in ("linear", "exponential"):
        return sched.K_d1
    if sched.mode == "span":
        return sched.K_d1 + sched.K_d2 / 2.0
    return sched.K_d1 + sched.K_d2 * (1.0 + erf(-sched.K_cd * radial_vel_error)) / 2.0


def compensate_wire(K_des: float, K_w_cart: float) -> float:
    """Commanded stiffness whose series combination with the wire equals ``K_des``."""
    if math.isinf(K_w_cart):
        return K_des
    if K_des >= K_w_cart:
        raise ValueError(f"desired stiffness {K_des:g} N/m must be below the reflected wire "
                         f"stiffness {K_w_cart:g} N/m")
    return K_des * K_w_cart / (K_w_cart - K_des)


def reflected_wire_stiffness(theta_knee: float, geom: LegGeometry, K_w: float) -> float:
    """Knee wire stiffness seen along the radial foot direction (N/m)."""
    lever = knee_radial_lever(theta_knee, geom)
    if lever == 0.0:
        return math.inf
    return K_w / lever**2


def gravity_torque(q, geom: LegGeometry, links: LinkMasses) -> np.ndarray:
    """Joint torques that hold the lumped link masses against gravity."""
    q1, q2 = q
    g = links.gravity
    m1, m2 = links.thigh_mass, links.shank_mass
    s1, s12 = math.sin(q1), math.sin(q1 + q2)
    t2 = g * m2 * links.shank_com * geom.l2 * s12
    t1 = g * (m1 * links.thigh_com * geom.l1 * s1 + m2 * geom.l1 * s1) + t2
    return np.array([t1, t2])


def coriolis_torque(q, qdot, geom: LegGeometry, links: LinkMasses) -> np.ndarray:
    """Velocity-product torques of the two-link chain with point-mass links."""
    h = links.shank_mass * geom.l1 * links.shank_com * geom.l2 * math.sin(q[1])
    w1, w2 = qdot
    return np.array([-h * (2.0 * w1 * w2 + w2 * w2), h * w1 * w1])


def feedforward_torque(alpha_ref, omega_m, omega_l_hat, q, hip: PlantParams,
                       knee: PlantParams, geom: LegGeometry, links: LinkMasses,
                       eps_v: float | None = None, coriolis: bool = True) -> np.ndarray:
    """Model-based torque for the desired joint accelerations.

    Per joint: ``(J_m + J_l) * alpha_ref`` plus motor and load friction
    evaluated at the measured motor and estimated load velocities, plus
    Coriolis and link gravity.
    """
    tau = np.empty(2)
    for i, p in enumerate((hip, knee)):
        eps = p.eps_v if eps_v is None else eps_v
        tau[i] = ((p.J_m + p.J_l) * alpha_ref[i]
                  + friction_torque(omega_m[i], p.tau_cfm, p.B_m, eps)
                  + friction_torque(omega_l_hat[i], p.tau_cfl, p.B_l, eps))
    if coriolis:
        tau += coriolis_torque(q, omega_l_hat, geom, links)
    return tau + gravity_torque(q, geom, links)


@lru_cache(maxsize=64)
def _estimator_matrices(J_l: float, B_l: float, K_w: float, dt: float):
    # states: wire deflection, load velocity; input: motor velocity (held over dt)
    M = np.zeros((3, 3))
    M[0, 1] = -1.0
    M[0, 2] = 1.0
    M[1, 0] = K_w / J_l
    M[1, 1] = -B_l / J_l
    E = expm(M * dt)
    return E[:2, :2].copy(), E[:2, 2].copy()


@dataclass
class EstimatorState:
    deflection: float = 0.0
    omega_l_hat: float = 0.0


def reset_estimator(st: EstimatorState, omega_m: float, params: PlantParams):
    """Start from the steady state in which load and motor turn together."""
    st.omega_l_hat = omega_m
    st.deflection = params.B_l * omega_m / params.K_w


def estimate_load_velocity(omega_m: float, st: EstimatorState, params: PlantParams,
                           dt: float) -> float:
    """Advance the load model ``K_w / (J_l s^2 + B_l s + K_w)`` by one cycle.

    ``omega_m`` is held over the cycle; the returned value is the load
    velocity estimate at the end of it.
    """
    Ad, Bd = _estimator_matrices(params.J_l, params.B_l, params.K_w, float(dt))
    d, w = st.deflection, st.omega_l_hat
    st.deflection = Ad[0, 0] * d + Ad[0, 1] * w + Bd[0] * omega_m
    st.omega_l_hat = Ad[1, 0] * d + Ad[1, 1] * w + Bd[1] * omega_m
    return st.omega_l_hat


def pi_torque_step(tau_ref: float, current_measured: float, gains: PiGains, st: PiState,
                   params: PlantParams) -> float:
    """One inner-loop update; returns the saturated motor torque.

    Anti-windup is conditional integration: the integrator freezes while
    the output is saturated and the error pushes further into saturation.
    """
    i_max = params.tau_max / params.K_I
    err = tau_ref / params.K_I - current_measured
    u = gains.K_p * err + st.integrator
    filtered = st.filtered + gains.filter_alpha * (u - st.filtered)
    saturated = abs(filtered) > i_max
    if not (saturated and err * filtered > 0.0):
        st.integrator += gains.K_i * err / gains.rate_hz
    st.filtered = min(i_max, max(-i_max, filtered))
    st.saturated = saturated
    return params.K_I * st.filtered


def compliance_torque(x_des: FootState, x: FootState, K_vs_m, K_d_m, J,
                      tau_alpha) -> np.ndarray:
    """Joint torque realising the virtual spring-damper at the foot."""
    force = (np.asarray(K_vs_m) @ (x_des.x - x.x)
             + np.asarray(K_d_m) @ (x_des.xdot - x.xdot))
    return np.asarray(J).T @ force + np.asarray(tau_alpha)


@dataclass(frozen=True)
class ControllerConfig:
    wire_compensation: str = "reflected"
    fixed_wire_stiffness: float = 1e5
    stance_force: float = 1.0
    stance_steps: int = 2
    coriolis: bool = True
    friction_eps_v: float | None = None
    force_ff_in_stance_only: bool = True

    def __post_init__(self):
        if self.wire_compensation not in ("reflected", "fixed", "off"):
            raise ValueError(f"unknown wire_compensation {self.wire_compensation!r}")


@dataclass
class Observation:
    """What the controller can measure at the start of a cycle."""
    q_hip: float
    w_hip: float
    theta_m_knee: float
    omega_m_knee: float
    currents: tuple[float, float]
    ground_force: float = 0.0


@dataclass
class ControllerState:
    pi: list[PiState] = field(default_factory=lambda: [PiState(), PiState()])
    estimator: EstimatorState = field(default_factory=EstimatorState)
    phase: str = "swing"
    phase_count: int = 0


class Controller:
    """Outer impedance loop driving two inner PI torque loops."""

    def __init__(self, hip: PlantParams, knee: PlantParams, geom: LegGeometry,
                 links: LinkMasses, sched: GainSchedule, gains: PiGains = PiGains(),
                 config: ControllerConfig = ControllerConfig()):
        self.params = (hip, knee)
        self.hip, self.knee = hip, knee
        self.geom = geom
        self.links = links
        self.sched = sched
        self.gains = gains
        self.config = config
        self.st = ControllerState()
        self.outer_dt = 1.0 / gains.outer_rate_hz
        self.inner_dt = 1.0 / gains.rate_hz

    def initialize(self, obs: Observation, tau_hold=(0.0, 0.0), phase: str = "swing"):
        """Seed the estimator and integrators for a steady start."""
        reset_estimator(self.st.estimator, obs.omega_m_knee, self.knee)
        self.st.phase = phase
        self.st.phase_count = 0
        for pi, p, tau in zip(self.st.pi, self.params, tau_hold):
            pi.filtered = tau / p.K_I
            pi.integrator = tau / p.K_I
            pi.saturated = False

    def _update_phase(self, ground_force: float) -> bool:
        """Returns True when a swing phase starts on this cycle."""
        st = self.st
        contact = ground_force > self.config.stance_force
        wanted = "stance" if contact else "swing"
        if wanted == st.phase:
            st.phase_count = 0
            return False
        st.phase_count += 1
        if st.phase_count >= self.config.stance_steps:
            st.phase = wanted
            st.phase_count = 0
            return wanted == "swing"
        return False

    def wire_stiffness_cartesian(self, theta_knee: float) -> float:
        mode = self.config.wire_compensation
        if mode == "off":
            return math.inf
        if mode == "fixed":
            return self.config.fixed_wire_stiffness
        return reflected_wire_stiffness(theta_knee, self.geom, self.knee.K_w)

    def outer(self, ref, obs: Observation) -> dict:
        """Compute the outer-loop torque reference and its intermediate signals."""
        if self._update_phase(obs.ground_force):
            reset_estimator(self.st.estimator, obs.omega_m_knee, self.knee)
        w_hat = estimate_load_velocity(obs.omega_m_knee, self.st.estimator, self.knee,
                                       self.outer_dt)
        q = np.array([obs.q_hip, obs.theta_m_knee])
        qdot = np.array([obs.w_hip, obs.omega_m_knee])
        J = jacobian(q[0], q[1], self.geom)
        foot = forward_kinematics(q[0], q[1], self.geom, qdot)
        des = FootState.from_cartesian(ref.x_des, ref.xdot_des)
        e, edot = radial_error(des, foot)
        K_des = stiffness_schedule(e, self.sched)
        K_d = damping_schedule(edot, self.sched)
        K_vs = compensate_wire(K_des, self.wire_stiffness_cartesian(q[1]))
        tau_alpha = feedforward_torque(ref.alpha_ref, qdot, (obs.w_hip, w_hat), q,
                                       self.hip, self.knee, self.geom, self.links,
                                       eps_v=self.config.friction_eps_v,
                                       coriolis=self.config.coriolis)
        f_ff = np.asarray(getattr(ref, "force_ff", (0.0, 0.0)), dtype=float)
        if self.config.force_ff_in_stance_only and self.st.phase != "stance":
            f_ff = np.zeros(2)
        tau_alpha = tau_alpha + J.T @ f_ff
        tau_ref = compliance_torque(des, foot, K_vs * np.eye(2), K_d * np.eye(2), J, tau_alpha)
        return {
            "tau_ref": tau_ref, "tau_alpha": tau_alpha, "K_des": K_des, "K_vs": K_vs,
            "K_d": K_d, "omega_l_hat": w_hat, "radial_error": e, "radial_rate_error": edot,
            "foot_meas": foot, "force_ff": f_ff,
        }

    def inner(self, tau_ref, currents) -> np.ndarray:
        return np.array([
            pi_torque_step(tau_ref[i], currents[i], self.gains, self.st.pi[i], self.params[i])
            for i in range(2)
        ])

    def step(self, ref, obs: Observation,
             advance: Callable[[np.ndarray, float], Observation]) -> tuple[dict, Observation]:
        """One outer cycle: outer update followed by the inner-loop steps.

        ``advance(tau_out, dt)`` must move the plant forward by ``dt`` and
        return the new observation.
        """
        signals = self.outer(ref, obs)
        saturated = False
        for _ in range(self.gains.inner_per_outer):
            tau_out = self.inner(signals["tau_ref"], obs.currents)
            saturated = saturated or any(pi.saturated for pi in self.st.pi)
            obs = advance(tau_out, self.inner_dt)
        signals["tau_out"] = tau_out
        signals["saturated"] = saturated
        signals["phase"] = self.st.phase
        return signals, obs


def controller_step(ref, obs: Observation, controller: Controller, advance):
    """Functional entry point mirroring :meth:`Controller.step`."""
    return controller.step(ref, obs, advance)
