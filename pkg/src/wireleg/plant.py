"""Motor-wire-load dynamics of one actuated joint, plus unilateral ground contact.

A knee joint is a two-mass chain: the motor (inertia ``J_m``) drives the load
(``J_l``) through a steel wire modelled as a torsional spring ``K_w``.  The wire
torque on the load is a state whose rate is ``K_w * (omega_m - omega_l)``.
Hip joints are rigidly connected; they collapse to a single inertia
``J_m + J_l`` with the friction of both sides summed.

Coulomb friction is smoothed with ``tanh(omega / eps_v)`` so that fixed-step
explicit integration does not chatter at zero velocity.

State vectors used by the compiled kernels are ordered
``[theta_m, omega_m, theta_l, omega_l, tau_l]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np
from numba import njit

STATE_NAMES = ("theta_m", "omega_m", "theta_l", "omega_l", "tau_l")


class IntegrationError(FloatingPointError):
    """Raised when integration produces a non-finite signal."""

    def __init__(self, signal: str, value: float):
        super().__init__(f"integration blew up: {signal} = {value!r}")
        self.signal = signal
        self.value = value


@dataclass(frozen=True)
class PlantParams:
    J_m: float = 0.01
    B_m: float = 0.05
    J_l: float = 0.0008
    B_l: float = 0.2
    K_w: float = 2000.0
    tau_cfm: float = 0.15
    tau_cfl: float = 0.1
    K_I: float = 0.9
    tau_max: float = 33.0
    eps_v: float = 1e-3
    rigid_coupling: bool = False

    def __post_init__(self):
        for name in ("J_m", "B_m", "J_l", "B_l", "K_w", "K_I", "tau_max", "eps_v"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"PlantParams.{name} must be finite and > 0, got {value!r}")
        for name in ("tau_cfm", "tau_cfl"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"PlantParams.{name} must be finite and >= 0, got {value!r}")

    def as_array(self) -> np.ndarray:
        """Pack into the float vector layout the kernels expect."""
        return np.array([
            self.J_m, self.B_m, self.J_l, self.B_l, self.K_w,
            self.tau_cfm, self.tau_cfl, self.eps_v,
            1.0 if self.rigid_coupling else 0.0,
        ])

    def replace(self, **changes) -> "PlantParams":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return PlantParams(**values)


@dataclass
class PlantState:
    theta_m: float = 0.0
    omega_m: float = 0.0
    theta_l: float = 0.0
    omega_l: float = 0.0
    tau_l: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.theta_m, self.omega_m, self.theta_l, self.omega_l, self.tau_l])

    @classmethod
    def from_array(cls, values) -> "PlantState":
        return cls(*(float(v) for v in values))

    def energy(self, params: PlantParams) -> float:
        """Kinetic energy of both inertias plus strain energy of the wire."""
        kinetic = 0.5 * params.J_m * self.omega_m**2 + 0.5 * params.J_l * self.omega_l**2
        if params.rigid_coupling:
            return kinetic
        return kinetic + 0.5 * self.tau_l**2 / params.K_w


@dataclass(frozen=True)
class GroundModel:
    k_g: float = 5e4
    c_g: float = 500.0
    ground_height: float = 0.0

    def __post_init__(self):
        if not self.k_g > 0:
            raise ValueError(f"GroundModel.k_g must be > 0, got {self.k_g!r}")
        if not self.c_g >= 0:
            raise ValueError(f"GroundModel.c_g must be >= 0, got {self.c_g!r}")


@njit(cache=True)
def _friction(omega, tau_cf, B, eps_v):
    return tau_cf * math.tanh(omega / eps_v) + B * omega


def friction_torque(omega: float, tau_cf: float, B: float, eps_v: float = 1e-3) -> float:
    """Coulomb plus viscous friction torque opposing ``omega``.

    The Coulomb part is ``tau_cf * tanh(omega / eps_v)``, so the result is an
    odd function of ``omega`` that vanishes at rest.
    """
    return tau_cf * math.tanh(omega / eps_v) + B * omega


@njit(cache=True)
def _joint_rates(x, tau_out, tau_ext, p, out):
    # p = [J_m, B_m, J_l, B_l, K_w, tau_cfm, tau_cfl, eps_v, rigid]
    J_m, B_m, J_l, B_l, K_w = p[0], p[1], p[2], p[3], p[4]
    eps_v = p[7]
    if p[8] != 0.0:
        w = x[1]
        fric = _friction(w, p[5], B_m, eps_v) + _friction(w, p[6], B_l, eps_v)
        acc = (tau_out - fric - tau_ext) / (J_m + J_l)
        out[0] = w
        out[1] = acc
        out[2] = w
        out[3] = acc
        out[4] = 0.0
        return
    out[0] = x[1]
    out[1] = (tau_out - _friction(x[1], p[5], B_m, eps_v) - x[4]) / J_m
    out[2] = x[3]
    out[3] = (x[4] - _friction(x[3], p[6], B_l, eps_v) - tau_ext) / J_l
    out[4] = K_w * (x[1] - x[3])


@njit(cache=True)
def _rk4_joint(x, tau_out, tau_ext, p, dt, n_steps, load_locked):
    n = x.shape[0]
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    y = x.copy()
    for _ in range(n_steps):
        _joint_rates(y, tau_out, tau_ext, p, k1)
        if load_locked:
            k1[2] = 0.0
            k1[3] = 0.0
        for i in range(n):
            tmp[i] = y[i] + 0.5 * dt * k1[i]
        _joint_rates(tmp, tau_out, tau_ext, p, k2)
        if load_locked:
            k2[2] = 0.0
            k2[3] = 0.0
        for i in range(n):
            tmp[i] = y[i] + 0.5 * dt * k2[i]
        _joint_rates(tmp, tau_out, tau_ext, p, k3)
        if load_locked:
            k3[2] = 0.0
            k3[3] = 0.0
        for i in range(n):
            tmp[i] = y[i] + dt * k3[i]
        _joint_rates(tmp, tau_out, tau_ext, p, k4)
        if load_locked:
            k4[2] = 0.0
            k4[3] = 0.0
        for i in range(n):
            y[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return y


def _check_inputs(state: PlantState, tau_out: float, tau_ext: float):
    for name in STATE_NAMES:
        value = getattr(state, name)
        if not math.isfinite(value):
            raise ValueError(f"non-finite state {name} = {value!r}")
    if not (math.isfinite(tau_out) and math.isfinite(tau_ext)):
        raise ValueError(f"non-finite input torque (tau_out={tau_out!r}, tau_ext={tau_ext!r})")


def check_finite(values, names=STATE_NAMES):
    """Raise :class:`IntegrationError` naming the first non-finite entry."""
    values = np.asarray(values)
    if np.all(np.isfinite(values)):
        return
    idx = int(np.flatnonzero(~np.isfinite(values))[0])
    raise IntegrationError(names[idx], float(values[idx]))


def plant_derivatives(state: PlantState, tau_out: float, tau_ext: float,
                      params: PlantParams) -> PlantState:
    """Time derivative of the joint state.

    ``tau_ext`` is the external load torque opposing the load side (ground
    reaction mapped through the Jacobian transpose, link gravity, ...).
    """
    _check_inputs(state, tau_out, tau_ext)
    out = np.empty(5)
    _joint_rates(state.as_array(), float(tau_out), float(tau_ext), params.as_array(), out)
    return PlantState.from_array(out)


def step(state: PlantState, tau_out: float, tau_ext: float, params: PlantParams,
         dt: float, n_steps: int = 1, load_locked: bool = False) -> PlantState:
    """Advance ``state`` by ``n_steps`` fixed RK4 steps of size ``dt``.

    Inputs are held constant across the call.  With ``load_locked`` the load
    side is clamped (used for the locked-joint torque bench).
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    _check_inputs(state, tau_out, tau_ext)
    x = state.as_array()
    if load_locked:
        x[3] = 0.0
    y = _rk4_joint(x, float(tau_out), float(tau_ext), params.as_array(), float(dt),
                   int(n_steps), bool(load_locked))
    check_finite(y)
    return PlantState.from_array(y)


def ground_reaction(foot_height: float, foot_vertical_velocity: float,
                    ground: GroundModel) -> float:
    """Vertical force of a unilateral spring-damper ground; never tensile."""
    penetration = ground.ground_height - foot_height
    if penetration <= 0.0:
        return 0.0
    force = ground.k_g * penetration - ground.c_g * foot_vertical_velocity
    return max(0.0, force)


def transfer_function_coeffs(params: PlantParams) -> tuple[np.ndarray, np.ndarray]:
    """Numerator and denominator (descending powers of s) of omega_l / tau_out.

    The denominator expands
    ``(K_w + J_l s^2 + B_l s)(J_m s + B_m) + K_w (J_l s + B_l)``.
    """
    if params.rigid_coupling:
        raise ValueError("transfer function is only defined for wire-coupled joints")
    J_m, B_m, J_l, B_l, K_w = params.J_m, params.B_m, params.J_l, params.B_l, params.K_w
    den = np.array([
        J_l * J_m,
        J_l * B_m + B_l * J_m,
        K_w * J_m + B_l * B_m + K_w * J_l,
        K_w * B_m + K_w * B_l,
    ])
    return np.array([K_w]), den
