"""Simulation and control of a wire-driven two-link leg with nonlinear compliance."""

from .control import (Controller, ControllerConfig, GainSchedule, PiGains, compensate_wire,
                      compliance_torque, damping_schedule, erf, estimate_load_velocity,
                      feedforward_torque, pi_torque_step, stiffness_schedule)
from .kinematics import (FootState, LegGeometry, WorkspaceError, forward_kinematics,
                         inverse_kinematics, jacobian, radial_error)
from .plant import (GroundModel, IntegrationError, PlantParams, PlantState, friction_torque,
                    ground_reaction, plant_derivatives, step, transfer_function_coeffs)
from .stability import (PopovCoeffs, StabilityReport, certify_schedule, kvs_max_closed_form,
                        kvs_max_numeric, popov_coeffs, popov_point)
from .trajectory import GaitParams, cpg_sample, impulse_profile, sinusoid_radial

__version__ = "0.1.0"

__all__ = [
    "Controller", "ControllerConfig", "FootState", "GainSchedule", "GaitParams", "GroundModel",
    "IntegrationError", "LegGeometry", "PiGains", "PlantParams", "PlantState", "PopovCoeffs",
    "StabilityReport", "WorkspaceError", "certify_schedule", "compensate_wire",
    "compliance_torque", "cpg_sample", "damping_schedule", "erf", "estimate_load_velocity",
    "feedforward_torque", "forward_kinematics", "friction_torque", "ground_reaction",
    "impulse_profile", "inverse_kinematics", "jacobian", "kvs_max_closed_form",
    "kvs_max_numeric", "pi_torque_step", "plant_derivatives", "popov_coeffs", "popov_point",
    "radial_error", "sinusoid_radial", "step", "stiffness_schedule", "transfer_function_coeffs",
]
