import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from wireleg.plant import (GroundModel, IntegrationError, PlantParams, PlantState,
                           friction_torque, ground_reaction, plant_derivatives, step,
                           transfer_function_coeffs)

LINEAR = PlantParams(tau_cfm=0.0, tau_cfl=0.0)


def linear_state_space(p):
    """Hand-built ``[w_m, w_l, tau_l]`` model of the frictionless joint."""
    A = np.array([
        [-p.B_m / p.J_m, 0.0, -1.0 / p.J_m],
        [0.0, -p.B_l / p.J_l, 1.0 / p.J_l],
        [p.K_w, -p.K_w, 0.0],
    ])
    B = np.array([1.0 / p.J_m, 0.0, 0.0])
    return A, B


# -- friction -------------------------------------------------------------------

def test_friction_direct_value():
    assert friction_torque(1.0, 0.2, 0.1) == pytest.approx(0.3, abs=1e-12)


def test_friction_vanishes_at_rest():
    assert friction_torque(0.0, 0.7, 3.0) == 0.0


@pytest.mark.parametrize("w", [0.01, 1.0, 10.0])
def test_friction_odd(w):
    assert friction_torque(-w, 0.2, 0.1) == -friction_torque(w, 0.2, 0.1)


@given(w=st.floats(-100, 100), cf=st.floats(0, 5), B=st.floats(0, 5))
def test_friction_opposes_motion(w, cf, B):
    f = friction_torque(w, cf, B)
    assert f * w >= 0.0
    assert friction_torque(-w, cf, B) == pytest.approx(-f, abs=1e-12)


# -- derivatives -------------------------------------------------------------------

def test_equilibrium_has_zero_derivative():
    d = plant_derivatives(PlantState(), 0.0, 0.0, PlantParams())
    assert d.as_array().tolist() == [0.0] * 5


def test_wire_torque_rate():
    d = plant_derivatives(PlantState(omega_m=1.0), 0.0, 0.0, PlantParams(K_w=1e4))
    assert d.tau_l == 1e4


def test_derivative_equations():
    p = PlantParams()
    s = PlantState(theta_m=0.1, omega_m=2.0, theta_l=0.05, omega_l=-1.0, tau_l=0.3)
    d = plant_derivatives(s, 1.5, 0.2, p)
    assert d.theta_m == s.omega_m and d.theta_l == s.omega_l
    fm = friction_torque(s.omega_m, p.tau_cfm, p.B_m, p.eps_v)
    fl = friction_torque(s.omega_l, p.tau_cfl, p.B_l, p.eps_v)
    assert d.omega_m == pytest.approx((1.5 - fm - s.tau_l) / p.J_m, rel=1e-12)
    assert d.omega_l == pytest.approx((s.tau_l - fl - 0.2) / p.J_l, rel=1e-12)


@pytest.mark.parametrize("bad", [math.nan, math.inf])
def test_non_finite_inputs_rejected(bad):
    with pytest.raises(ValueError):
        plant_derivatives(PlantState(omega_m=bad), 0.0, 0.0, PlantParams())
    with pytest.raises(ValueError):
        plant_derivatives(PlantState(), bad, 0.0, PlantParams())


def test_params_validated():
    with pytest.raises(ValueError):
        PlantParams(J_m=0.0)
    with pytest.raises(ValueError):
        PlantParams(tau_cfm=-1.0)


# -- stepping -------------------------------------------------------------------

def test_zero_state_stays_zero():
    s = step(PlantState(), 0.0, 0.0, PlantParams(), 1e-3, 10)
    assert s.as_array().tolist() == [0.0] * 5


def test_step_is_bit_deterministic():
    s0 = PlantState(omega_m=0.3, tau_l=0.1)
    a = step(s0, 1.0, 0.1, PlantParams(), 2e-5, 500)
    b = step(s0, 1.0, 0.1, PlantParams(), 2e-5, 500)
    assert a.as_array().tobytes() == b.as_array().tobytes()


def test_richardson_self_convergence():
    p = PlantParams()
    s0 = PlantState()
    coarse = step(s0, 1.0, 0.0, p, 2e-5, 50_000).as_array()
    fine = step(s0, 1.0, 0.0, p, 1e-5, 100_000).as_array()
    rel = np.abs(coarse - fine) / np.maximum(np.abs(fine), 1e-12)
    assert np.max(rel) < 1e-4


def test_local_error_is_fifth_order():
    p = LINEAR
    s0 = PlantState(omega_m=1.0, omega_l=-0.5, tau_l=0.2)
    A, B = linear_state_space(p)
    x0 = np.array([1.0, -0.5, 0.2])
    errs = []
    for h in (4e-4, 2e-4):
        exact = expm(A * h) @ x0
        y = step(s0, 0.0, 0.0, p, h).as_array()[[1, 3, 4]]
        errs.append(np.max(np.abs(y - exact)))
    assert errs[0] / errs[1] == pytest.approx(32.0, rel=0.1)


def test_viscous_decay_closed_form():
    p = PlantParams(tau_cfm=0.0, tau_cfl=0.0, rigid_coupling=True)
    s = step(PlantState(omega_m=2.0, omega_l=2.0), 0.0, 0.0, p, 1e-4, 10_000)
    expected = 2.0 * math.exp(-(p.B_m + p.B_l) / (p.J_m + p.J_l) * 1.0)
    assert s.omega_m == pytest.approx(expected, abs=1e-6)


def test_impulse_response_matches_matrix_exponential():
    # a short torque pulse of unit area approximates the impulse response
    p = LINEAR
    A, B = linear_state_space(p)
    width = 1e-6
    x = step(PlantState(), 1.0 / width, 0.0, p, width, 1)
    out = []
    for _ in range(200):
        x = step(x, 0.0, 0.0, p, 5e-6, 100)
        out.append(x.omega_l)
    t = 5e-4 * np.arange(1, 201) + width
    oracle = [(expm(A * tk) @ B)[1] for tk in t]
    scale = np.max(np.abs(oracle))
    assert np.max(np.abs(np.array(out) - oracle)) / scale < 1e-3


def test_blowup_names_signal():
    p = PlantParams(K_w=1e6)
    with pytest.raises(IntegrationError) as info:
        step(PlantState(omega_m=1.0), 10.0, 0.0, p, 0.1, 2000)
    assert info.value.signal in ("theta_m", "omega_m", "theta_l", "omega_l", "tau_l")


def test_locked_load_stays_put():
    s = step(PlantState(), 5.0, 0.0, PlantParams(), 2e-5, 5000, load_locked=True)
    assert s.omega_l == 0.0 and s.theta_l == 0.0
    assert s.tau_l != 0.0


def test_energy_balance_without_coulomb():
    p = PlantParams(tau_cfm=0.0, tau_cfl=0.0, B_m=0.01, B_l=0.02)
    x = PlantState(omega_m=3.0, omega_l=-1.0, tau_l=0.5)
    dt, n = 1e-5, 20
    e0 = x.energy(p)
    lost = 0.0
    prev = p.B_m * x.omega_m**2 + p.B_l * x.omega_l**2
    for _ in range(2000):
        x = step(x, 0.0, 0.0, p, dt, n)
        now = p.B_m * x.omega_m**2 + p.B_l * x.omega_l**2
        lost += 0.5 * (prev + now) * dt * n
        prev = now
    assert e0 - x.energy(p) == pytest.approx(lost, rel=2e-3)


def test_stiff_wire_approaches_rigid_joint():
    base = dict(tau_cfm=0.0, tau_cfl=0.0)
    stiff = PlantParams(K_w=1e8, **base)
    rigid = PlantParams(rigid_coupling=True, **base)
    a = step(PlantState(), 1.0, 0.0, stiff, 2e-7, 250_000)
    b = step(PlantState(), 1.0, 0.0, rigid, 2e-7, 250_000)
    assert a.omega_l == pytest.approx(b.omega_l, rel=1e-3)
    assert a.theta_l == pytest.approx(b.theta_l, rel=1e-3)


# -- ground -------------------------------------------------------------------

def test_ground_above_is_zero():
    assert ground_reaction(0.01, -1.0, GroundModel()) == 0.0


def test_ground_static_penetration():
    assert ground_reaction(-1e-3, 0.0, GroundModel(k_g=5e4)) == pytest.approx(50.0)


def test_ground_never_pulls():
    assert ground_reaction(-1e-3, 1.0, GroundModel()) == 0.0


@given(h=st.floats(-0.05, 0.05), v=st.floats(-10, 10))
def test_ground_non_negative(h, v):
    assert ground_reaction(h, v, GroundModel()) >= 0.0


def test_ground_validation():
    with pytest.raises(ValueError):
        GroundModel(k_g=0.0)
    with pytest.raises(ValueError):
        GroundModel(c_g=-1.0)


# -- transfer function ------------------------------------------------------------

def test_transfer_coefficients_example():
    p = PlantParams(J_m=0.01, B_m=0.1, J_l=0.02, B_l=0.05, K_w=1e4)
    num, den = transfer_function_coeffs(p)
    assert num.tolist() == [1e4]
    np.testing.assert_allclose(den, [2e-4, 0.0025, 300.005, 1500.0], rtol=1e-12)


def test_transfer_dc_gain():
    p = PlantParams()
    num, den = transfer_function_coeffs(p)
    assert num[-1] / den[-1] == pytest.approx(1.0 / (p.B_m + p.B_l), rel=1e-12)


def test_transfer_matches_product_form():
    p = PlantParams()
    num, den = transfer_function_coeffs(p)
    s = 10j
    direct = np.polyval(num, s) / np.polyval(den, s)
    product = p.K_w / ((p.K_w + p.J_l * s**2 + p.B_l * s) * (p.J_m * s + p.B_m)
                       + p.K_w * (p.J_l * s + p.B_l))
    assert abs(direct - product) <= 1e-12 * abs(product)


def test_transfer_matches_state_space():
    p = PlantParams()
    A, B = linear_state_space(p)
    num, den = transfer_function_coeffs(p)
    for w in (1.0, 100.0, 3000.0):
        s = 1j * w
        ss = np.linalg.solve(s * np.eye(3) - A, B)[1]
        assert abs(np.polyval(num, s) / np.polyval(den, s) - ss) <= 1e-9 * abs(ss)


def test_transfer_rejects_rigid():
    with pytest.raises(ValueError):
        transfer_function_coeffs(PlantParams(rigid_coupling=True))
