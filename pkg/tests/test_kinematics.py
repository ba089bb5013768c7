import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wireleg.kinematics import (FootState, LegGeometry, WorkspaceError, forward_kinematics,
                                inverse_kinematics, jacobian, jacobian_rate_product,
                                knee_radial_lever, radial_error)

GEOM = LegGeometry()


def fd_jacobian(q1, q2, geom, h=1e-6):
    J = np.empty((2, 2))
    for j, dq in enumerate(((h, 0.0), (0.0, h))):
        plus = forward_kinematics(q1 + dq[0], q2 + dq[1], geom).x
        minus = forward_kinematics(q1 - dq[0], q2 - dq[1], geom).x
        J[:, j] = (plus - minus) / (2 * h)
    return J


def test_fully_extended_radius():
    assert forward_kinematics(0.3, 0.0, GEOM).r == pytest.approx(0.35, abs=1e-15)


def test_right_angle_knee_radius():
    r = forward_kinematics(0.0, math.pi / 2, GEOM).r
    assert r == pytest.approx(math.hypot(0.225, 0.125), abs=1e-15)
    assert r == pytest.approx(0.2574, abs=1e-4)


def test_hanging_leg_points_down():
    foot = forward_kinematics(0.0, 0.0, GEOM).x
    assert foot[0] == pytest.approx(0.0, abs=1e-15)
    assert foot[1] == pytest.approx(-0.35)


def test_ik_extremes():
    assert inverse_kinematics((0.0, -0.35), GEOM)[1] == pytest.approx(0.0, abs=1e-7)
    assert abs(inverse_kinematics((0.0, -0.1), GEOM)[1]) == pytest.approx(math.pi, abs=1e-7)


def test_ik_round_trip_example():
    target = np.array([0.3 * math.sin(0.2), -0.3 * math.cos(0.2)])
    q = inverse_kinematics(target, GEOM)
    assert forward_kinematics(q[0], q[1], GEOM).r == pytest.approx(0.3, abs=1e-12)


def test_ik_branch_sign():
    q = inverse_kinematics((0.05, -0.25), LegGeometry(knee_sign=-1))
    assert q[1] < 0


def test_ik_rejects_unreachable():
    with pytest.raises(WorkspaceError) as info:
        inverse_kinematics((0.0, -0.4), GEOM)
    assert info.value.r == pytest.approx(0.4)
    assert (info.value.r_min, info.value.r_max) == pytest.approx((0.1, 0.35))


def test_geometry_validation():
    with pytest.raises(ValueError):
        LegGeometry(l1=0.0)
    with pytest.raises(ValueError):
        LegGeometry(knee_sign=0)


@given(r=st.floats(0.11, 0.345), phi=st.floats(-1.2, 1.2))
def test_ik_round_trip(r, phi):
    target = np.array([r * math.sin(phi), -r * math.cos(phi)])
    q = inverse_kinematics(target, GEOM)
    assert np.max(np.abs(forward_kinematics(q[0], q[1], GEOM).x - target)) < 1e-12


@given(q1=st.floats(-2, 2), q2=st.floats(-3, 3))
def test_jacobian_matches_finite_differences(q1, q2):
    err = np.abs(jacobian(q1, q2, GEOM) - fd_jacobian(q1, q2, GEOM))
    assert err.max() < 1e-6


def test_jacobian_singular_at_extension():
    assert np.linalg.det(jacobian(0.4, 0.0, GEOM)) == pytest.approx(0.0, abs=1e-15)


def test_jacobian_determinant_closed_form():
    knees = np.linspace(-3, 3, 61)
    dets = [np.linalg.det(jacobian(0.1, q2, GEOM)) for q2 in knees]
    np.testing.assert_allclose(dets, 0.225 * 0.125 * np.sin(knees), atol=1e-15)
    assert abs(knees[np.argmax(np.abs(dets))]) == pytest.approx(math.pi / 2, abs=0.06)


def test_foot_velocity_uses_jacobian():
    foot = forward_kinematics(0.2, 0.7, GEOM, qdot=(1.0, -2.0))
    np.testing.assert_allclose(foot.xdot, jacobian(0.2, 0.7, GEOM) @ [1.0, -2.0])
    assert foot.rdot == pytest.approx(foot.x @ foot.xdot / foot.r)


def test_jacobian_rate_product_by_differences():
    q, qdot, h = np.array([0.3, 0.9]), np.array([1.5, -0.7]), 1e-6
    Jp = jacobian(*(q + h * qdot), GEOM)
    Jm = jacobian(*(q - h * qdot), GEOM)
    fd = (Jp - Jm) / (2 * h) @ qdot
    np.testing.assert_allclose(jacobian_rate_product(q, qdot, GEOM), fd, atol=1e-8)


def test_knee_radial_lever_by_differences():
    h = 1e-6
    for q2 in (0.3, 1.0, 2.0):
        r = lambda q: forward_kinematics(0.0, q, GEOM).r  # noqa: E731
        assert knee_radial_lever(q2, GEOM) == pytest.approx((r(q2 + h) - r(q2 - h)) / (2 * h),
                                                            rel=1e-7)


def test_radial_error_examples():
    a = FootState.from_cartesian((0.0, -0.30))
    b = FootState.from_cartesian((0.0, -0.28))
    assert radial_error(a, a) == (0.0, 0.0)
    assert radial_error(a, b)[0] == pytest.approx(0.02)


@given(st.floats(-0.3, 0.3), st.floats(-0.3, -0.1), st.floats(-1, 1), st.floats(-1, 1),
       st.floats(-0.3, 0.3), st.floats(-0.3, -0.1))
def test_radial_error_antisymmetric(x1, z1, vx, vz, x2, z2):
    a = FootState.from_cartesian((x1, z1), (vx, vz))
    b = FootState.from_cartesian((x2, z2), (vz, vx))
    ea, eb = radial_error(a, b), radial_error(b, a)
    assert ea[0] == -eb[0] and ea[1] == -eb[1]
