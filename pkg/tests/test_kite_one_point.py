import math

import numpy as np
import pytest

from kitesim.errors import ConfigError, DegenerateFlowError
from kitesim.kite_one_point import (
    AeroTable,
    KiteParams,
    aero_forces,
    angle_of_attack,
    depower_angle,
    gravity_turn_correction,
    kite_frame,
)


def rodrigues(axis, theta):
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0.0, -axis[2], axis[1]],
                  [axis[2], 0.0, -axis[0]],
                  [-axis[1], axis[0], 0.0]])
    return np.eye(3) + math.sin(theta) * K + (1.0 - math.cos(theta)) * K @ K


def flat_table(cl, cd):
    return AeroTable([(-90.0, cl, cd), (90.0, cl, cd)])


def test_depower_angle_value():
    params = KiteParams()
    assert math.degrees(depower_angle(params, 0.26)) == pytest.approx(6.88, abs=5e-3)
    assert depower_angle(params, params.depower_offset) == 0.0
    assert math.degrees(depower_angle(params, params.depower_max)) == \
        pytest.approx(31.0, rel=1e-12)


def test_frame_orthonormal_randomized():
    rng = np.random.default_rng(2)
    for _ in range(300):
        s = rng.normal(0.0, 1.0, 3)
        s /= np.linalg.norm(s)
        v_a = rng.normal(0.0, 10.0, 3)
        if np.linalg.norm(np.cross(v_a, s)) < 1e-3 or np.linalg.norm(v_a) < 0.2:
            continue
        f = kite_frame(s, v_a)
        for a, b in ((f.e_x, f.e_y), (f.e_y, f.e_z), (f.e_x, f.e_z)):
            assert abs(a @ b) < 1e-12
        for e in (f.e_x, f.e_y, f.e_z):
            assert np.linalg.norm(e) == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(np.cross(f.e_x, f.e_y), f.e_z, atol=1e-12)
        assert np.allclose(f.e_z, -s, atol=1e-12)


def test_frame_rotation_property():
    rng = np.random.default_rng(4)
    for _ in range(50):
        s = rng.normal(0.0, 1.0, 3)
        s /= np.linalg.norm(s)
        v_a = rng.normal(0.0, 10.0, 3)
        if np.linalg.norm(np.cross(v_a, s)) < 1e-2:
            continue
        theta = rng.uniform(-2.5, 2.5)
        f0 = kite_frame(s, v_a)
        R = rodrigues(f0.e_z, theta)
        f1 = kite_frame(s, R @ v_a)
        assert np.allclose(f1.e_x, R @ f0.e_x, atol=1e-9)
        assert np.allclose(f1.e_y, R @ f0.e_y, atol=1e-9)


def test_frame_degenerate_flow():
    s = np.array([0.0, 0.0, 1.0])
    with pytest.raises(DegenerateFlowError):
        kite_frame(s, np.array([0.0, 0.0, 0.01]))
    with pytest.raises(DegenerateFlowError):
        kite_frame(s, np.array([0.0, 0.0, 5.0]))  # parallel to the axis


def test_angle_of_attack_head_on_flow():
    params = KiteParams(alpha0_deg=24.0)
    s = np.array([0.0, 0.0, 1.0])
    v_a = np.array([10.0, 0.0, 0.0])
    f = kite_frame(s, v_a)
    # Flow exactly against e_x: alpha = alpha0 - alpha_d.
    v_head_on = -10.0 * f.e_x
    f2 = kite_frame(s, v_head_on + 1e-9 * f.e_z)
    alpha = angle_of_attack(params, f2, v_head_on + 1e-9 * f.e_z, 0.26)
    assert math.degrees(alpha) == pytest.approx(24.0 - 6.88, abs=0.01)


def test_angle_of_attack_parked_geometry():
    # Kite parked at elevation beta: flow angle is 90 deg - beta.
    params = KiteParams(alpha0_deg=0.0)
    beta = math.radians(68.5)
    s = np.array([math.cos(beta), 0.0, math.sin(beta)])
    v_a = np.array([14.0, 0.0, 0.0])
    f = kite_frame(s, v_a)
    alpha = angle_of_attack(params, f, v_a, params.depower_offset)
    assert math.degrees(alpha) == pytest.approx(90.0 - 68.5, abs=1e-9)


def test_aero_table_interpolation():
    # Two knots leave the monotone spline linear between them.
    table = AeroTable([(0.0, 0.0, 0.1), (10.0, 1.0, 0.3)])
    cl, cd = table.coefficients(math.radians(0.0))
    assert (cl, cd) == pytest.approx((0.0, 0.1), abs=1e-12)
    cl, cd = table.coefficients(math.radians(5.0))
    assert cl == pytest.approx(0.5, rel=1e-9)
    assert cd == pytest.approx(0.2, rel=1e-9)
    # Clamped outside the grid.
    assert table.coefficients(math.radians(-20.0)) == \
        pytest.approx((0.0, 0.1), abs=1e-12)
    assert table.coefficients(math.radians(40.0)) == \
        pytest.approx((1.0, 0.3), abs=1e-12)


def test_aero_table_validation():
    with pytest.raises(ConfigError):
        AeroTable([(0.0, 1.0, 0.1)])
    with pytest.raises(ConfigError):
        AeroTable([(0.0, 1.0, 0.1), (0.0, 1.1, 0.2)])


def test_lift_magnitude_and_direction():
    params = KiteParams(table=flat_table(0.8, 0.0), steering_coefficient=0.0)
    s = np.array([0.0, 0.0, 1.0])
    v_a = np.array([20.0, 0.0, 0.0])
    f = kite_frame(s, v_a)
    out = aero_forces(params, f, v_a, 1.225, i_s=0.0, u_s=0.0,
                      u_d=params.depower_offset, psi=0.0, beta=0.0)
    assert np.linalg.norm(out.lift) == pytest.approx(1995.3, abs=0.5)
    assert abs(out.lift @ v_a) < 1e-9 * np.linalg.norm(out.lift) * 20.0


def test_lift_perpendicular_randomized():
    rng = np.random.default_rng(9)
    params = KiteParams()
    for _ in range(100):
        s = rng.normal(0.0, 1.0, 3)
        s /= np.linalg.norm(s)
        v_a = rng.normal(0.0, 15.0, 3)
        if np.linalg.norm(np.cross(v_a, s)) < 1e-2 or np.linalg.norm(v_a) < 1.0:
            continue
        f = kite_frame(s, v_a)
        out = aero_forces(params, f, v_a, 1.2, i_s=0.3, u_s=0.3, u_d=0.25,
                          psi=0.4, beta=0.3)
        v_mag = np.linalg.norm(v_a)
        assert abs(out.lift @ v_a) < 1e-9 * max(np.linalg.norm(out.lift), 1.0) * v_mag
        # Drag is parallel to the apparent wind.
        assert np.linalg.norm(np.cross(out.drag, v_a)) < \
            1e-9 * max(np.linalg.norm(out.drag), 1.0) * v_mag
        # Side force along e_y.
        assert abs(out.side @ f.e_x) < 1e-9 * max(np.linalg.norm(out.side), 1.0)
        assert abs(out.side @ f.e_z) < 1e-9 * max(np.linalg.norm(out.side), 1.0)


def test_gravity_turn_correction_values():
    params = KiteParams()
    assert gravity_turn_correction(params, 20.0, math.pi / 2.0, 0.0) == \
        pytest.approx(0.0465, rel=1e-9)
    # Floor kicks in below 0.1 m/s.
    assert gravity_turn_correction(params, 0.01, math.pi / 2.0, 0.0) == \
        pytest.approx(0.93 / 0.1, rel=1e-12)
    assert gravity_turn_correction(params, 20.0, 0.0, 0.0) == 0.0


def test_steering_drag_penalty():
    params = KiteParams(table=flat_table(0.0, 0.2))
    s = np.array([0.0, 0.0, 1.0])
    v_a = np.array([15.0, 0.0, 0.0])
    f = kite_frame(s, v_a)
    base = aero_forces(params, f, v_a, 1.2, i_s=0.0, u_s=0.0, u_d=0.25,
                       psi=0.0, beta=0.0)
    steered = aero_forces(params, f, v_a, 1.2, i_s=0.0, u_s=1.0, u_d=0.25,
                          psi=0.0, beta=0.0)
    assert np.linalg.norm(steered.drag) == \
        pytest.approx(1.6 * np.linalg.norm(base.drag), rel=1e-12)
    # Commanded steering drives the side force even when actuation lags.
    commanded = aero_forces(params, f, v_a, 1.2, i_s=0.5, u_s=0.0, u_d=0.25,
                            psi=0.0, beta=0.0)
    assert np.linalg.norm(commanded.side) > 0.0
    assert np.allclose(commanded.drag, base.drag)


def test_density_scaling():
    params = KiteParams()
    s = np.array([0.2, 0.0, 1.0])
    s /= np.linalg.norm(s)
    v_a = np.array([18.0, 1.0, -2.0])
    f = kite_frame(s, v_a)
    one = aero_forces(params, f, v_a, 1.0, i_s=0.2, u_s=0.2, u_d=0.25,
                      psi=0.3, beta=0.5)
    two = aero_forces(params, f, v_a, 2.0, i_s=0.2, u_s=0.2, u_d=0.25,
                      psi=0.3, beta=0.5)
    assert np.allclose(two.force, 2.0 * one.force, rtol=1e-12)


def test_mirror_symmetry():
    # Reflecting the geometry across the xz-plane flips the side force.
    params = KiteParams()
    M = np.diag([1.0, -1.0, 1.0])
    s = np.array([0.3, 0.2, 0.9])
    s /= np.linalg.norm(s)
    v_a = np.array([12.0, 3.0, -1.0])
    f = kite_frame(s, v_a)
    out = aero_forces(params, f, v_a, 1.2, i_s=0.4, u_s=0.4, u_d=0.25,
                      psi=0.0, beta=0.0)
    f_m = kite_frame(M @ s, M @ v_a)
    out_m = aero_forces(params, f_m, M @ v_a, 1.2, i_s=-0.4, u_s=0.4,
                        u_d=0.25, psi=0.0, beta=0.0)
    assert np.allclose(out_m.force, M @ out.force, atol=1e-9)


def test_params_validation():
    with pytest.raises(ConfigError):
        KiteParams(area=-1.0)
    with pytest.raises(ConfigError):
        KiteParams(depower_offset=0.5, depower_max=0.4)
