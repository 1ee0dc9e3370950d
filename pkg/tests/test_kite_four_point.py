import math

import numpy as np
import pytest

from kitesim.errors import ConfigError, SingularGeometryError
from kitesim.kite_four_point import (
    WING_SPRINGS,
    FourPointGeometry,
    body_frame,
    centre_position,
    drag_scale,
    init_particles,
    pod_mass,
    spring_rest_lengths,
    steering_angle,
    surface_forces,
    wing_masses,
)
from kitesim.kite_one_point import KiteFrame, KiteParams, depower_angle


def make_frame(e_y=None, e_z=None):
    # Forward axis +x so a -x apparent wind hits the wing head on.
    e_y = np.array([0.0, -1.0, 0.0]) if e_y is None else e_y
    e_z = np.array([0.0, 0.0, -1.0]) if e_z is None else e_z
    return KiteFrame(e_x=np.cross(e_y, e_z), e_y=e_y, e_z=e_z)


def test_wing_masses_values():
    m = wing_masses(KiteParams(), FourPointGeometry())
    assert m[0] == pytest.approx(2.9187, rel=1e-12)
    assert m[1] == pytest.approx(1.31652, rel=1e-12)
    assert m[2] == pytest.approx(0.98739, rel=1e-12)
    assert m[3] == pytest.approx(0.98739, rel=1e-12)
    # The whole wing mass is accounted for.
    assert m.sum() == pytest.approx(6.21, rel=1e-12)


def test_pod_mass_value():
    assert pod_mass(KiteParams(), 0.013, 392.0, 7) == pytest.approx(8.764,
                                                                    rel=1e-9)


def test_init_particle_geometry():
    geom = FourPointGeometry()
    frame = make_frame()
    p_kcu = np.array([10.0, -3.0, 250.0])
    pts = init_particles(p_kcu, frame, geom)
    a, b, c, d = pts
    p_c = centre_position(pts)
    assert np.allclose(p_c, p_kcu - geom.bridle_height * frame.e_z, atol=1e-12)
    assert np.linalg.norm(c - d) == pytest.approx(5.2507, abs=1e-4)
    assert np.linalg.norm(b - p_c) == pytest.approx(geom.height, rel=1e-12)
    assert np.linalg.norm(a - p_c) == pytest.approx(
        geom.nose_distance_ratio * geom.effective_width, rel=1e-12)
    # Nose sits forward along e_x, top along -e_z.
    assert (a - p_c) @ frame.e_x > 0.0
    assert (b - p_c) @ frame.e_z < 0.0


def test_body_frame_round_trip():
    geom = FourPointGeometry()
    frame = make_frame()
    pts = init_particles(np.zeros(3), frame, geom)
    rebuilt = body_frame(pts)
    assert np.allclose(rebuilt.e_x, frame.e_x, atol=1e-12)
    assert np.allclose(rebuilt.e_y, frame.e_y, atol=1e-12)
    assert np.allclose(rebuilt.e_z, frame.e_z, atol=1e-12)


def test_body_frame_rigid_rotation():
    rng = np.random.default_rng(6)
    geom = FourPointGeometry()
    pts0 = init_particles(np.zeros(3), make_frame(), geom)
    f0 = body_frame(pts0)
    for _ in range(50):
        q = rng.normal(0.0, 1.0, 4)
        q /= np.linalg.norm(q)
        w, x, y, z = q
        R = np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])
        shift = rng.normal(0.0, 50.0, 3)
        f1 = body_frame(pts0 @ R.T + shift)
        assert np.allclose(f1.e_x, R @ f0.e_x, atol=1e-9)
        assert np.allclose(f1.e_y, R @ f0.e_y, atol=1e-9)
        assert np.allclose(f1.e_z, R @ f0.e_z, atol=1e-9)


def test_body_frame_degenerate():
    pts = np.zeros((4, 3))
    with pytest.raises(SingularGeometryError):
        body_frame(pts)


def test_spring_topology_and_rest_lengths():
    geom = FourPointGeometry()
    rests = spring_rest_lengths(geom)
    assert len(WING_SPRINGS) == 10
    lengths = dict(zip(WING_SPRINGS, rests))
    assert lengths[(2, 3)] == pytest.approx(5.2507, abs=1e-4)
    # Pod-to-top line spans bridle height plus wing height.
    assert lengths[(4, 1)] == pytest.approx(7.13, rel=1e-9)
    assert lengths[(4, 2)] == lengths[(4, 3)]
    assert lengths[(0, 2)] == lengths[(0, 3)]
    assert (rests > 0.0).all()


def test_drag_scale_value():
    assert drag_scale(KiteParams(), FourPointGeometry()) == \
        pytest.approx(0.6454, abs=1e-4)


def test_steering_angle_values():
    kite = KiteParams()
    geom = FourPointGeometry()
    # Fully powered: u_s - u_s0 = 1 swings the full range.
    a = steering_angle(kite, geom, 1.0 + geom.steering_offset, 0.0)
    assert math.degrees(a) == pytest.approx(15.9, rel=1e-12)
    # Fully depowered with coupling 1.5: 2.5 times less sensitive.
    alpha_d = depower_angle(kite, kite.depower_max)
    a = steering_angle(kite, geom, 1.0 + geom.steering_offset, alpha_d)
    assert math.degrees(a) == pytest.approx(6.36, abs=5e-3)


def test_surface_forces_symmetric_flight():
    # Symmetric flow with zero steering: side forces cancel laterally and
    # the top surface lifts straight up.
    kite = KiteParams()
    geom = FourPointGeometry()
    frame = make_frame()
    v = np.array([-15.0, 0.0, 0.0])
    out = surface_forces(kite, geom, frame, v, v, v, rho=1.2,
                         u_s=geom.steering_offset, u_d=kite.depower_offset)
    total = out.force_b + out.force_c + out.force_d
    assert abs(total[1]) < 1e-9
    assert out.alpha_c == pytest.approx(out.alpha_d_surface, rel=1e-12)


def test_surface_forces_steering_asymmetry():
    kite = KiteParams()
    geom = FourPointGeometry()
    frame = make_frame()
    v = np.array([-15.0, 0.0, 0.0])
    out = surface_forces(kite, geom, frame, v, v, v, rho=1.2,
                         u_s=0.3, u_d=kite.depower_offset)
    # Steering tilts the side incidences in opposite directions.
    assert out.alpha_c != pytest.approx(out.alpha_d_surface)
    total = out.force_b + out.force_c + out.force_d
    assert abs(total[1]) > 1.0


def test_surface_angles_parked_geometry():
    # Parked at elevation beta: top surface sees 90 - beta, sides see their
    # built-in incidence.
    kite = KiteParams(alpha0_deg=0.0)
    geom = FourPointGeometry(steering_offset=0.0)
    beta = math.radians(68.5)
    up = np.array([math.cos(beta), 0.0, math.sin(beta)])  # along the tether
    e_z = -up
    e_y = np.array([0.0, 1.0, 0.0])
    frame = KiteFrame(e_x=np.cross(e_y, e_z), e_y=e_y, e_z=e_z)
    v = np.array([14.0, 0.0, 0.0])
    out = surface_forces(kite, geom, frame, v, v, v, rho=1.2, u_s=0.0,
                         u_d=kite.depower_offset)
    assert math.degrees(out.alpha_b) == pytest.approx(90.0 - 68.5, abs=1e-9)
    assert math.degrees(out.alpha_c) == pytest.approx(10.0, abs=1e-9)


def test_lift_directions_perpendicular():
    kite = KiteParams()
    geom = FourPointGeometry()
    frame = make_frame()
    rng = np.random.default_rng(8)
    for _ in range(50):
        v_b, v_c, v_d = rng.normal(0.0, 12.0, (3, 3))
        if min(np.linalg.norm(v) for v in (v_b, v_c, v_d)) < 1.0:
            continue
        try:
            out = surface_forces(kite, geom, frame, v_b, v_c, v_d, rho=1.2,
                                 u_s=0.1, u_d=0.25)
        except Exception:
            continue
        # Total force stays finite and well scaled.
        for f in (out.force_b, out.force_c, out.force_d):
            assert np.isfinite(f).all()
            assert np.linalg.norm(f) < 1e6


def test_density_and_area_scaling():
    kite = KiteParams()
    geom = FourPointGeometry()
    frame = make_frame()
    v = np.array([-18.0, 2.0, 1.0])
    one = surface_forces(kite, geom, frame, v, v, v, 1.0, 0.1, 0.25)
    two = surface_forces(kite, geom, frame, v, v, v, 2.0, 0.1, 0.25)
    assert np.allclose(two.force_b, 2.0 * one.force_b, rtol=1e-12)
    assert np.allclose(two.force_c, 2.0 * one.force_c, rtol=1e-12)


def test_geometry_validation():
    with pytest.raises(ConfigError):
        FourPointGeometry(width=-1.0)
    with pytest.raises(ConfigError):
        FourPointGeometry(nose_mass_fraction=1.2)
