"""Tests for tangent-plane geometry on the flight sphere."""

import math

import numpy as np
import pytest

from kitesim.errors import SingularGeometryError
from kitesim.sphere import (
    angular_distance,
    course_angle,
    elevation_azimuth,
    great_circle_bearing,
    radial_unit,
    tangent_frame,
    wrap_angle,
)


def test_elevation_azimuth_examples():
    beta, phi = elevation_azimuth(np.array([1.0, 0.0, 0.0]))
    assert beta == pytest.approx(0.0, abs=1e-12)
    assert phi == pytest.approx(0.0, abs=1e-12)
    beta, phi = elevation_azimuth(np.array([1.0, 1.0, math.sqrt(2.0)]))
    assert beta == pytest.approx(math.pi / 4.0, rel=1e-12)
    assert phi == pytest.approx(math.pi / 4.0, rel=1e-12)


def test_elevation_azimuth_rejects_anchor():
    with pytest.raises(SingularGeometryError):
        elevation_azimuth(np.zeros(3))


def test_radial_unit_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(200):
        beta = rng.uniform(-math.pi / 2 + 0.01, math.pi / 2 - 0.01)
        phi = rng.uniform(-math.pi, math.pi)
        r_hat = radial_unit(beta, phi)
        assert np.linalg.norm(r_hat) == pytest.approx(1.0, rel=1e-12)
        b2, p2 = elevation_azimuth(r_hat * rng.uniform(1.0, 500.0))
        assert b2 == pytest.approx(beta, abs=1e-9)
        assert wrap_angle(p2 - phi) == pytest.approx(0.0, abs=1e-9)


def test_tangent_frame_horizon():
    up, right = tangent_frame(np.array([1.0, 0.0, 0.0]))
    assert np.allclose(up, [0.0, 0.0, 1.0], atol=1e-12)
    assert np.allclose(right, [0.0, 1.0, 0.0], atol=1e-12)


def test_tangent_frame_orthonormal():
    rng = np.random.default_rng(4)
    for _ in range(100):
        r_hat = rng.normal(0.0, 1.0, 3)
        r_hat /= np.linalg.norm(r_hat)
        if abs(r_hat[2]) > 0.999:
            continue
        up, right = tangent_frame(r_hat)
        assert up @ r_hat == pytest.approx(0.0, abs=1e-12)
        assert right @ r_hat == pytest.approx(0.0, abs=1e-12)
        assert up @ right == pytest.approx(0.0, abs=1e-12)
        assert np.linalg.norm(up) == pytest.approx(1.0, rel=1e-12)
        assert np.allclose(np.cross(up, r_hat), right, atol=1e-12)


def test_tangent_frame_degenerates_at_zenith():
    with pytest.raises(SingularGeometryError):
        tangent_frame(np.array([0.0, 0.0, 1.0]))


def test_course_angle_cardinal_directions():
    pos = np.array([100.0, 0.0, 0.0])
    assert course_angle(pos, np.array([0.0, 0.0, 2.0])) == pytest.approx(0.0)
    assert course_angle(pos, np.array([0.0, 3.0, 0.0])) == pytest.approx(
        math.pi / 2.0)
    assert course_angle(pos, np.array([0.0, -3.0, 0.0])) == pytest.approx(
        -math.pi / 2.0)
    assert abs(course_angle(pos, np.array([0.0, 0.0, -2.0]))) == pytest.approx(
        math.pi)


def test_course_angle_ignores_radial_component():
    pos = np.array([50.0, 20.0, 30.0])
    heading = np.array([1.0, -2.0, 0.5])
    psi = course_angle(pos, heading)
    # Adding a radial component leaves the tangent-plane angle unchanged.
    psi2 = course_angle(pos, heading + 7.0 * pos / np.linalg.norm(pos))
    assert psi2 == pytest.approx(psi, abs=1e-9)


def test_course_angle_rejects_radial_heading():
    pos = np.array([10.0, 0.0, 5.0])
    with pytest.raises(SingularGeometryError):
        course_angle(pos, 3.0 * pos)


def test_bearing_toward_zenith_is_zero():
    psi = great_circle_bearing(math.radians(30.0), 0.2, math.pi / 2.0, 0.0)
    assert psi == pytest.approx(0.0, abs=1e-9)


def test_bearing_quarter_turns_on_horizon():
    # From downwind horizon, a target 90 deg toward +y lies at +pi/2.
    assert great_circle_bearing(0.0, 0.0, 0.0, math.pi / 2.0) == \
        pytest.approx(math.pi / 2.0, rel=1e-12)
    assert great_circle_bearing(0.0, 0.0, 0.0, -math.pi / 2.0) == \
        pytest.approx(-math.pi / 2.0, rel=1e-12)


def test_bearing_descending_target():
    # A target straight below on the same meridian sits behind: |psi| = pi.
    psi = great_circle_bearing(math.radians(60.0), 0.0, math.radians(20.0),
                               0.0)
    assert abs(psi) == pytest.approx(math.pi, rel=1e-12)


def test_bearing_matches_course_of_connecting_direction():
    rng = np.random.default_rng(5)
    for _ in range(100):
        beta = rng.uniform(-1.2, 1.2)
        phi = rng.uniform(-math.pi, math.pi)
        beta_t = rng.uniform(-1.2, 1.2)
        phi_t = rng.uniform(-math.pi, math.pi)
        if angular_distance(beta, phi, beta_t, phi_t) < 1e-3:
            continue
        if angular_distance(beta, phi, beta_t, phi_t) > math.pi - 1e-3:
            continue
        r_hat = radial_unit(beta, phi)
        t_hat = radial_unit(beta_t, phi_t)
        d = t_hat - (t_hat @ r_hat) * r_hat
        psi = great_circle_bearing(beta, phi, beta_t, phi_t)
        assert course_angle(100.0 * r_hat, d) == pytest.approx(psi, abs=1e-9)


def test_bearing_rejects_degenerate_pairs():
    with pytest.raises(SingularGeometryError):
        great_circle_bearing(0.3, 0.1, 0.3, 0.1)
    with pytest.raises(SingularGeometryError):
        great_circle_bearing(0.3, 0.1, -0.3, 0.1 + math.pi)


def test_angular_distance_examples():
    assert angular_distance(0.0, 0.0, math.pi / 2.0, 0.0) == pytest.approx(
        math.pi / 2.0, rel=1e-12)
    assert angular_distance(0.2, 0.4, 0.2, 0.4) == pytest.approx(0.0,
                                                                 abs=1e-9)
    # Symmetric in its arguments.
    assert angular_distance(0.1, -0.7, 0.9, 1.3) == pytest.approx(
        angular_distance(0.9, 1.3, 0.1, -0.7), rel=1e-12)


def test_wrap_angle_range_and_equivalence():
    assert wrap_angle(math.pi) == pytest.approx(math.pi, rel=1e-12)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi, rel=1e-12)
    assert wrap_angle(2.0 * math.pi) == pytest.approx(0.0, abs=1e-12)
    rng = np.random.default_rng(6)
    for _ in range(200):
        a = rng.uniform(-30.0, 30.0)
        w = wrap_angle(a)
        assert -math.pi < w <= math.pi + 1e-15
        # Same angle modulo a full turn.
        assert math.remainder(w - a, 2.0 * math.pi) == pytest.approx(
            0.0, abs=1e-9)
