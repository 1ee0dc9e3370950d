import math

import numpy as np
import pytest

from kitesim.errors import ConfigError
from kitesim.winch import (
    WinchParams,
    drive_torque,
    friction_torque,
    generator_torque,
    peak_torque,
    peak_torque_slip,
    reel_acceleration,
    slip_shape,
    torque_gain,
    winch_residual,
)


def test_torque_gain_below_nominal():
    p = WinchParams()
    expected = 231.0 ** 2 * 0.1615 / (4.09 ** 2 * 0.0727 * 6.2)
    assert torque_gain(p, 0.0) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(1142.9, abs=0.1)
    # Constant for any |v_s| <= nominal.
    assert torque_gain(p, 4.09) == pytest.approx(expected, rel=1e-12)
    assert torque_gain(p, -2.0) == pytest.approx(expected, rel=1e-12)


def test_torque_gain_field_weakening():
    p = WinchParams()
    # At twice the nominal speed the gain is exactly a quarter.
    assert torque_gain(p, 2.0 * 4.09) == pytest.approx(torque_gain(p, 0.0) / 4.0,
                                                       rel=1e-12)


def test_slip_shape_value():
    p = WinchParams()
    expected = (0.00297 / 0.0727) ** 2 * (6.2 / 0.1615) ** 2
    assert slip_shape(p) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(2.460, abs=1e-3)


def test_generator_torque_values():
    p = WinchParams()
    assert generator_torque(p, 0.0, 0.0) == 0.0
    tau = generator_torque(p, 0.0, 1.0)
    assert tau == pytest.approx(1142.9 / 3.45989, abs=0.1)
    assert tau == pytest.approx(330.3, abs=0.1)
    # Odd in slip.
    assert generator_torque(p, 1.0, 0.0) == pytest.approx(-tau, rel=1e-12)


def test_peak_torque_location_and_value():
    p = WinchParams()
    beta = slip_shape(p)
    slip_star = peak_torque_slip(p)
    assert slip_star == pytest.approx(1.0 / math.sqrt(beta), rel=1e-12)
    assert slip_star == pytest.approx(0.6376, abs=2e-4)
    tau_star = peak_torque(p)
    assert tau_star == pytest.approx(torque_gain(p, 0.0) / (2.0 * math.sqrt(beta)),
                                     rel=1e-12)
    assert tau_star == pytest.approx(364.3, abs=0.1)
    # The analytic peak dominates the sampled slip curve and matches the
    # torque evaluated exactly at the peak slip.
    slips = np.linspace(0.0, 4.0, 2001)
    taus = np.array([generator_torque(p, 0.0, s) for s in slips])
    assert taus.max() <= tau_star * (1.0 + 1e-12)
    assert generator_torque(p, 0.0, slip_star) == pytest.approx(tau_star,
                                                                rel=1e-9)


def test_friction_torque():
    p = WinchParams()
    assert friction_torque(p, 1.0) == pytest.approx(3.979, rel=1e-12)
    assert friction_torque(p, -1.0) == pytest.approx(-3.979, rel=1e-12)
    assert friction_torque(p, 0.0) == 0.0


def test_reel_acceleration_from_force():
    # Standstill, no generator torque: a = (r/n)^2 * F / I.
    p = WinchParams()
    a = reel_acceleration(p, 0.0, 0.0, 1000.0)
    expected = (0.1615 / 6.2) ** 2 * 1000.0 / 0.328
    assert a == pytest.approx(expected, rel=1e-12)
    assert a == pytest.approx(2.069, abs=1e-3)


def test_static_residual_zero():
    # v = 0, v_dot = 0 and a synchronous speed whose torque cancels the
    # drive torque give a zero residual.
    p = WinchParams()
    force = 670.0
    tau_d = drive_torque(p, force)
    alpha = torque_gain(p, 0.0)
    beta = slip_shape(p)

    # Solve alpha * s / (1 + beta s^2) = -tau_d for the small root.
    from scipy.optimize import brentq
    s = brentq(lambda x: alpha * x / (1.0 + beta * x * x) + tau_d, -0.6, 0.0,
               xtol=1e-15)
    r_l, r_v = winch_residual(p, l_t_dot=0.0, v=0.0, v_dot=0.0, v_s=s,
                              tether_force=force)
    assert r_l == 0.0
    assert abs(r_v) < 1e-9


def test_residual_length_rate_coupling():
    p = WinchParams()
    r_l, _ = winch_residual(p, l_t_dot=1.89, v=1.89, v_dot=0.0, v_s=1.89,
                            tether_force=0.0)
    assert r_l == 0.0
    r_l, _ = winch_residual(p, l_t_dot=0.0, v=1.89, v_dot=0.0, v_s=1.89,
                            tether_force=0.0)
    assert r_l == pytest.approx(1.89, rel=1e-12)


def test_power_consistency():
    # Torque times angular speed at the generator equals force times speed
    # at the drum for the pure drive torque path.
    p = WinchParams()
    force, v = 2876.0, 1.89
    tau_d = drive_torque(p, force)
    omega_gen = v * p.gear_ratio / p.drum_radius
    assert tau_d * omega_gen == pytest.approx(force * v, rel=1e-12)


def test_motoring_accelerates_toward_sync_speed():
    p = WinchParams()
    # v below v_s: machine motors, drum accelerates out (no load).
    assert reel_acceleration(p, 1.0, 2.0, 0.0) > 0.0
    # v above v_s: machine brakes.
    assert reel_acceleration(p, 3.0, 2.0, 0.0) < 0.0


def test_params_validation():
    with pytest.raises(ConfigError):
        WinchParams(drum_radius=0.0)
    with pytest.raises(ConfigError):
        WinchParams(viscous_friction=-1.0)
