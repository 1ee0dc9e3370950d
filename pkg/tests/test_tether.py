import numpy as np
import pytest

from kitesim.errors import ConfigError, SingularGeometryError
from kitesim.tether import (
    GRAVITY,
    ReelState,
    TetherParams,
    anchor_lumped_mass,
    chain_drag_forces,
    chain_masses,
    chain_spring_forces,
    ground_station_force,
    segment_constants,
    segment_rest_length,
    spring_damper_force,
)


def test_segment_rest_length_values():
    reel = ReelState(l_t_i=392.0, t_i=0.0, v_t_o=0.0)
    assert segment_rest_length(reel, 7, 0.0) == pytest.approx(56.0, rel=1e-12)
    reel = ReelState(l_t_i=392.0, t_i=0.0, v_t_o=2.0)
    assert segment_rest_length(reel, 7, 1.0) == pytest.approx(56.0 + 2.0 / 7.0,
                                                              rel=1e-12)
    reel = ReelState(l_t_i=392.0, t_i=0.0, v_t_o=-7.28)
    assert segment_rest_length(reel, 7, 10.0) == pytest.approx(45.6, rel=1e-12)


def test_segment_rest_length_floor():
    reel = ReelState(l_t_i=14.0, t_i=0.0, v_t_o=-2.0)
    assert segment_rest_length(reel, 7, 10.0) == 1.0


def test_segment_constants():
    params = TetherParams()
    k, c = segment_constants(params, 50.0)
    assert k == pytest.approx(12292.0, rel=1e-12)
    assert c == pytest.approx(9.46, rel=1e-12)


def test_spring_force_tension_and_compression():
    params = TetherParams()
    k, c = segment_constants(params, 50.0)
    s = np.array([0.0, 0.0, 50.1])
    f = spring_damper_force(s, np.zeros(3), 50.0, k, c, params.compression_factor)
    assert np.linalg.norm(f) == pytest.approx(1229.2, rel=1e-9)
    assert f[2] > 0.0  # pulls the lower particle up toward the upper one
    s = np.array([0.0, 0.0, 49.9])
    f = spring_damper_force(s, np.zeros(3), 50.0, k, c, params.compression_factor)
    assert np.linalg.norm(f) == pytest.approx(122.92, rel=1e-9)
    assert f[2] < 0.0


def test_spring_force_damping_term():
    params = TetherParams()
    k, c = segment_constants(params, 50.0)
    s = np.array([0.0, 0.0, 50.0])
    s_v = np.array([0.0, 0.0, 2.0])  # endpoints separating
    f = spring_damper_force(s, s_v, 50.0, k, c, params.compression_factor)
    assert f[2] == pytest.approx(c * 2.0, rel=1e-12)


def test_spring_force_coincident_particles():
    params = TetherParams()
    k, c = segment_constants(params, 50.0)
    with pytest.raises(SingularGeometryError):
        spring_damper_force(np.zeros(3), np.zeros(3), 50.0, k, c,
                            params.compression_factor, index=3)


def test_chain_spring_forces_match_pairwise(seed=0):
    rng = np.random.default_rng(seed)
    params = TetherParams(n_segments=5)
    l_s = 10.0
    k, c = segment_constants(params, l_s)
    pos = np.cumsum(rng.normal(0.0, 4.0, (6, 3)), axis=0)
    pos[0] = 0.0
    vel = rng.normal(0.0, 1.0, (6, 3))
    forces, f0 = chain_spring_forces(pos, vel, l_s, params)

    expected = np.zeros((6, 3))
    for i in range(5):
        f = spring_damper_force(pos[i + 1] - pos[i], vel[i + 1] - vel[i],
                                l_s, k, c, params.compression_factor)
        expected[i] += f
        expected[i + 1] -= f
    assert np.allclose(forces, expected[1:], atol=1e-9)
    assert np.allclose(f0, expected[0], atol=1e-9)


def test_chain_spring_action_reaction():
    # Internal spring forces over the whole chain (anchor included) cancel.
    rng = np.random.default_rng(3)
    params = TetherParams(n_segments=7)
    pos = np.cumsum(rng.normal(0.0, 8.0, (8, 3)), axis=0)
    vel = rng.normal(0.0, 2.0, (8, 3))
    forces, f0 = chain_spring_forces(pos, vel, 7.5, params)
    total = forces.sum(axis=0) + f0
    assert np.allclose(total, 0.0, atol=1e-8)


def test_drag_magnitude_example():
    # One segment broadside to the flow: 0.5 * 0.96 * 1.225 * 10 * 50 * 0.004 * 10.
    params = TetherParams(n_segments=1)
    pos = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 50.0]])
    vel = np.zeros((2, 3))
    wind = np.array([[10.0, 0.0, 0.0]])
    rho = np.array([1.225])
    drag = chain_drag_forces(pos, vel, wind, rho, params)
    # The single moving particle receives half of the segment drag.
    assert np.linalg.norm(drag[0]) == pytest.approx(0.5 * 11.76, rel=1e-9)


def test_drag_perpendicular_to_segment():
    rng = np.random.default_rng(11)
    params = TetherParams(n_segments=1)
    for _ in range(200):
        top = rng.normal(0.0, 20.0, 3)
        while np.linalg.norm(top) < 1.0:
            top = rng.normal(0.0, 20.0, 3)
        pos = np.vstack([np.zeros(3), top])
        vel = rng.normal(0.0, 5.0, (2, 3))
        wind = rng.normal(0.0, 10.0, (1, 3))
        drag = chain_drag_forces(pos, vel, wind, np.array([1.2]), params)
        unit = top / np.linalg.norm(top)
        assert abs(drag[0] @ unit) < 1e-10 * max(np.linalg.norm(drag[0]), 1.0)


def test_drag_axial_flow_is_zero():
    params = TetherParams(n_segments=1)
    pos = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 50.0]])
    vel = np.zeros((2, 3))
    wind = np.array([[0.0, 0.0, 8.0]])
    drag = chain_drag_forces(pos, vel, wind, np.array([1.2]), params)
    assert np.allclose(drag, 0.0, atol=1e-12)


def test_drag_uses_average_segment_velocity():
    params = TetherParams(n_segments=1)
    pos = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 50.0]])
    # Endpoints move so that the average velocity cancels the wind.
    vel = np.array([[4.0, 0.0, 0.0], [6.0, 0.0, 0.0]])
    wind = np.array([[5.0, 0.0, 0.0]])
    drag = chain_drag_forces(pos, vel, wind, np.array([1.2]), params)
    assert np.allclose(drag, 0.0, atol=1e-12)


def test_mass_bookkeeping_exact():
    params = TetherParams(n_segments=7)
    for t in (0.0, 1.3, 7.9):
        reel = ReelState(l_t_i=392.0, t_i=0.0, v_t_o=-7.28)
        l_s = segment_rest_length(reel, 7, t)
        m = chain_masses(params, l_s)
        total = m.sum() + anchor_lumped_mass(params, l_s)
        expected = params.linear_density * (reel.l_t_i + reel.v_t_o * t)
        assert total == pytest.approx(expected, rel=0.0, abs=1e-12)


def test_ground_station_force_includes_anchor_weight():
    params = TetherParams(n_segments=7)
    l_s = 56.0
    spring = np.array([0.0, 0.0, -46.4])  # hanging chain pulls the anchor down
    f = ground_station_force(spring, l_s, params)
    weight = anchor_lumped_mass(params, l_s) * GRAVITY
    assert f[2] == pytest.approx(-46.4 - weight, rel=1e-12)


def test_residual_locality():
    # Moving particle j only changes spring forces on particles j-1, j, j+1.
    rng = np.random.default_rng(5)
    params = TetherParams(n_segments=7)
    pos = np.zeros((8, 3))
    pos[:, 2] = np.arange(8) * 10.0
    pos += rng.normal(0.0, 0.2, (8, 3))
    pos[0] = 0.0
    vel = rng.normal(0.0, 1.0, (8, 3))
    base, _ = chain_spring_forces(pos, vel, 10.0, params)
    j = 4  # particle index in the full chain
    bumped = pos.copy()
    bumped[j] += np.array([0.05, -0.02, 0.03])
    after, _ = chain_spring_forces(bumped, vel, 10.0, params)
    delta = np.linalg.norm(after - base, axis=1)
    touched = {j - 1 - 1, j - 1, j - 1 + 1}  # rows are particles 1..n
    for row in range(7):
        if row in touched:
            assert delta[row] > 1e-6
        else:
            assert delta[row] < 1e-12


def test_params_validation():
    with pytest.raises(ConfigError):
        TetherParams(n_segments=0)
    with pytest.raises(ConfigError):
        TetherParams(diameter=-0.004)
    with pytest.raises(ConfigError):
        TetherParams(compression_factor=1.5)
