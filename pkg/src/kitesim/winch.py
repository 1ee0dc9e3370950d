"""Winch model: drum and gearbox driven by an asynchronous generator.

The generator torque follows the classic steady-state slip curve of an
induction machine. Below the nominal synchronous speed the stator voltage
is scheduled linearly with speed, which makes the torque gain constant;
above it the voltage stays at its nominal value, so the gain falls with
the inverse square of the synchronous speed (field weakening). All speeds
here are expressed as equivalent tether speeds at the drum surface.
"""

from dataclasses import dataclass
import math

from .errors import ConfigError


@dataclass
class WinchParams:
    """Ground station drive train properties.

    Args:
        gear_ratio: Generator revolutions per drum revolution.
        drum_radius: Drum radius (m).
        inertia: Drive train inertia felt at the generator (kg m^2).
        viscous_friction: Friction torque per unit tether speed (Nms/m).
        static_friction: Constant friction torque opposing motion (Nm).
        rotor_resistance: Rotor resistance of the machine (ohm).
        inductance: Combined rotor/stator leakage inductance (H).
        nominal_sync_speed: Synchronous speed as tether speed (m/s) up to
            which the voltage rises linearly.
        nominal_voltage: Stator voltage at and above nominal speed (V).
    """

    gear_ratio: float = 6.2
    drum_radius: float = 0.1615
    inertia: float = 0.328
    viscous_friction: float = 0.799
    static_friction: float = 3.18
    rotor_resistance: float = 0.0727
    inductance: float = 0.00297
    nominal_sync_speed: float = 4.09
    nominal_voltage: float = 231.0

    def __post_init__(self):
        for name in ("gear_ratio", "drum_radius", "inertia", "rotor_resistance",
                     "inductance", "nominal_sync_speed", "nominal_voltage"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive",
                                  **{name: getattr(self, name)})
        if self.viscous_friction < 0.0 or self.static_friction < 0.0:
            raise ConfigError("friction terms must be >= 0",
                              viscous=self.viscous_friction,
                              static=self.static_friction)


def torque_gain(params: WinchParams, v_s: float) -> float:
    """Torque gain alpha of the slip curve for synchronous speed v_s."""
    v_ref = max(abs(v_s), params.nominal_sync_speed)
    return (params.nominal_voltage ** 2 * params.drum_radius) / \
        (v_ref ** 2 * params.rotor_resistance * params.gear_ratio)


def slip_shape(params: WinchParams) -> float:
    """Curvature beta of the slip curve (1/(m/s)^2)."""
    return (params.inductance ** 2 / params.rotor_resistance ** 2) * \
        (params.gear_ratio ** 2 / params.drum_radius ** 2)


def generator_torque(params: WinchParams, v: float, v_s: float) -> float:
    """Generator air-gap torque for tether speed v and synchronous speed v_s.

    Positive slip (v_s > v) motors the drum toward reel-out; negative slip
    brakes it and generates.
    """
    slip = v_s - v
    beta = slip_shape(params)
    return torque_gain(params, v_s) * slip / (1.0 + beta * slip * slip)


def peak_torque_slip(params: WinchParams) -> float:
    """Slip at which the torque magnitude peaks: 1/sqrt(beta)."""
    return 1.0 / math.sqrt(slip_shape(params))


def peak_torque(params: WinchParams, v_s: float = 0.0) -> float:
    """Maximum torque of the slip curve: alpha / (2 sqrt(beta))."""
    return torque_gain(params, v_s) / (2.0 * math.sqrt(slip_shape(params)))


def friction_torque(params: WinchParams, v: float) -> float:
    """Signed friction torque c_f * v + tau_s * sign(v); zero at standstill."""
    sign = 1.0 if v > 0.0 else -1.0 if v < 0.0 else 0.0
    return params.viscous_friction * v + params.static_friction * sign


def drive_torque(params: WinchParams, tether_force: float) -> float:
    """Torque the tether tension applies at the generator side."""
    return (params.drum_radius / params.gear_ratio) * tether_force


def reel_acceleration(params: WinchParams, v: float, v_s: float,
                      tether_force: float) -> float:
    """Tether acceleration at the drum surface.

    Positive tether force accelerates reel-out; friction opposes the
    current motion.
    """
    tau_g = generator_torque(params, v, v_s)
    tau_d = drive_torque(params, tether_force)
    tau_f = friction_torque(params, v)
    return (params.drum_radius / params.gear_ratio) * \
        (tau_g + tau_d - tau_f) / params.inertia


def winch_residual(params: WinchParams, l_t_dot: float, v: float, v_dot: float,
                   v_s: float, tether_force: float) -> tuple[float, float]:
    """Implicit residual of the two winch states (l_t, v_t_o)."""
    return (v - l_t_dot, reel_acceleration(params, v, v_s, tether_force) - v_dot)
