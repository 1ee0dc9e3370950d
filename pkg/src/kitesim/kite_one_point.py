"""One-point kite model: the whole wing reduced to the last tether particle.

The aerodynamic frame is flow-aligned: e_z points from the kite down along
the last tether segment, e_y is perpendicular to both that axis and the
apparent wind, and e_x completes the right-handed frame, pointing roughly
in flight direction. Lift and drag coefficients come from a piecewise
linear table over the angle of attack; steering acts through a side force
along e_y plus a drag penalty, with a speed-scheduled correction that
counters the excessive gravity response of a point mass.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.interpolate import PchipInterpolator

from .sphere import cross3
from .errors import ConfigError, DegenerateFlowError

#: Apparent wind speed floor used in speed-scheduled terms (m/s).
V_A_FLOOR = 0.1

#: Default lift/drag polar: (angle of attack deg, C_L, C_D) control points.
#: Effective whole-kite coefficients of a leading-edge inflatable wing: a
#: steady pre-stall lift rise peaking around 1.0 near 20 degrees, stall
#: near 25 degrees, and a flat-plate-like recovery at deep angles. Tuned
#: so that a parked kite settles near the measured force and elevation
#: while crosswind flight reaches a lift-to-drag ratio around 4.6.
DEFAULT_AERO_TABLE = (
    (-20.0, -0.55, 0.300),
    (-10.0, -0.20, 0.150),
    (0.0, 0.10, 0.085),
    (5.0, 0.32, 0.105),
    (10.0, 0.600, 0.138),
    (15.0, 0.847, 0.164),
    (20.0, 1.00, 0.200),
    (25.0, 0.95, 0.260),
    (30.0, 0.65, 0.310),
    (40.0, 0.75, 0.420),
    (60.0, 0.65, 0.700),
    (80.0, 0.25, 1.150),
)


class AeroTable:
    """Smooth lift and drag polar through control points, clamped at
    both ends.

    Interpolation is a shape-preserving monotone cubic, so the polar
    has a continuous slope everywhere. A polar with slope kinks at the
    control points would put corners into the force field exactly where
    trimmed flight sits, which both stiffens the time integration and
    stalls equilibrium root finding.
    """

    def __init__(self, points=DEFAULT_AERO_TABLE):
        pts = [(float(a), float(cl), float(cd)) for a, cl, cd in points]
        if len(pts) < 2:
            raise ConfigError("aero table needs at least two points", n=len(pts))
        angles = [a for a, _, _ in pts]
        if any(b <= a for a, b in zip(angles, angles[1:])):
            raise ConfigError("aero table angles must be strictly increasing")
        self._deg = np.array(angles)
        self._cl = np.array([cl for _, cl, _ in pts])
        self._cd = np.array([cd for _, _, cd in pts])
        self._cl_spline = PchipInterpolator(self._deg, self._cl)
        self._cd_spline = PchipInterpolator(self._deg, self._cd)

    def coefficients(self, alpha: float) -> tuple[float, float]:
        """(C_L, C_D) at angle of attack alpha (rad)."""
        deg = min(max(math.degrees(alpha), float(self._deg[0])),
                  float(self._deg[-1]))
        return float(self._cl_spline(deg)), float(self._cd_spline(deg))

    def points(self):
        return [(float(a), float(cl), float(cd))
                for a, cl, cd in zip(self._deg, self._cl, self._cd)]

    def __eq__(self, other):
        if not isinstance(other, AeroTable):
            return NotImplemented
        return self.points() == other.points()

    def __hash__(self):
        return hash(tuple(self.points()))

    def __repr__(self):
        return f"AeroTable({self.points()!r})"


@dataclass
class KiteParams:
    """Wing and control pod properties shared by both kite models.

    Args:
        area: Projected wing area (m^2).
        mass: Wing mass (kg).
        kcu_mass: Control pod mass (kg).
        side_area_ratio: Side area over projected area.
        steering_coefficient: Gain of the steering side force.
        gravity_correction: Speed-scheduled steering correction gain (m/s).
        steering_drag_factor: Drag increase per unit of actuated steering.
        alpha0_deg: Angle between the wing chord and the flight axis (deg).
        alpha_d_max_deg: Angle-of-attack reduction at full depower (deg).
        depower_offset: Depower setting at which the reduction is zero.
        depower_max: Depower setting producing the full reduction.
    """

    area: float = 10.18
    mass: float = 6.21
    kcu_mass: float = 8.4
    side_area_ratio: float = 0.306
    steering_coefficient: float = 2.59
    gravity_correction: float = 0.93
    steering_drag_factor: float = 0.6
    alpha0_deg: float = 8.0
    alpha_d_max_deg: float = 31.0
    depower_offset: float = 0.213
    depower_max: float = 0.4247
    table: AeroTable = field(default_factory=AeroTable)

    def __post_init__(self):
        if self.area <= 0.0 or self.mass <= 0.0 or self.kcu_mass < 0.0:
            raise ConfigError("kite area and masses must be positive",
                              area=self.area, mass=self.mass)
        if not (0.0 < self.side_area_ratio < 1.0):
            raise ConfigError("side area ratio must lie in (0, 1)",
                              side_area_ratio=self.side_area_ratio)
        if self.depower_max <= self.depower_offset:
            raise ConfigError("depower_max must exceed depower_offset",
                              depower_offset=self.depower_offset,
                              depower_max=self.depower_max)

    @property
    def total_mass(self) -> float:
        return self.mass + self.kcu_mass


@dataclass
class KiteFrame:
    """Right-handed flow-aligned frame at the kite."""

    e_x: np.ndarray
    e_y: np.ndarray
    e_z: np.ndarray


def kite_frame(last_segment_unit: np.ndarray, v_a: np.ndarray) -> KiteFrame:
    """Flow-aligned frame from the last tether segment and apparent wind.

    Args:
        last_segment_unit: Unit vector from the second-to-last particle to
            the kite.
        v_a: Apparent wind vector at the kite (m/s).

    Raises:
        DegenerateFlowError: Apparent wind below the floor or parallel to
            the tether axis.
    """
    speed = math.sqrt(float(v_a @ v_a))
    if speed < V_A_FLOOR:
        raise DegenerateFlowError("apparent wind below floor", v_a=speed)
    e_z = -np.asarray(last_segment_unit, dtype=float)
    cross = cross3(v_a, e_z)
    norm = math.sqrt(float(cross @ cross))
    if norm < 1e-6 * speed:
        raise DegenerateFlowError("apparent wind parallel to tether axis")
    e_y = cross / norm
    e_x = cross3(e_y, e_z)
    return KiteFrame(e_x=e_x, e_y=e_y, e_z=e_z)


def depower_angle(params: KiteParams, u_d: float) -> float:
    """Angle-of-attack reduction (rad) for depower setting u_d."""
    frac = (u_d - params.depower_offset) / \
        (params.depower_max - params.depower_offset)
    return frac * math.radians(params.alpha_d_max_deg)


def angle_of_attack(params: KiteParams, frame: KiteFrame, v_a: np.ndarray,
                    u_d: float) -> float:
    """Angle of attack (rad) of the one-point wing.

    The chord sits alpha0 above the flight axis; depowering rotates it
    down. The flow angle is measured between the apparent wind and the
    negative flight axis so that head-on flow gives alpha0 - alpha_d.
    """
    speed = math.sqrt(float(v_a @ v_a))
    if speed < V_A_FLOOR:
        raise DegenerateFlowError("apparent wind below floor", v_a=speed)
    dot = min(1.0, max(-1.0, float(v_a @ frame.e_x) / speed))
    return math.pi - math.acos(dot) - depower_angle(params, u_d) + \
        math.radians(params.alpha0_deg)


def gravity_turn_correction(params: KiteParams, v_a_mag: float, psi: float,
                            beta: float) -> float:
    """Speed-scheduled steering offset countering the gravity response."""
    v = max(v_a_mag, V_A_FLOOR)
    return (params.gravity_correction / v) * math.sin(psi) * math.cos(beta)


@dataclass
class AeroForces:
    """Aerodynamic force split plus the scalars behind it."""

    force: np.ndarray
    lift: np.ndarray
    drag: np.ndarray
    side: np.ndarray
    alpha: float
    c_l: float
    c_d: float
    v_a_mag: float


def aero_forces(params: KiteParams, frame: KiteFrame, v_a: np.ndarray,
                rho: float, i_s: float, u_s: float, u_d: float,
                psi: float, beta: float) -> AeroForces:
    """Aerodynamic forces on the one-point kite.

    Args:
        params: Kite properties including the polar table.
        frame: Flow-aligned frame from :func:`kite_frame`.
        v_a: Apparent wind vector (m/s).
        rho: Air density at the kite (kg/m^3).
        i_s: Commanded steering in [-1, 1]; drives the side force together
            with the gravity correction.
        u_s: Actuated steering; drives the drag penalty.
        u_d: Actuated depower setting.
        psi: Course angle of the kite (rad), for the gravity correction.
        beta: Elevation angle of the kite (rad).

    Returns:
        AeroForces with the total and its lift/drag/side split. Gravity is
        applied by the particle assembly, not here.
    """
    speed = math.sqrt(float(v_a @ v_a))
    if speed < V_A_FLOOR:
        raise DegenerateFlowError("apparent wind below floor", v_a=speed)
    alpha = angle_of_attack(params, frame, v_a, u_d)
    c_l, c_d = params.table.coefficients(alpha)
    q_area = 0.5 * rho * speed * speed * params.area

    lift_dir = cross3(v_a, frame.e_y)
    norm = math.sqrt(float(lift_dir @ lift_dir))
    if norm < 1e-9:
        raise DegenerateFlowError("lift direction undefined")
    lift = q_area * c_l * lift_dir / norm
    drag = q_area * c_d * (1.0 + params.steering_drag_factor * abs(u_s)) * \
        (v_a / speed)
    steering = i_s + gravity_turn_correction(params, speed, psi, beta)
    side = q_area * params.side_area_ratio * params.steering_coefficient * \
        steering * frame.e_y
    total = lift + drag + side
    return AeroForces(force=total, lift=lift, drag=drag, side=side,
                      alpha=alpha, c_l=c_l, c_d=c_d, v_a_mag=speed)
