"""Four-point kite model: nose, top and two side particles plus the pod.

The wing is spanned by particles A (nose, inertia only), B (top surface),
C and D (side surfaces), held together by a complete graph of spring-damper
lines and bridled to the pod particle at the top of the tether. Steering
changes the incidence of the side surfaces differentially; every surface
sees the apparent wind at its own particle, which makes rotations damp
themselves.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ConfigError, DegenerateFlowError, SingularGeometryError
from .kite_one_point import KiteFrame, KiteParams, V_A_FLOOR, depower_angle
from .sphere import cross3 as _cross3

#: Scaling of the tether unit stiffness/damping for the thinner kite lines
#: (2.5 mm bridle versus 4 mm tether, stiffness goes with the section).
LINE_SECTION_RATIO = (2.5 / 4.0) ** 2


@dataclass
class FourPointGeometry:
    """Shape, mass split and steering behaviour of the four-point wing.

    Args:
        height: Distance from the wing centre to the top particle (m).
        bridle_height: Distance from the wing centre to the pod (m).
        width: Tip-to-tip width of the wing (m).
        nose_mass_fraction: Share of the wing mass lumped into the nose.
        nose_distance_ratio: Nose offset forward of the centre, as a
            fraction of the effective width.
        width_ratio: Effective width over tip-to-tip width; steering forces
            act inboard of the tips.
        side_incidence_deg: Built-in incidence of the side surfaces (deg).
        steering_range_deg: Incidence swing at full steering, powered (deg).
        depower_steering_coupling: How much depowering dilutes steering.
        drag_compensation: Trim factor on the shared drag scale.
        steering_offset: Steering setting that flies straight.
        line_unit_spring: Stiffness of a 1 m kite line (N).
        line_unit_damping: Damping of a 1 m kite line (Ns).
    """

    height: float = 2.23
    bridle_height: float = 4.9
    width: float = 5.77
    nose_mass_fraction: float = 0.47
    nose_distance_ratio: float = 0.2
    width_ratio: float = 0.91
    side_incidence_deg: float = 10.0
    steering_range_deg: float = 15.9
    depower_steering_coupling: float = 1.5
    drag_compensation: float = 0.93
    steering_offset: float = -0.003
    line_unit_spring: float = 614600.0 * LINE_SECTION_RATIO
    line_unit_damping: float = 473.0 * LINE_SECTION_RATIO

    def __post_init__(self):
        for name in ("height", "bridle_height", "width", "width_ratio",
                     "line_unit_spring", "line_unit_damping"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive",
                                  **{name: getattr(self, name)})
        if not (0.0 < self.nose_mass_fraction < 1.0):
            raise ConfigError("nose mass fraction must lie in (0, 1)",
                              nose_mass_fraction=self.nose_mass_fraction)

    @property
    def effective_width(self) -> float:
        return self.width * self.width_ratio


def wing_masses(kite: KiteParams, geom: FourPointGeometry) -> np.ndarray:
    """Masses of particles A, B, C, D (kg)."""
    gamma = geom.nose_mass_fraction
    m = kite.mass
    return np.array([gamma * m,
                     0.4 * (1.0 - gamma) * m,
                     0.3 * (1.0 - gamma) * m,
                     0.3 * (1.0 - gamma) * m])


def pod_mass(kite: KiteParams, linear_density: float, l_t: float,
             n_segments: int) -> float:
    """Pod particle mass: control unit plus half of the last segment."""
    return kite.kcu_mass + l_t * linear_density / (2.0 * n_segments)


def init_particles(p_kcu: np.ndarray, frame0: KiteFrame,
                   geom: FourPointGeometry) -> np.ndarray:
    """Zero-force positions of A, B, C, D above the pod particle.

    The frame comes from the one-point model evaluated at the same state.
    """
    p_c = p_kcu - geom.bridle_height * frame0.e_z
    w_eff = geom.effective_width
    a = p_c + geom.nose_distance_ratio * w_eff * frame0.e_x
    b = p_c - geom.height * frame0.e_z
    c = p_c + 0.5 * w_eff * frame0.e_y
    d = p_c - 0.5 * w_eff * frame0.e_y
    return np.vstack([a, b, c, d])


def centre_position(particles: np.ndarray) -> np.ndarray:
    """Virtual wing centre: midpoint of the side particles."""
    return 0.5 * (particles[2] + particles[3])


def rotate_frame_about_span(frame: KiteFrame, angle_rad: float) -> KiteFrame:
    """Rotate a kite frame about its span axis; positive raises the nose.

    Positive angles increase the top-surface angle of attack, tilting the
    chord axis away from the bridle side.
    """
    c = math.cos(angle_rad)
    s = math.sin(angle_rad)
    e_x = c * frame.e_x - s * frame.e_z
    e_z = s * frame.e_x + c * frame.e_z
    return KiteFrame(e_x=e_x, e_y=frame.e_y.copy(), e_z=e_z)


def body_frame(particles: np.ndarray) -> KiteFrame:
    """Kite reference frame from the current particle positions.

    Args:
        particles: Rows A, B, C, D.

    Raises:
        SingularGeometryError: Degenerate wing (coincident particles).
    """
    p_c = centre_position(particles)
    down = p_c - particles[1]
    n_down = math.sqrt(float(down @ down))
    span = particles[2] - particles[3]
    n_span = math.sqrt(float(span @ span))
    if n_down < 1e-9 or n_span < 1e-9:
        raise SingularGeometryError("wing particles coincide",
                                    down=n_down, span=n_span)
    e_z = down / n_down
    e_y = span / n_span
    e_x = _cross3(e_y, e_z)
    return KiteFrame(e_x=e_x, e_y=e_y, e_z=e_z)


#: Spring graph of the wing: indices 0..3 are A..D, 4 is the pod particle.
WING_SPRINGS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3),
                (4, 0), (4, 1), (4, 2), (4, 3))


def spring_rest_lengths(geom: FourPointGeometry) -> np.ndarray:
    """As-built rest lengths of the wing and bridle springs."""
    e_y = np.array([0.0, 1.0, 0.0])
    e_z = np.array([0.0, 0.0, -1.0])
    frame = KiteFrame(e_x=np.cross(e_y, e_z), e_y=e_y, e_z=e_z)
    p_kcu = np.zeros(3)
    pts = np.vstack([init_particles(p_kcu, frame, geom), p_kcu])
    return np.array([float(np.linalg.norm(pts[i] - pts[j]))
                     for i, j in WING_SPRINGS])


def drag_scale(kite: KiteParams, geom: FourPointGeometry) -> float:
    """Shared drag factor K_D compensating the always-loaded side surfaces."""
    return (1.0 - kite.side_area_ratio) * geom.drag_compensation


def steering_angle(kite: KiteParams, geom: FourPointGeometry, u_s: float,
                   alpha_d: float) -> float:
    """Differential incidence (rad) of the side surfaces for steering u_s."""
    dilution = 1.0 + geom.depower_steering_coupling * \
        (alpha_d / math.radians(kite.alpha_d_max_deg))
    return (u_s - geom.steering_offset) / dilution * \
        math.radians(geom.steering_range_deg)


def _projected(v: np.ndarray, axis: np.ndarray) -> np.ndarray:
    return v - float(v @ axis) * axis


def _flow_angle(v_proj: np.ndarray, e_x: np.ndarray, surface: str) -> float:
    norm = math.sqrt(float(v_proj @ v_proj))
    if norm < V_A_FLOOR:
        raise DegenerateFlowError("projected apparent wind below floor",
                                  surface=surface, v=norm)
    dot = min(1.0, max(-1.0, float(v_proj @ e_x) / norm))
    return math.pi - math.acos(dot)


@dataclass
class SurfaceForces:
    """Aerodynamic forces on the three surfaces plus diagnostics."""

    force_b: np.ndarray
    force_c: np.ndarray
    force_d: np.ndarray
    alpha_b: float
    alpha_c: float
    alpha_d_surface: float
    v_a_centre: float


def surface_forces(kite: KiteParams, geom: FourPointGeometry,
                   frame: KiteFrame, v_a_b: np.ndarray, v_a_c: np.ndarray,
                   v_a_d: np.ndarray, rho: float, u_s: float,
                   u_d: float) -> SurfaceForces:
    """Lift and drag on the top and side surfaces.

    Args:
        kite: Shared wing properties and polar table.
        geom: Four-point geometry and steering behaviour.
        frame: Current body frame.
        v_a_b: Apparent wind at particle B (m/s); likewise for C and D.
        rho: Air density at the wing centre (kg/m^3).
        u_s: Actuated steering setting.
        u_d: Actuated depower setting.

    Returns:
        Forces on B, C and D; particle A carries no surface.
    """
    alpha_d = depower_angle(kite, u_d)
    alpha_s = steering_angle(kite, geom, u_s, alpha_d)
    alpha0 = math.radians(kite.alpha0_deg)
    alpha_s0 = math.radians(geom.side_incidence_deg)
    k_d = drag_scale(kite, geom)
    area = kite.area
    side_area = kite.area * kite.side_area_ratio

    v_b_xz = _projected(v_a_b, frame.e_y)
    v_c_xy = _projected(v_a_c, frame.e_z)
    v_d_xy = _projected(v_a_d, frame.e_z)

    # Positive steering raises the incidence of the +e_y side surface so
    # that a positive command yaws the kite toward positive course angles.
    alpha_b = _flow_angle(v_b_xz, frame.e_x, "B") - alpha_d + alpha0
    alpha_c = _flow_angle(v_c_xy, frame.e_x, "C") + alpha_s + alpha_s0
    alpha_dd = _flow_angle(v_d_xy, frame.e_x, "D") - alpha_s + alpha_s0

    def lift(v_proj, v_full, coeff, axis, flip):
        cross = _cross3(v_full, axis) if not flip else _cross3(axis, v_full)
        norm = math.sqrt(float(cross @ cross))
        if norm < 1e-9:
            raise DegenerateFlowError("lift direction undefined")
        q = 0.5 * rho * float(v_proj @ v_proj)
        return q * coeff / norm * cross

    def drag(v_full, coeff, surf_area):
        speed = math.sqrt(float(v_full @ v_full))
        if speed < V_A_FLOOR:
            raise DegenerateFlowError("apparent wind below floor", v=speed)
        return 0.5 * rho * k_d * speed * surf_area * coeff * v_full

    cl_b, cd_b = kite.table.coefficients(alpha_b)
    cl_c, cd_c = kite.table.coefficients(alpha_c)
    cl_d, cd_d = kite.table.coefficients(alpha_dd)

    f_b = lift(v_b_xz, v_a_b, area * cl_b, frame.e_y, flip=False) + \
        drag(v_a_b, cd_b, area)
    f_c = lift(v_c_xy, v_a_c, side_area * cl_c, frame.e_z, flip=False) + \
        drag(v_a_c, cd_c, side_area)
    f_d = lift(v_d_xy, v_a_d, side_area * cl_d, frame.e_z, flip=True) + \
        drag(v_a_d, cd_d, side_area)

    v_centre = 0.5 * (math.sqrt(float(v_a_c @ v_a_c)) +
                      math.sqrt(float(v_a_d @ v_a_d)))
    return SurfaceForces(force_b=f_b, force_c=f_c, force_d=f_d,
                         alpha_b=alpha_b, alpha_c=alpha_c,
                         alpha_d_surface=alpha_dd, v_a_centre=v_centre)
