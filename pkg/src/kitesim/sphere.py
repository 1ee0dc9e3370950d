"""Small-earth geometry: the kite moves on a sphere around the anchor.

Positions are reduced to elevation (angle above the horizontal plane) and
azimuth (angle around the vertical axis, zero pointing downwind, positive
toward +y). Headings and bearings are measured in the local tangent plane,
zero pointing toward the zenith and positive clockwise when seen from
outside the sphere.
"""

import math

import numpy as np

from .errors import SingularGeometryError

#: Sine of the co-elevation below which the tangent frame degenerates.
ZENITH_EPS = 1e-9


def cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product of two 3-vectors without np.cross dispatch overhead."""
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


def elevation_azimuth(pos: np.ndarray) -> tuple[float, float]:
    """Elevation and azimuth (rad) of a position in the ground frame."""
    r = math.sqrt(float(pos @ pos))
    if r < 1e-12:
        raise SingularGeometryError("position coincides with the anchor")
    beta = math.asin(float(np.clip(pos[2] / r, -1.0, 1.0)))
    phi = math.atan2(pos[1], pos[0])
    return beta, phi


def radial_unit(beta: float, phi: float) -> np.ndarray:
    """Unit vector at elevation beta and azimuth phi."""
    cb = math.cos(beta)
    return np.array([cb * math.cos(phi), cb * math.sin(phi), math.sin(beta)])


def tangent_frame(r_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Toward-zenith and rightward tangent directions at r_hat.

    Raises:
        SingularGeometryError: At the zenith (or nadir) the frame is
            undefined.
    """
    up = -float(r_hat[2]) * r_hat
    up[2] += 1.0
    norm = math.sqrt(float(up @ up))
    if norm < ZENITH_EPS:
        raise SingularGeometryError("tangent frame undefined at the zenith")
    up /= norm
    right = cross3(up, r_hat)
    return up, right


def course_angle(pos: np.ndarray, heading_vec: np.ndarray) -> float:
    """Angle of a heading vector in the tangent plane at pos (rad).

    Zero points toward the zenith, positive turns clockwise seen from
    outside the sphere.
    """
    r = math.sqrt(float(pos @ pos))
    if r < 1e-12:
        raise SingularGeometryError("position coincides with the anchor")
    r_hat = pos / r
    up, right = tangent_frame(r_hat)
    x_t = float(heading_vec @ up)
    y_t = float(heading_vec @ right)
    scale = math.sqrt(float(heading_vec @ heading_vec))
    if math.hypot(x_t, y_t) < 1e-12 * max(scale, 1e-12):
        raise SingularGeometryError("heading vector has no tangent component")
    return math.atan2(y_t, x_t)


def great_circle_bearing(beta: float, phi: float, beta_t: float,
                         phi_t: float) -> float:
    """Initial bearing of the great circle from (beta, phi) to the target.

    Same convention as :func:`course_angle`. Raises SingularGeometryError
    when start and target coincide or are antipodal (bearing undefined), or
    when the start sits at the zenith.
    """
    r_hat = radial_unit(beta, phi)
    t_hat = radial_unit(beta_t, phi_t)
    d = t_hat - float(t_hat @ r_hat) * r_hat
    norm = float(np.linalg.norm(d))
    if norm < ZENITH_EPS:
        raise SingularGeometryError("bearing undefined for coincident or "
                                    "antipodal points")
    d /= norm
    up, right = tangent_frame(r_hat)
    return math.atan2(float(d @ right), float(d @ up))


def angular_distance(beta: float, phi: float, beta_t: float, phi_t: float) -> float:
    """Great-circle angle between two (elevation, azimuth) points (rad)."""
    dot = float(np.clip(radial_unit(beta, phi) @ radial_unit(beta_t, phi_t),
                        -1.0, 1.0))
    return math.acos(dot)


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.fmod(angle + math.pi, 2.0 * math.pi)
    if wrapped <= 0.0:
        wrapped += 2.0 * math.pi
    return wrapped - math.pi
