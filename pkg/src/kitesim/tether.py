"""Discretized tether: a chain of point masses joined by spring-damper lines.

The chain runs from the pinned ground anchor (row 0 of the position arrays)
to the topmost particle, which either is the kite itself (one-point model)
or carries the control pod that the kite body attaches to (four-point
model). Reeling changes every segment's rest length at the same rate, so
stiffness and damping are renormalized per unit length each evaluation.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SingularGeometryError

GRAVITY = 9.81

#: Relative length below which two connected particles count as coincident.
COINCIDENCE_EPS = 1e-9


@dataclass
class TetherParams:
    """Physical tether properties.

    Args:
        n_segments: Number of spring-damper segments the tether is split into.
        diameter: Tether diameter (m), used by the cylinder drag model.
        linear_density: Mass per unit length (kg/m).
        unit_spring: Stiffness of a 1 m piece (N); actual segment stiffness
            is this value divided by the segment rest length.
        unit_damping: Damping of a 1 m piece (Ns); scaled like the stiffness.
        drag_coefficient: Cylinder drag coefficient of the tether.
        compression_factor: Stiffness multiplier when a segment is shorter
            than its rest length (lines barely push).
        min_segment_length: Floor for the rest length of one segment (m).
    """

    n_segments: int = 7
    diameter: float = 0.004
    linear_density: float = 0.013
    unit_spring: float = 614600.0
    unit_damping: float = 473.0
    drag_coefficient: float = 0.96
    compression_factor: float = 0.1
    min_segment_length: float = 1.0

    def __post_init__(self):
        if self.n_segments < 1:
            raise ConfigError("need at least one tether segment",
                              n_segments=self.n_segments)
        for name in ("diameter", "linear_density", "unit_spring",
                     "min_segment_length"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive",
                                  **{name: getattr(self, name)})
        # Zero damping is a legitimate setting for conservation studies.
        if self.unit_damping < 0.0:
            raise ConfigError("unit_damping must be non-negative",
                              unit_damping=self.unit_damping)
        if not (0.0 <= self.compression_factor <= 1.0):
            raise ConfigError("compression factor must lie in [0, 1]",
                              compression_factor=self.compression_factor)


@dataclass
class ReelState:
    """Reel-out length and speed latched at the last control boundary."""

    l_t_i: float = 392.0
    t_i: float = 0.0
    v_t_o: float = 0.0


def segment_rest_length(reel: ReelState, n_segments: int, t: float,
                        min_segment_length: float = 1.0) -> float:
    """Rest length of one segment at time t, linear between latch events."""
    l_s = (reel.l_t_i + reel.v_t_o * (t - reel.t_i)) / n_segments
    return max(l_s, min_segment_length)


def segment_constants(params: TetherParams, l_s: float) -> tuple[float, float]:
    """Spring and damping constants of a segment with rest length l_s."""
    if l_s <= 0.0:
        raise ConfigError("rest length must be positive", l_s=l_s)
    return params.unit_spring / l_s, params.unit_damping / l_s


def spring_damper_force(s: np.ndarray, s_v: np.ndarray, rest: float,
                        k: float, c: float, compression_factor: float,
                        index: int | None = None) -> np.ndarray:
    """Force a spring-damper line exerts on its lower endpoint.

    Args:
        s: Vector from the lower to the upper endpoint.
        s_v: Relative velocity (upper minus lower).
        rest: Rest length (m).
        k: Spring constant (N/m); reduced by ``compression_factor`` when the
            line is slack.
        c: Damping constant (Ns/m).
        compression_factor: Slack-stiffness multiplier.
        index: Optional particle index reported on singular geometry.

    Returns:
        Force vector on the lower endpoint; the upper endpoint sees the
        negation.
    """
    length = float(np.linalg.norm(s))
    if length < COINCIDENCE_EPS:
        raise SingularGeometryError("connected particles coincide",
                                    particle=index, separation=length)
    unit = s / length
    stretch = length - rest
    k_eff = k if stretch >= 0.0 else k * compression_factor
    magnitude = k_eff * stretch + c * float(unit @ s_v)
    return magnitude * unit


def chain_spring_forces(pos: np.ndarray, vel: np.ndarray, l_s: float,
                        params: TetherParams) -> tuple[np.ndarray, np.ndarray]:
    """Spring-damper forces along the whole chain, vectorized.

    Args:
        pos: Positions (n_segments + 1, 3) including the anchor at row 0.
        vel: Matching velocities.
        l_s: Current rest length of every segment.

    Returns:
        (forces on the moving particles 1..n, spring force on the anchor).
    """
    seg = pos[1:] - pos[:-1]
    lengths = np.sqrt(np.einsum("ij,ij->i", seg, seg))
    if lengths.min() < COINCIDENCE_EPS:
        small = lengths < COINCIDENCE_EPS
        raise SingularGeometryError("connected particles coincide",
                                    particle=int(np.argmax(small)),
                                    separation=float(lengths.min()))
    unit = seg / lengths[:, None]
    rel_v = vel[1:] - vel[:-1]
    stretch = lengths - l_s
    k, c = segment_constants(params, l_s)
    k_eff = np.where(stretch >= 0.0, k, k * params.compression_factor)
    magnitude = k_eff * stretch + c * np.einsum("ij,ij->i", unit, rel_v)
    f_seg = magnitude[:, None] * unit

    n = params.n_segments
    # f_seg[i] acts on segment i's lower endpoint; the upper one sees -f_seg[i].
    forces = -f_seg.copy()
    forces[: n - 1] += f_seg[1:]
    return forces, f_seg[0]


def chain_drag_forces(pos: np.ndarray, vel: np.ndarray, wind_mid: np.ndarray,
                      rho_mid: np.ndarray, params: TetherParams) -> np.ndarray:
    """Cylinder drag of each segment, split between its two endpoints.

    Args:
        pos: Positions (n_segments + 1, 3) including the anchor.
        vel: Matching velocities.
        wind_mid: Wind vector at each segment midpoint, (n_segments, 3).
        rho_mid: Air density at each segment midpoint, (n_segments,).

    Returns:
        Drag force on the moving particles 1..n, shape (n_segments, 3).
    """
    seg = pos[1:] - pos[:-1]
    lengths = np.sqrt(np.einsum("ij,ij->i", seg, seg))
    if lengths.min() < COINCIDENCE_EPS:
        small = lengths < COINCIDENCE_EPS
        raise SingularGeometryError("connected particles coincide",
                                    particle=int(np.argmax(small)),
                                    separation=float(lengths.min()))
    unit = seg / lengths[:, None]
    v_seg = 0.5 * (vel[1:] + vel[:-1])
    v_a = wind_mid - v_seg
    v_perp = v_a - np.einsum("ij,ij->i", v_a, unit)[:, None] * unit
    speed_perp = np.sqrt(np.einsum("ij,ij->i", v_perp, v_perp))
    area = lengths * params.diameter
    d_seg = (0.5 * params.drag_coefficient * rho_mid * speed_perp * area)[:, None] \
        * v_perp

    n = params.n_segments
    drag = np.zeros((n, 3))
    drag += 0.5 * d_seg
    drag[: n - 1] += 0.5 * d_seg[1:]
    return drag


def chain_masses(params: TetherParams, l_s: float) -> np.ndarray:
    """Lumped masses of the moving chain particles for rest length l_s.

    Interior particles carry half of each adjacent segment; the top particle
    carries half of the last segment only (the attached kite adds its own
    mass on top). The anchored half-segment rests on the ground station.
    """
    n = params.n_segments
    m = np.full(n, params.linear_density * l_s)
    m[-1] = 0.5 * params.linear_density * l_s
    return m


def anchor_lumped_mass(params: TetherParams, l_s: float) -> float:
    """Tether mass lumped at the ground anchor (half of segment 0)."""
    return 0.5 * params.linear_density * l_s


def ground_station_force(spring_on_anchor: np.ndarray, l_s: float,
                         params: TetherParams) -> np.ndarray:
    """Force the tether exerts on the ground station.

    Combines the first segment's spring pull with the weight of the tether
    piece lumped at the anchor, so a plain hanging tether reads its full
    weight.
    """
    weight = anchor_lumped_mass(params, l_s) * GRAVITY
    return spring_on_anchor - np.array([0.0, 0.0, weight])
