"""Automatic flight and winch control running at a fixed command cadence.

The stack mirrors a simple ground-station autopilot: a three-point path
planner chooses an attraction point on the wind-window sphere, a PI loop
steers the kite heading toward the great-circle bearing of that point,
actuator models delay and rate-limit the commands, and a speed/force PI
schedules the winch synchronous set speed per flight phase.

All controllers advance only at the fixed control interval; the plant may
take arbitrarily many solver sub-steps in between but sees piecewise
constant commands.
"""

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, SingularGeometryError
from .sphere import course_angle, elevation_azimuth, great_circle_bearing, \
    wrap_angle

#: Fixed command cadence (s); the plant holds commands constant in between.
CONTROL_DT = 0.05


class FlightPhase(Enum):
    """Operating phase of the pumping cycle state machine."""

    PARKING = "parking"
    REEL_OUT_RIGHT = "reel_out_right"
    REEL_OUT_LEFT = "reel_out_left"
    REEL_IN = "reel_in"


def is_reel_out(phase: FlightPhase) -> bool:
    """Whether the phase belongs to the power-producing reel-out leg."""
    return phase in (FlightPhase.REEL_OUT_RIGHT, FlightPhase.REEL_OUT_LEFT)


@dataclass(frozen=True)
class FlightPlanParams:
    """Attraction points and phase-machine thresholds.

    Attributes:
        min_length: Tether length (m) at which reel-in hands over to
            reel-out.
        max_length: Tether length (m) at which reel-out hands over to
            reel-in.
        target_elevation_deg: Elevation of both reel-out attraction points.
        target_azimuth_deg: Magnitude of the attraction point azimuth.
        turn_trigger_deg: Azimuth magnitude whose crossing flips the
            reel-out side.
    """

    min_length: float = 392.0
    max_length: float = 700.0
    target_elevation_deg: float = 25.0
    target_azimuth_deg: float = 25.0
    turn_trigger_deg: float = 25.0

    def __post_init__(self):
        if not self.min_length < self.max_length:
            raise ConfigError("min_length must be below max_length",
                              min_length=self.min_length,
                              max_length=self.max_length)
        if self.min_length <= 0.0:
            raise ConfigError("min_length must be positive")
        if not 0.0 < self.target_elevation_deg < 90.0:
            raise ConfigError("target elevation must lie in (0, 90) deg",
                              value=self.target_elevation_deg)
        if self.target_azimuth_deg <= 0.0 or self.turn_trigger_deg <= 0.0:
            raise ConfigError("azimuth targets must be positive")


class FlightPlanner:
    """Three-point planner with tether-length phase transitions.

    Parking and reel-in aim at the zenith; reel-out alternates between a
    point on either side of the wind window, flipping when the kite's
    azimuth sweeps past the turn trigger.
    """

    def __init__(self, params: FlightPlanParams,
                 initial_phase: FlightPhase = FlightPhase.PARKING):
        self.params = params
        self.phase = initial_phase

    def _enter_reel_out(self, azimuth: float) -> FlightPhase:
        # Aim across the window so the first sweep crosses the centre.
        if azimuth <= 0.0:
            return FlightPhase.REEL_OUT_RIGHT
        return FlightPhase.REEL_OUT_LEFT

    def step(self, azimuth: float, elevation: float,
             l_t: float) -> tuple[FlightPhase, tuple[float, float]]:
        """Advance the phase machine and return (phase, target).

        Args:
            azimuth: Kite azimuth (rad).
            elevation: Kite elevation (rad); unused by the transitions but
                part of the planner interface.
            l_t: Current unreeled tether length (m).

        Returns:
            The updated phase and the attraction point as
            (azimuth, elevation) in radians.
        """
        p = self.params
        trigger = math.radians(p.turn_trigger_deg)
        if is_reel_out(self.phase) and l_t >= p.max_length:
            self.phase = FlightPhase.REEL_IN
        elif self.phase is FlightPhase.REEL_IN and l_t <= p.min_length:
            self.phase = self._enter_reel_out(azimuth)
        if self.phase is FlightPhase.REEL_OUT_RIGHT and azimuth >= trigger:
            self.phase = FlightPhase.REEL_OUT_LEFT
        elif self.phase is FlightPhase.REEL_OUT_LEFT and azimuth <= -trigger:
            self.phase = FlightPhase.REEL_OUT_RIGHT

        if self.phase is FlightPhase.REEL_OUT_RIGHT:
            target = (math.radians(p.target_azimuth_deg),
                      math.radians(p.target_elevation_deg))
        elif self.phase is FlightPhase.REEL_OUT_LEFT:
            target = (-math.radians(p.target_azimuth_deg),
                      math.radians(p.target_elevation_deg))
        else:
            target = (0.0, math.pi / 2.0)
        return self.phase, target


@dataclass(frozen=True)
class HeadingGains:
    """PI gains of the heading loop, per radian of bearing error."""

    kp: float = 1.2
    ki: float = 0.2

    def __post_init__(self):
        if self.kp < 0.0 or self.ki < 0.0:
            raise ConfigError("heading gains must be non-negative")


class HeadingController:
    """PI heading loop with output clamp and integrator anti-windup."""

    def __init__(self, gains: HeadingGains):
        self.gains = gains
        self.integral = 0.0

    def reset(self):
        self.integral = 0.0

    def step(self, bearing_error: float, dt: float) -> float:
        """One PI update; returns the steering command in [-1, 1].

        The loop acts on the sine of the wrapped error: near +/-pi the
        course points straight away from the target, where steering has
        no corrective authority and a proportional response would flap
        between full left and full right as the error crosses the wrap.
        """
        if dt <= 0.0:
            raise ConfigError("dt must be positive", dt=dt)
        e = math.sin(wrap_angle(bearing_error))
        g = self.gains
        unsat = g.kp * e + self.integral + g.ki * e * dt
        if unsat > 1.0:
            # Integrate only in the unwinding direction while clamped.
            if e < 0.0:
                self.integral += g.ki * e * dt
            return 1.0
        if unsat < -1.0:
            if e > 0.0:
                self.integral += g.ki * e * dt
            return -1.0
        self.integral += g.ki * e * dt
        return unsat


@dataclass(frozen=True)
class ParkingGains:
    """PD station-keeping gains for the parked kite.

    A parked kite keeps full airspeed from the wind while moving barely
    at all over ground, so its course is undefined exactly where its
    steering surfaces still have authority. Station keeping therefore
    regulates the azimuth directly instead of tracking a course.

    Attributes:
        kp: Steering command per radian of azimuth error.
        kd: Steering command per radian/second of azimuth rate.
    """

    # Derivative gain is bounded by the steering actuator delay: around
    # eight the loop on a straight tether self-excites through the lag
    # instead of damping the pendulum.
    kp: float = 1.0
    kd: float = 4.0

    def __post_init__(self):
        if self.kp < 0.0 or self.kd < 0.0:
            raise ConfigError("parking gains must be non-negative")


@dataclass(frozen=True)
class ActuatorParams:
    """Transport delay plus rate-limited proportional tracking.

    Attributes:
        delay: Pure transport delay (s); rounded to whole control
            intervals.
        max_rate: Slew limit in full scale per second.
        tracking_gain: Proportional gain (1/s) of the tracking loop.
        lo, hi: Output saturation range.
    """

    delay: float = 0.15
    max_rate: float = 1.0
    tracking_gain: float = 20.0
    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if self.delay < 0.0 or self.max_rate <= 0.0 or \
                self.tracking_gain <= 0.0:
            raise ConfigError("actuator parameters out of range")
        if not self.lo < self.hi:
            raise ConfigError("actuator range is empty",
                              lo=self.lo, hi=self.hi)


class Actuator:
    """One delayed, slew-limited actuation channel."""

    def __init__(self, params: ActuatorParams, dt: float, initial: float):
        if dt <= 0.0:
            raise ConfigError("dt must be positive", dt=dt)
        self.params = params
        self.dt = dt
        steps = max(0, round(params.delay / dt))
        self._line = deque([initial] * steps, maxlen=max(steps, 1))
        self._steps = steps
        self.output = float(np.clip(initial, params.lo, params.hi))

    def step(self, command: float) -> float:
        """Push one command; returns the actuated value for the interval."""
        p = self.params
        command = float(np.clip(command, p.lo, p.hi))
        if self._steps == 0:
            delayed = command
        else:
            delayed = self._line[0]
            self._line.append(command)
        rate = p.max_rate * self.dt
        err = delayed - self.output
        move = p.tracking_gain * err * self.dt
        if abs(move) > abs(err):
            move = err  # never overshoot the delayed command
        self.output += float(np.clip(move, -rate, rate))
        self.output = float(np.clip(self.output, p.lo, p.hi))
        return self.output


@dataclass(frozen=True)
class WinchSetpoints:
    """Per-phase speed targets and force guards of the winch loop.

    Attributes:
        v_out_set: Baseline reel-out speed (m/s) while under the force
            limit.
        f_max_out: Reel-out force limit (N); excess force raises the set
            speed.
        v_in_set: Reel-in speed magnitude (m/s).
        f_in_set: Reel-in tension floor (N); falling tension backs the
            reel-in speed off toward zero.
        transition_tau: Time constant (s) of the soft set-point filter.
        v_limit: Absolute bound on the synchronous set speed (m/s).
    """

    v_out_set: float = 1.5
    f_max_out: float = 2900.0
    v_in_set: float = 8.0
    f_in_set: float = 300.0
    transition_tau: float = 1.0
    v_limit: float = 8.5

    def __post_init__(self):
        if self.f_max_out <= 0.0 or self.f_in_set <= 0.0:
            raise ConfigError("force set points must be positive")
        if self.v_out_set < 0.0 or self.v_in_set <= 0.0:
            raise ConfigError("speed set points out of range")
        if self.transition_tau <= 0.0 or self.v_limit <= 0.0:
            raise ConfigError("transition_tau and v_limit must be positive")


@dataclass(frozen=True)
class WinchGains:
    """PID gains of the winch force loops, in m/s per newton."""

    kp: float = 2e-3
    ki: float = 5e-4
    kd: float = 0.0

    def __post_init__(self):
        if self.kp < 0.0 or self.ki < 0.0 or self.kd < 0.0:
            raise ConfigError("winch gains must be non-negative")


class WinchController:
    """Phase-scheduled winch speed/force control with soft transitions.

    Reel-out tracks the baseline speed until the tether force exceeds the
    limit, then a PI term raises the set speed to shed force. Reel-in
    tracks the negative speed target and backs off when tension falls
    below the floor. A single first-order filter on the final set speed
    keeps phase hand-overs continuous.
    """

    #: Clamp on either force integrator (m/s of accumulated correction).
    INTEGRAL_LIMIT = 10.0

    def __init__(self, setpoints: WinchSetpoints, gains_out: WinchGains,
                 gains_in: WinchGains, dt: float):
        if dt <= 0.0:
            raise ConfigError("dt must be positive", dt=dt)
        self.setpoints = setpoints
        self.gains_out = gains_out
        self.gains_in = gains_in
        self.dt = dt
        self.v_set = 0.0
        self._i_out = 0.0
        self._i_in = 0.0
        self._prev_force = None
        self._prev_phase = None

    def _raw_target(self, force: float, phase: FlightPhase) -> float:
        s = self.setpoints
        if self._prev_force is None:
            self._prev_force = force
        dfdt = (force - self._prev_force) / self.dt
        if is_reel_out(phase):
            g = self.gains_out
            e = force - s.f_max_out
            self._i_out = float(np.clip(self._i_out + g.ki * e * self.dt,
                                        0.0, self.INTEGRAL_LIMIT))
            corr = g.kp * e + self._i_out + g.kd * dfdt
            return s.v_out_set + max(0.0, corr)
        if phase is FlightPhase.REEL_IN:
            g = self.gains_in
            e = s.f_in_set - force
            self._i_in = float(np.clip(self._i_in + g.ki * e * self.dt,
                                       0.0, self.INTEGRAL_LIMIT))
            corr = g.kp * e + self._i_in - g.kd * dfdt
            return min(0.0, -s.v_in_set + max(0.0, corr))
        return 0.0

    def step(self, force: float, reel_speed: float,
             phase: FlightPhase) -> float:
        """One control update; returns the synchronous set speed (m/s)."""
        if phase is not self._prev_phase:
            # Fresh integrators per leg; the output filter carries the
            # soft transition.
            self._i_out = 0.0
            self._i_in = 0.0
            self._prev_phase = phase
        s = self.setpoints
        raw = float(np.clip(self._raw_target(force, phase),
                            -s.v_limit, s.v_limit))
        self._prev_force = force
        blend = self.dt / s.transition_tau
        self.v_set += blend * (raw - self.v_set)
        return self.v_set


@dataclass(frozen=True)
class DepowerSchedule:
    """Fixed depower commands per phase."""

    reel_out: float = 0.25
    reel_in: float = 0.401
    parking: float = 0.25

    def __post_init__(self):
        for v in (self.reel_out, self.reel_in, self.parking):
            if not 0.0 <= v <= 1.0:
                raise ConfigError("depower settings must lie in [0, 1]",
                                  value=v)

    def command(self, phase: FlightPhase) -> float:
        if is_reel_out(phase):
            return self.reel_out
        if phase is FlightPhase.REEL_IN:
            return self.reel_in
        return self.parking


@dataclass(frozen=True)
class ControllerParams:
    """Bundle of every control-stack parameter block."""

    plan: FlightPlanParams = field(default_factory=FlightPlanParams)
    heading: HeadingGains = field(default_factory=HeadingGains)
    parking: ParkingGains = field(default_factory=ParkingGains)
    steering_actuator: ActuatorParams = field(default_factory=ActuatorParams)
    depower_actuator: ActuatorParams = field(default_factory=lambda:
                                             ActuatorParams(max_rate=0.2,
                                                            lo=0.0, hi=1.0))
    setpoints: WinchSetpoints = field(default_factory=WinchSetpoints)
    winch_gains_out: WinchGains = field(default_factory=WinchGains)
    winch_gains_in: WinchGains = field(default_factory=WinchGains)
    depower: DepowerSchedule = field(default_factory=DepowerSchedule)


@dataclass(frozen=True)
class ManualOverride:
    """Per-channel manual commands; None leaves the channel automatic."""

    steering: float | None = None
    depower: float | None = None
    winch: float | None = None


@dataclass(frozen=True)
class ControlSignals:
    """Commands and actuated values for one control interval."""

    i_s: float
    i_d: float
    u_s: float
    u_d: float
    v_s_set: float
    phase: FlightPhase
    course: float
    bearing: float
    heading_error: float


class AutoPilot:
    """Full control stack evaluated once per control interval."""

    #: Kite speed (m/s) below which the course over ground is undefined
    #: and the heading loop stands down instead of chasing noise.
    COURSE_SPEED_FLOOR = 0.3

    #: Speed span (m/s) above the floor over which steering authority
    #: fades back in; a parked kite creeping sideways must be caught well
    #: before it picks up real speed.
    COURSE_RAMP_SPAN = 0.7

    def __init__(self, params: ControllerParams, dt: float = CONTROL_DT,
                 initial_phase: FlightPhase = FlightPhase.PARKING):
        self.params = params
        self.dt = dt
        self.planner = FlightPlanner(params.plan, initial_phase)
        self.heading = HeadingController(params.heading)
        depower0 = params.depower.command(initial_phase)
        self.steering = Actuator(params.steering_actuator, dt, 0.0)
        self.depower = Actuator(params.depower_actuator, dt, depower0)
        self.winch = WinchController(params.setpoints,
                                     params.winch_gains_out,
                                     params.winch_gains_in, dt)
        self._course = 0.0
        self._bearing = 0.0

    @property
    def phase(self) -> FlightPhase:
        return self.planner.phase

    def step(self, pos: np.ndarray, vel: np.ndarray, l_t: float,
             reel_speed: float, ground_force: float,
             override: ManualOverride | None = None) -> ControlSignals:
        """Evaluate every loop for one interval.

        Args:
            pos: Kite position in the ground frame (m).
            vel: Kite velocity (m/s).
            l_t: Unreeled tether length (m).
            reel_speed: Current reel-out speed (m/s).
            ground_force: Tether force at the ground station (N).
            override: Optional manual commands replacing individual
                channels before actuator dynamics.

        Returns:
            The control signals to hold for the next interval.
        """
        beta, phi = elevation_azimuth(pos)
        phase, (phi_t, beta_t) = self.planner.step(phi, beta, l_t)
        try:
            self._bearing = great_circle_bearing(beta, phi, beta_t, phi_t)
        except SingularGeometryError:
            pass  # hold the previous bearing near degenerate geometry
        speed = float(np.linalg.norm(vel))
        if speed >= self.COURSE_SPEED_FLOOR:
            try:
                self._course = course_angle(pos, vel)
            except SingularGeometryError:
                pass  # hold the previous course through the singularity
        if phase is FlightPhase.PARKING:
            # Station keeping regulates azimuth directly: the wind gives
            # the steering surfaces authority even when the kite barely
            # moves over ground and its course is undefined.
            r_h2 = float(pos[0]) ** 2 + float(pos[1]) ** 2
            if r_h2 > 1.0:
                phi_rate = (float(pos[0]) * float(vel[1]) -
                            float(pos[1]) * float(vel[0])) / r_h2
            else:
                phi_rate = 0.0
            g = self.params.parking
            error = wrap_angle(-phi)
            i_s = float(np.clip(g.kp * error - g.kd * phi_rate, -1.0, 1.0))
            self.heading.reset()
        elif speed >= self.COURSE_SPEED_FLOOR:
            error = wrap_angle(self._bearing - self._course)
            i_s = self.heading.step(error, self.dt)
            # Fade authority back in with speed so a slow kite does not
            # trigger full-scale steering off a noisy course estimate.
            ramp = min(1.0, (speed - self.COURSE_SPEED_FLOOR) /
                       self.COURSE_RAMP_SPAN)
            i_s *= ramp
        else:
            # A near-stationary kite has no usable course; steering on a
            # stale estimate whips the kite into crosswind flight.
            self.heading.reset()
            error = 0.0
            i_s = 0.0
        i_d = self.params.depower.command(phase)
        if override is not None and override.steering is not None:
            i_s = float(np.clip(override.steering, -1.0, 1.0))
        if override is not None and override.depower is not None:
            i_d = float(np.clip(override.depower, 0.0, 1.0))
        u_s = self.steering.step(i_s)
        u_d = self.depower.step(i_d)
        if override is not None and override.winch is not None:
            s = self.params.setpoints
            raw = float(np.clip(override.winch, -s.v_limit, s.v_limit))
            blend = self.dt / s.transition_tau
            self.winch.v_set += blend * (raw - self.winch.v_set)
            v_s_set = self.winch.v_set
        else:
            v_s_set = self.winch.step(ground_force, reel_speed, phase)
        return ControlSignals(i_s=i_s, i_d=i_d, u_s=u_s, u_d=u_d,
                              v_s_set=v_s_set, phase=phase,
                              course=self._course, bearing=self._bearing,
                              heading_error=error)
