"""Plant assembly and time stepping for the complete power system.

The plant couples the particle tether, one of the two kite models and the
induction-machine winch into a single first-order state vector

    y = [positions, velocities, l_t, v_t_o]

laid out particle-major (tether particles above the anchor first, then the
four wing particles when present). The anchor itself is pinned and never
part of the state. Each control interval is integrated with an adaptive
implicit stiff solver; commands and the latched segment rest length stay
constant within an interval.

Degenerate aerodynamic evaluations (apparent wind under the floor, flow
parallel to the tether) fall back to a drag-only or zero force instead of
aborting: at those speeds the dynamic pressure is physically negligible,
and the fallback keeps transients integrable.
"""

import math
import time as _time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import root as _root

from .atmosphere import WindField
from .controller import (
    CONTROL_DT,
    AutoPilot,
    FlightPhase,
    ManualOverride,
)
from .cyclelog import CycleLog, LogRecord
from .errors import ConfigError, DegenerateFlowError, InstabilityError, \
    SingularGeometryError, SolverFailure
from .kite_four_point import (
    WING_SPRINGS,
    FourPointGeometry,
    body_frame,
    init_particles,
    rotate_frame_about_span,
    spring_rest_lengths,
    surface_forces,
    wing_masses,
)
from .kite_one_point import KiteFrame, KiteParams, aero_forces, kite_frame
from .sphere import course_angle, elevation_azimuth, radial_unit, \
    tangent_frame
from .tether import (
    GRAVITY,
    ReelState,
    TetherParams,
    chain_drag_forces,
    chain_masses,
    chain_spring_forces,
    ground_station_force,
    segment_rest_length,
)
from .winch import WinchParams, reel_acceleration

# Ground speed under which the kite course direction carries no usable
# information for the heading-dependent weight correction.
PSI_SPEED_FLOOR = 0.5


@dataclass(frozen=True)
class SolverSettings:
    """Integrator tolerances and cadence.

    Attributes:
        atol_position: Absolute tolerance on positions and length (m).
        atol_velocity: Absolute tolerance on velocities (m/s).
        rtol: Relative tolerance of the stiff solver.
        control_dt: Fixed command interval (s).
        max_steps: Cap on accepted solver steps per interval.
    """

    atol_position: float = 0.018
    atol_velocity: float = 3e-4
    rtol: float = 1e-6
    control_dt: float = CONTROL_DT
    max_steps: int = 20000

    def __post_init__(self):
        if min(self.atol_position, self.atol_velocity, self.rtol,
               self.control_dt) <= 0.0:
            raise ConfigError("solver tolerances must be positive")
        if self.max_steps < 10:
            raise ConfigError("max_steps too small", value=self.max_steps)


@dataclass(frozen=True)
class PlantControls:
    """Commands held constant over one integration interval."""

    i_s: float = 0.0
    u_s: float = 0.0
    u_d: float = 0.25
    v_s_set: float = 0.0
    winch_locked: bool = True


@dataclass(frozen=True)
class Diagnostics:
    """Measured quantities derived from one state snapshot."""

    kite_pos: np.ndarray
    kite_vel: np.ndarray
    elevation: float
    azimuth: float
    course: float | None
    heading: float | None
    v_a: float
    ground_force: float
    drive_force: float
    l_t: float
    v_t_o: float


class PlantModel:
    """Force assembly and derivatives for one model configuration."""

    def __init__(self, tether: TetherParams, kite: KiteParams,
                 winch: WinchParams, wind: WindField, model: str = "4p",
                 geometry: FourPointGeometry | None = None):
        if model not in ("1p", "4p"):
            raise ConfigError("kite model must be '1p' or '4p'", model=model)
        self.tether = tether
        self.kite = kite
        self.winch = winch
        self.wind = wind
        self.model = model
        self.n = tether.n_segments
        self.n_moving = self.n + (4 if model == "4p" else 0)
        self.dim = 6 * self.n_moving + 2
        #: Row index of the particle used as the kite reference point.
        self.kite_index = self.n - 1
        if model == "4p":
            self.geometry = geometry if geometry is not None \
                else FourPointGeometry()
            self._rest = spring_rest_lengths(self.geometry)
            self._spring_i = np.array([i for i, _ in WING_SPRINGS])
            self._spring_j = np.array([j for _, j in WING_SPRINGS])
            self._k_line = self.geometry.line_unit_spring / self._rest
            self._c_line = self.geometry.line_unit_damping / self._rest
            self._wing_m = wing_masses(kite, self.geometry)
            # Signed incidence matrix turns the per-spring forces into
            # per-particle sums with one small matmul.
            inc = np.zeros((5, len(WING_SPRINGS)))
            for k, (i, j) in enumerate(WING_SPRINGS):
                inc[i, k] = 1.0
                inc[j, k] = -1.0
            self._incidence = inc
            self._p5 = np.empty((5, 3))
            self._v5 = np.empty((5, 3))
        else:
            self.geometry = None
        self._psi_fallback = 0.0
        # Scratch buffers for the hot force assembly; the solver is
        # single-threaded so reuse is safe.
        self._full_pos = np.zeros((self.n + 1, 3))
        self._full_vel = np.zeros((self.n + 1, 3))

    # ------------------------------------------------------------------
    # state layout

    def pack(self, pos: np.ndarray, vel: np.ndarray, l_t: float,
             v_t: float) -> np.ndarray:
        return np.concatenate([pos.ravel(), vel.ravel(), [l_t, v_t]])

    def unpack(self, y: np.ndarray):
        m = self.n_moving
        pos = y[: 3 * m].reshape(m, 3)
        vel = y[3 * m: 6 * m].reshape(m, 3)
        return pos, vel, float(y[6 * m]), float(y[6 * m + 1])

    def masses(self, l_s: float) -> np.ndarray:
        m = np.empty(self.n_moving)
        m[: self.n] = chain_masses(self.tether, l_s)
        if self.model == "1p":
            m[self.n - 1] += self.kite.total_mass
        else:
            m[self.n - 1] += self.kite.kcu_mass
            m[self.n:] = self._wing_m
        return m

    # ------------------------------------------------------------------
    # initial conditions

    def _initial_frame(self, r_hat: np.ndarray, z: float) -> KiteFrame:
        v_a = self.wind.vector(z)
        try:
            return kite_frame(r_hat, v_a)
        except DegenerateFlowError:
            up, right = tangent_frame(r_hat)
            return KiteFrame(e_x=up, e_y=right, e_z=-r_hat)

    def initial_state(self, elevation_deg: float, azimuth_deg: float,
                      l_t: float, pitch_back_deg: float = 0.0) -> np.ndarray:
        """Straight-line tether toward the initial kite position, at rest.

        Args:
            elevation_deg: Kite elevation above the horizon.
            azimuth_deg: Kite azimuth from the downwind axis.
            l_t: Unreeled tether length (m).
            pitch_back_deg: Extra nose-up rotation of the wing about its
                span axis, away from the tether-aligned attitude. A parked
                wing trims well behind the tether line, so starting the
                equilibrium search reared back avoids a long transient.
        """
        if l_t <= 0.0:
            raise ConfigError("initial length must be positive", l_t=l_t)
        r_hat = radial_unit(math.radians(elevation_deg),
                            math.radians(azimuth_deg))
        pos = np.zeros((self.n_moving, 3))
        fractions = np.arange(1, self.n + 1) / self.n
        pos[: self.n] = fractions[:, None] * l_t * r_hat
        if self.model == "4p":
            p_kcu = pos[self.n - 1]
            frame0 = self._initial_frame(r_hat, float(p_kcu[2]))
            if pitch_back_deg != 0.0:
                frame0 = rotate_frame_about_span(frame0,
                                                 math.radians(pitch_back_deg))
            pos[self.n:] = init_particles(p_kcu, frame0, self.geometry)
        vel = np.zeros_like(pos)
        return self.pack(pos, vel, l_t, 0.0)

    # ------------------------------------------------------------------
    # forces

    def _one_point_aero(self, seg_unit, pos_k, vel_k, controls):
        z = float(pos_k[2])
        v_a = self.wind.vector(z) - vel_k
        rho = self.wind.rho(z)
        speed = math.sqrt(float(v_a @ v_a))
        try:
            frame = kite_frame(seg_unit, v_a)
        except DegenerateFlowError:
            if speed < 1e-9:
                return np.zeros(3), speed
            # Flow degenerate for lift: keep the bare drag reaction.
            c_l, c_d = self.kite.table.coefficients(
                math.radians(self.kite.alpha0_deg))
            q = 0.5 * rho * speed * self.kite.area * c_d
            return q * v_a, speed
        # Below a real flight speed the course direction is numerical
        # noise; freezing the heading keeps the right-hand side smooth.
        if math.sqrt(float(vel_k @ vel_k)) >= PSI_SPEED_FLOOR:
            try:
                psi = course_angle(pos_k, vel_k)
                self._psi_fallback = psi
            except SingularGeometryError:
                psi = self._psi_fallback
        else:
            psi = self._psi_fallback
        r = math.sqrt(float(pos_k @ pos_k))
        beta = math.asin(min(1.0, max(-1.0, float(pos_k[2]) / r)))
        out = aero_forces(self.kite, frame, v_a, rho, controls.i_s,
                          controls.u_s, controls.u_d, psi, beta)
        return out.force, out.v_a_mag

    def _wing_spring_forces(self, p5: np.ndarray, v5: np.ndarray):
        s = p5[self._spring_j] - p5[self._spring_i]
        lengths = np.sqrt(np.einsum("ij,ij->i", s, s))
        if lengths.min() < 1e-9:
            raise SingularGeometryError("wing particles coincide")
        unit = s / lengths[:, None]
        stretch = lengths - self._rest
        k_eff = np.where(stretch >= 0.0, self._k_line,
                         self._k_line * self.tether.compression_factor)
        rel_v = v5[self._spring_j] - v5[self._spring_i]
        mag = k_eff * stretch + self._c_line * \
            np.einsum("ij,ij->i", unit, rel_v)
        return self._incidence @ (mag[:, None] * unit)

    def _four_point_aero(self, wing_pos, wing_vel, controls):
        frame = body_frame(wing_pos)
        z_bcd = wing_pos[1:, 2]
        wind = self.wind.vector_at(z_bcd)
        v_a = wind - wing_vel[1:]
        centre = 0.5 * (wing_pos[2] + wing_pos[3])
        rho = self.wind.rho(float(centre[2]))
        try:
            sf = surface_forces(self.kite, self.geometry, frame,
                                v_a[0], v_a[1], v_a[2], rho,
                                controls.u_s, controls.u_d)
        except DegenerateFlowError:
            return np.zeros((4, 3)), 0.0
        forces = np.zeros((4, 3))
        forces[1] = sf.force_b
        forces[2] = sf.force_c
        forces[3] = sf.force_d
        return forces, sf.v_a_centre

    def forces(self, t: float, y: np.ndarray, controls: PlantControls,
               reel: ReelState):
        """Total force on every moving particle plus the anchor pull."""
        pos, vel, l_t, v_t = self.unpack(y)
        l_s = segment_rest_length(reel, self.n, t,
                                  self.tether.min_segment_length)
        full_pos = self._full_pos
        full_vel = self._full_vel
        full_pos[1:] = pos[: self.n]
        full_vel[1:] = vel[: self.n]
        spring, anchor = chain_spring_forces(full_pos, full_vel, l_s,
                                             self.tether)
        mid_z = 0.5 * (full_pos[1:, 2] + full_pos[:-1, 2])
        wind_mid = self.wind.vector_at(mid_z)
        dens = self.wind.density
        rho_mid = dens.rho0 * np.exp(-np.maximum(mid_z, 0.0) /
                                     dens.scale_height)
        drag = chain_drag_forces(full_pos, full_vel, wind_mid, rho_mid,
                                 self.tether)
        m = self.masses(l_s)
        forces = np.zeros_like(pos)
        forces[: self.n] = spring + drag
        forces[:, 2] -= m * GRAVITY
        if self.model == "1p":
            seg = pos[self.n - 1] - (full_pos[self.n - 1])
            seg_unit = seg / math.sqrt(float(seg @ seg))
            aero, v_a = self._one_point_aero(seg_unit, pos[self.n - 1],
                                             vel[self.n - 1], controls)
            forces[self.n - 1] += aero
        else:
            p5, v5 = self._p5, self._v5
            p5[:4] = pos[self.n:]
            p5[4] = pos[self.n - 1]
            v5[:4] = vel[self.n:]
            v5[4] = vel[self.n - 1]
            line = self._wing_spring_forces(p5, v5)
            forces[self.n:] += line[:4]
            forces[self.n - 1] += line[4]
            aero, v_a = self._four_point_aero(pos[self.n:], vel[self.n:],
                                              controls)
            forces[self.n:] += aero
        return forces, anchor, m, l_s, v_a

    def rhs(self, t: float, y: np.ndarray,
            controls: PlantControls, reel: ReelState) -> np.ndarray:
        forces, anchor, m, _, _ = self.forces(t, y, controls, reel)
        _, vel, _, v_t = self.unpack(y)
        acc = forces / m[:, None]
        if controls.winch_locked:
            dl, dv = 0.0, 0.0
        else:
            drive = math.sqrt(float(anchor @ anchor))
            dl = v_t
            dv = reel_acceleration(self.winch, v_t, controls.v_s_set, drive)
        return self.pack(vel, acc, dl, dv)

    def residual(self, t: float, y: np.ndarray, ydot: np.ndarray,
                 controls: PlantControls, reel: ReelState) -> np.ndarray:
        """Implicit-form residual; zero along a consistent trajectory."""
        return np.asarray(ydot) - self.rhs(t, y, controls, reel)

    # ------------------------------------------------------------------
    # measurements

    def diagnostics(self, t: float, y: np.ndarray, controls: PlantControls,
                    reel: ReelState) -> Diagnostics:
        pos, vel, l_t, v_t = self.unpack(y)
        _, anchor, _, l_s, v_a = self.forces(t, y, controls, reel)
        station = ground_station_force(anchor, l_s, self.tether)
        k = self.kite_index
        try:
            course = course_angle(pos[k], vel[k])
        except SingularGeometryError:
            course = None
        # The logged heading is the wing yaw about the tether axis; the
        # point-mass wing has no orientation of its own, so its course
        # stands in.
        if self.model == "4p":
            try:
                frame = body_frame(pos[self.n:])
                heading = course_angle(pos[k], frame.e_x)
            except SingularGeometryError:
                heading = None
        else:
            heading = course
        beta, phi = elevation_azimuth(pos[k])
        return Diagnostics(kite_pos=pos[k].copy(), kite_vel=vel[k].copy(),
                           elevation=beta, azimuth=phi, course=course,
                           heading=heading, v_a=v_a,
                           ground_force=float(np.linalg.norm(station)),
                           drive_force=float(np.linalg.norm(anchor)),
                           l_t=l_t, v_t_o=v_t)

    def particle_positions(self, y: np.ndarray) -> np.ndarray:
        """All particle positions including the anchor, for rendering."""
        pos, _, _, _ = self.unpack(y)
        return np.vstack([np.zeros(3), pos])

    # ------------------------------------------------------------------
    # sparsity pattern for the solver's finite-difference Jacobian

    def jacobian_sparsity(self) -> np.ndarray:
        m = self.n_moving
        s = np.zeros((self.dim, self.dim), dtype=np.int8)

        def vrow(r, c, vel_col):
            rr = 3 * m + 3 * r
            cc = 3 * c + (3 * m if vel_col else 0)
            s[rr: rr + 3, cc: cc + 3] = 1

        for i in range(m):
            s[3 * i: 3 * i + 3, 3 * m + 3 * i: 3 * m + 3 * i + 3] = 1
        for i in range(self.n):
            for j in (i - 1, i, i + 1):
                if 0 <= j < self.n:
                    vrow(i, j, False)
                    vrow(i, j, True)
        if self.model == "4p":
            clique = [self.n - 1] + list(range(self.n, m))
            for r in clique:
                for c in clique:
                    vrow(r, c, False)
                    vrow(r, c, True)
        s[6 * m, 6 * m + 1] = 1
        s[6 * m + 1, 0: 3] = 1
        s[6 * m + 1, 3 * m: 3 * m + 3] = 1
        s[6 * m + 1, 6 * m + 1] = 1
        return s


class GroupedJacobian:
    """Finite-difference Jacobian exploiting a fixed sparsity pattern.

    Columns whose row supports do not overlap share a single perturbed
    evaluation, so one Jacobian costs n_groups + 1 right-hand sides instead
    of one per state entry. The result is assembled dense: at this system
    size plain LAPACK factorizations beat sparse LU by a wide margin.
    """

    #: Relative perturbation; loose on purpose, the implicit solver only
    #: needs the Jacobian for Newton convergence, not for accuracy.
    REL_STEP = 1e-6

    def __init__(self, plant: PlantModel):
        mask = plant.jacobian_sparsity() != 0
        n = mask.shape[1]
        self.plant = plant
        self.rows = [np.flatnonzero(mask[:, c]) for c in range(n)]
        taken = np.zeros(n, dtype=bool)
        groups = []
        for c in range(n):
            if taken[c]:
                continue
            cover = mask[:, c].copy()
            cols = [c]
            taken[c] = True
            for d in range(c + 1, n):
                if not taken[d] and not (cover & mask[:, d]).any():
                    cols.append(d)
                    taken[d] = True
                    cover |= mask[:, d]
            groups.append(np.array(cols))
        self.groups = groups
        self.n = n

    def __call__(self, t: float, y: np.ndarray, controls: PlantControls,
                 reel: ReelState) -> np.ndarray:
        rhs = self.plant.rhs
        f0 = rhs(t, y, controls, reel)
        jac = np.zeros((self.n, self.n))
        for cols in self.groups:
            yp = y.copy()
            steps = self.REL_STEP * np.maximum(np.abs(y[cols]), 1.0)
            yp[cols] += steps
            df = rhs(t, yp, controls, reel) - f0
            for h, c in zip(steps, cols):
                r = self.rows[c]
                jac[r, c] = df[r] / h
        return jac


def equilibrium_state(plant: PlantModel, elevation_deg: float,
                      azimuth_deg: float, l_t: float,
                      controls: PlantControls | None = None,
                      pitch_back_deg: float = 0.0,
                      force_tol: float = 2.5) -> np.ndarray:
    """Static force-balance state of the parked system, winch locked.

    Solves for particle positions where the net force on every particle
    vanishes under the mean wind, starting from the straight-line layout.
    The result carries zero velocities, so a run started from it sees no
    stretch-and-sag transient: the tether already bows downwind under its
    distributed drag and every spring carries its standing load.

    Args:
        plant: Assembled plant whose force model defines the balance.
        elevation_deg: Elevation of the straight-line starting guess.
        azimuth_deg: Azimuth of the starting guess.
        l_t: Unreeled tether length (m), held fixed by the locked winch.
        controls: Commands frozen during the solve; defaults to the
            neutral parked set.
        pitch_back_deg: Initial wing pitch of the guess (four-point only).
        force_tol: Largest allowed residual force component (N).

    Returns:
        Packed state vector at the equilibrium.

    Raises:
        SolverFailure: No force balance within tolerance was found.
    """
    if controls is None:
        controls = PlantControls()
    reel = ReelState(l_t_i=l_t, t_i=0.0, v_t_o=0.0)
    m = plant.n_moving
    template = plant.initial_state(elevation_deg, azimuth_deg, l_t,
                                   pitch_back_deg=pitch_back_deg)

    def residual(x: np.ndarray) -> np.ndarray:
        yv = template
        yv[: 3 * m] = x
        forces, _, _, _, _ = plant.forces(0.0, yv, controls, reel)
        return forces.ravel()

    # Bias each guess onto the taut branch of every spring so the
    # solver's finite differences do not straddle the slack-stiffness
    # kink. The basin of the root depends on the guess elevation, so a
    # stalled solve retries from neighbouring elevations.
    pretension_strain = 500.0 / plant.tether.unit_spring
    best_residual = math.inf
    best_message = ""
    for d_elev in (0.0, -8.0, 6.0, -16.0, 12.0):
        y0 = plant.initial_state(elevation_deg + d_elev, azimuth_deg, l_t,
                                 pitch_back_deg=pitch_back_deg)
        x0 = y0[: 3 * m] * (1.0 + pretension_strain)
        for method in ("hybr", "lm"):
            sol = _root(residual, x0, method=method,
                        options={"xtol": 1e-12, "maxfev": 40000}
                        if method == "hybr" else
                        {"xtol": 1e-12, "maxiter": 4000})
            worst = float(np.abs(sol.fun).max())
            if worst <= force_tol:
                y_eq = template.copy()
                y_eq[: 3 * m] = sol.x
                return y_eq
            if worst < best_residual:
                best_residual = worst
                best_message = str(sol.message)
    raise SolverFailure("no static equilibrium found",
                        residual=best_residual, detail=best_message)


def step_interval(plant: PlantModel, t: float, y: np.ndarray,
                  controls: PlantControls, reel: ReelState,
                  solver: SolverSettings,
                  jac: GroupedJacobian | None = None,
                  first_step: float | None = None
                  ) -> tuple[np.ndarray, float]:
    """Advance one control interval with the stiff solver.

    Args:
        jac: Optional shared-evaluation Jacobian. It is evaluated once at
            the interval start and passed to the solver as a constant
            matrix; commands are frozen over the interval, so a fresh
            Jacobian every 50 ms tracks the dynamics closely enough for
            the Newton iterations while costing a fixed n_groups + 1
            evaluations.
        first_step: Step size hint, typically the last accepted step of
            the previous interval.

    Returns:
        (state at the interval end, last accepted step size).

    Raises:
        SolverFailure: The solver could not reach the interval end within
            its step budget or tolerances.
        InstabilityError: The new state contains non-finite entries.
    """
    m = plant.n_moving
    atol = np.empty(plant.dim)
    atol[: 3 * m] = solver.atol_position
    atol[3 * m: 6 * m] = solver.atol_velocity
    atol[6 * m] = solver.atol_position
    atol[6 * m + 1] = solver.atol_velocity
    t_end = t + solver.control_dt
    if first_step is not None:
        # Clamp to the realized span, not the nominal interval: the sum
        # above can round to a hair less than control_dt, and the solver
        # rejects a first step that exceeds the span even marginally.
        first_step = min(max(first_step, 1e-8), t_end - t)
    jac_mat = jac(t, y, controls, reel) if jac is not None else None
    # Deterministic fallback ladder: the step hint or the frozen Jacobian
    # can occasionally deadlock the step-size control right after a sharp
    # command change; retrying without them is cheap and rare.
    attempts = ((jac_mat, first_step), (jac_mat, None), (None, None))
    sol = None
    for jac_try, fs_try in attempts:
        sol = solve_ivp(plant.rhs, (t, t_end), y,
                        method="Radau", rtol=solver.rtol, atol=atol,
                        args=(controls, reel), jac=jac_try,
                        first_step=fs_try, dense_output=False)
        if sol.success:
            break
    if not sol.success:
        raise SolverFailure("implicit solver failed inside interval",
                            t=t, detail=sol.message)
    if sol.t.size > solver.max_steps:
        raise SolverFailure("solver exceeded step budget", t=t,
                            steps=int(sol.t.size))
    y_new = sol.y[:, -1]
    if not np.isfinite(y_new).all():
        raise InstabilityError("state diverged", t=t)
    if sol.t.size > 1:
        last_step = float(sol.t[-1] - sol.t[-2])
    else:
        last_step = solver.control_dt
    return y_new, last_step


@dataclass
class RealtimeReport:
    """Outcome of a paced session."""

    intervals: int = 0
    deadline_misses: int = 0
    degraded: bool = False


class Simulator:
    """Drives the control cadence over the plant for batch and live runs."""

    #: Settle time with controllers frozen before logging starts (s).
    SETTLE_DURATION = 5.0

    def __init__(self, plant: PlantModel, pilot: AutoPilot | None = None,
                 solver: SolverSettings | None = None):
        self.plant = plant
        self.pilot = pilot
        self.solver = solver if solver is not None else SolverSettings()
        self._jac = GroupedJacobian(plant)
        self._step_hint: float | None = None
        self._heading = 0.0

    # ------------------------------------------------------------------

    def settle(self, y: np.ndarray, controls: PlantControls,
               duration: float | None = None,
               t0: float = 0.0) -> tuple[np.ndarray, float]:
        """Run with frozen controls and a locked winch; returns (y, t)."""
        duration = self.SETTLE_DURATION if duration is None else duration
        frozen = replace(controls, winch_locked=True, v_s_set=0.0)
        steps = int(round(duration / self.solver.control_dt))
        t = t0
        for _ in range(steps):
            self.plant.wind.advance(self.solver.control_dt)
            reel = self._latch(t, y)
            y, self._step_hint = step_interval(
                self.plant, t, y, frozen, reel, self.solver, self._jac,
                self._step_hint)
            t += self.solver.control_dt
        return y, t

    def _latch(self, t: float, y: np.ndarray) -> ReelState:
        _, _, l_t, v_t = self.plant.unpack(y)
        return ReelState(l_t_i=l_t, t_i=t, v_t_o=v_t)

    def _controls_from_pilot(self, diag: Diagnostics,
                             override: ManualOverride | None):
        sig = self.pilot.step(diag.kite_pos, diag.kite_vel, diag.l_t,
                              diag.v_t_o, diag.ground_force, override)
        lock = sig.phase is FlightPhase.PARKING and (
            override is None or override.winch is None)
        controls = PlantControls(i_s=sig.i_s, u_s=sig.u_s, u_d=sig.u_d,
                                 v_s_set=sig.v_s_set, winch_locked=lock)
        return controls, sig

    def _record(self, t: float, diag: Diagnostics,
                controls: PlantControls, phase: FlightPhase) -> LogRecord:
        if diag.heading is not None:
            self._heading = diag.heading
        power = diag.ground_force * diag.v_t_o
        return LogRecord(t=t, x=float(diag.kite_pos[0]),
                         y=float(diag.kite_pos[1]),
                         z=float(diag.kite_pos[2]),
                         elevation_deg=math.degrees(diag.elevation),
                         azimuth_deg=math.degrees(diag.azimuth),
                         heading_rad=self._heading,
                         v_a=diag.v_a,
                         force=diag.ground_force,
                         l_t=diag.l_t, v_t_o=diag.v_t_o,
                         u_s=controls.u_s, u_d=controls.u_d,
                         v_s_set=controls.v_s_set,
                         phase=phase.value, power=power)

    def _advance_interval(self, t, y, diag, override):
        if self.pilot is not None:
            controls, sig = self._controls_from_pilot(diag, override)
            phase = sig.phase
        else:
            controls = PlantControls()
            phase = FlightPhase.PARKING
        self.plant.wind.advance(self.solver.control_dt)
        reel = self._latch(t, y)
        y, self._step_hint = step_interval(
            self.plant, t, y, controls, reel, self.solver, self._jac,
            self._step_hint)
        t_new = t + self.solver.control_dt
        diag_new = self.plant.diagnostics(t_new, y, controls, reel)
        record = self._record(t_new, diag_new, controls, phase)
        return t_new, y, diag_new, record

    def run_batch(self, y: np.ndarray, duration: float,
                  t0: float = 0.0) -> tuple[CycleLog, np.ndarray]:
        """Unpaced run; one record per interval; returns (log, state)."""
        steps = int(round(duration / self.solver.control_dt))
        log = CycleLog()
        t = t0
        diag = self.plant.diagnostics(t, y, PlantControls(),
                                      self._latch(t, y))
        for _ in range(steps):
            t, y, diag, record = self._advance_interval(t, y, diag, None)
            log.append(record)
        return log, y

    def run_realtime(self, y: np.ndarray, duration: float,
                     command_source=None, sink=None,
                     t0: float = 0.0) -> tuple[CycleLog, np.ndarray,
                                               RealtimeReport]:
        """Wall-clock paced run.

        Args:
            command_source: Optional callable returning the newest
                ManualOverride or None; polled once per interval.
            sink: Optional callable receiving (record, particle_positions)
                after each interval.

        Returns:
            (log, final state, pacing report). Misses above 10% over any
            5 s window mark the session degraded.
        """
        dt = self.solver.control_dt
        steps = int(round(duration / dt))
        log = CycleLog()
        report = RealtimeReport()
        window = max(1, int(round(5.0 / dt)))
        recent: list[bool] = []
        t = t0
        diag = self.plant.diagnostics(t, y, PlantControls(),
                                      self._latch(t, y))
        start = _time.monotonic()
        for k in range(steps):
            override = command_source() if command_source is not None \
                else None
            t, y, diag, record = self._advance_interval(t, y, diag,
                                                        override)
            log.append(record)
            if sink is not None:
                sink(record, self.plant.particle_positions(y))
            report.intervals += 1
            deadline = start + (k + 1) * dt
            now = _time.monotonic()
            missed = now > deadline + dt
            recent.append(missed)
            if len(recent) > window:
                recent.pop(0)
            if missed:
                report.deadline_misses += 1
            if sum(recent) > 0.1 * window and len(recent) == window:
                report.degraded = True
            remaining = deadline - _time.monotonic()
            if remaining > 0:
                _time.sleep(remaining)
        return log, y, report
